#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/embedding.hpp"

namespace atlas {

// Contract for anything that maps images and text into the embedding space.
//
// Implementations override the protected hooks and return raw vectors. The
// public entry points validate dimensionality, normalize, wrap foreign
// exceptions into BackendError and serialize calls for backends that do not
// declare themselves thread safe.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    EncoderBackend() = default;
    EncoderBackend(const EncoderBackend&) = delete;
    EncoderBackend& operator=(const EncoderBackend&) = delete;

    virtual std::string name() const = 0;
    virtual std::size_t dimensionality() const = 0;
    virtual bool thread_safe() const { return false; }

    // Throws DecodeError for bytes that are not an image.
    EmbeddingVector encode_image(std::span<const std::uint8_t> bytes);
    EmbeddingVector encode_text(std::string_view text);

protected:
    virtual std::vector<float> image_features(std::span<const std::uint8_t> bytes) = 0;
    virtual std::vector<float> text_features(std::string_view text) = 0;

private:
    template <typename Fn>
    EmbeddingVector checked(Fn&& fn);

    std::mutex call_mutex_;
};

// Deterministic backend without neural weights. Images become the hue
// histogram of their pixels over eight named hue bins; the colour words
// become the matching basis vectors; other text becomes a folded byte
// histogram. Dimensionality 16 (bins 8..15 are padding).
class ToyEncoder final : public EncoderBackend {
public:
    static constexpr std::size_t kDim = 16;
    static constexpr std::size_t kHueBins = 8;

    std::string name() const override { return "toy"; }
    std::size_t dimensionality() const override { return kDim; }
    bool thread_safe() const override { return true; }

    // Index of the hue bin for a colour word, or -1.
    static int colour_bin(std::string_view word);
    // Hue bin (nearest named hue) for an RGB pixel, or -1 for achromatic pixels.
    static int hue_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b);

protected:
    std::vector<float> image_features(std::span<const std::uint8_t> bytes) override;
    std::vector<float> text_features(std::string_view text) override;
};

// Out-of-process encoder: POSTs {"text": ...} as JSON or raw image bytes as
// application/octet-stream to `url` and expects a JSON float array back.
class HttpEncoder final : public EncoderBackend {
public:
    // `dimensionality == 0` probes the endpoint once with a short text.
    explicit HttpEncoder(std::string url, std::size_t dimensionality = 0,
                         std::string name = {});
    ~HttpEncoder() override;

    std::string name() const override { return name_; }
    std::size_t dimensionality() const override { return dim_; }

protected:
    std::vector<float> image_features(std::span<const std::uint8_t> bytes) override;
    std::vector<float> text_features(std::string_view text) override;

private:
    std::vector<float> post(const std::string& body, const std::string& content_type);

    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string name_;
    std::size_t dim_ = 0;
};

// Builds a backend from a short spec: "toy" or "http://host:port/path".
std::unique_ptr<EncoderBackend> make_backend(const std::string& spec);

}  // namespace atlas
