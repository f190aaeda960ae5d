#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace atlas {

// A vector in the shared text-image space. Only `normalize` produces unit
// vectors; a raw vector keeps `unit() == false`.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    static EmbeddingVector raw(std::vector<float> values) {
        return EmbeddingVector(std::move(values), false);
    }

    std::span<const float> values() const noexcept { return values_; }
    std::size_t dimensionality() const noexcept { return values_.size(); }
    bool unit() const noexcept { return unit_; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    friend EmbeddingVector normalize(std::span<const float> v);
    EmbeddingVector(std::vector<float> values, bool unit)
        : values_(std::move(values)), unit_(unit) {}

    std::vector<float> values_;
    bool unit_ = false;
};

// Divides by the Euclidean norm (accumulated in double). Vectors whose norm is
// already within 4 float epsilons of 1 are returned unchanged, which makes the
// operation idempotent bit-for-bit. Throws ZeroVector when the norm < 1e-12.
EmbeddingVector normalize(std::span<const float> v);
inline EmbeddingVector normalize(const EmbeddingVector& v) { return normalize(v.values()); }

// Dot product accumulated in double, clamped to [-1, 1]. Throws DimMismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine_similarity(a.values(), b.values());
}

inline constexpr std::string_view kDefaultTemplate = "a photo of {}";
inline constexpr double kDefaultLogitScale = 100.0;

struct Prompt {
    std::string text;
    std::string templ = std::string(kDefaultTemplate);

    // Replaces the first "{}" in the template with the text. A template
    // without a placeholder is used as-is.
    std::string rendered() const;

    static Prompt verbatim(std::string text) { return Prompt{std::move(text), "{}"}; }
};

struct ConceptScore {
    std::string image_id;
    float score = 0.0f;

    friend bool operator==(const ConceptScore&, const ConceptScore&) = default;
};

// Softmax of scale * similarities, computed in double with max subtraction.
std::vector<double> softmax_scaled(std::span<const double> similarities, double logit_scale);

}  // namespace atlas
