#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/store.hpp"

namespace atlas::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Row-major n x dim matrix of unit vectors drawn from a seeded Gaussian.
std::vector<float> random_unit_matrix(std::size_t n, std::size_t dim, std::uint64_t seed);
std::vector<float> random_unit_vector(std::size_t dim, std::uint64_t seed);

// Ids "r00000", "r00001", ... so lexicographic order equals row order.
std::string row_id(std::size_t i);

EmbeddingStore make_store(std::vector<float> matrix, std::size_t dim,
                          std::vector<std::optional<GeoPoint>> geo = {},
                          std::vector<std::string> ids = {});

// Backend whose text encodings come from a lookup table; images are unsupported.
class TableEncoder final : public EncoderBackend {
public:
    TableEncoder(std::size_t dim, std::map<std::string, std::vector<float>> table)
        : dim_(dim), table_(std::move(table)) {}

    std::string name() const override { return "table"; }
    std::size_t dimensionality() const override { return dim_; }

protected:
    std::vector<float> image_features(std::span<const std::uint8_t> bytes) override;
    std::vector<float> text_features(std::string_view text) override;

private:
    std::size_t dim_;
    std::map<std::string, std::vector<float>> table_;
};

struct Rgb {
    std::uint8_t r, g, b;
};

inline const std::map<std::string, Rgb>& named_colours() {
    static const std::map<std::string, Rgb> colours = {
        {"red", {255, 0, 0}},     {"orange", {255, 128, 0}}, {"yellow", {255, 255, 0}},
        {"green", {0, 255, 0}},   {"cyan", {0, 255, 255}},   {"blue", {0, 0, 255}},
        {"purple", {128, 0, 255}}, {"magenta", {255, 0, 255}}};
    return colours;
}

// Writes one solid PNG per entry into dir/img and a manifest.csv with
// columns id,uri,lat,lon,colour. Returns the manifest path.
struct SolidImage {
    std::string id;
    std::string colour;
    std::optional<GeoPoint> geo;
};
std::filesystem::path write_solid_corpus(const std::filesystem::path& dir,
                                         const std::vector<SolidImage>& images);

// Binary PPM (P6) of `width` x `height` random pixels.
std::vector<std::uint8_t> random_ppm(int width, int height, std::uint64_t seed);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace atlas::testing
