#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace atlas {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    bool valid() const noexcept {
        return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
    }
    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct ImageRecord {
    std::string id;
    std::string uri;
    std::optional<GeoPoint> geo;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Immutable matrix of unit-norm rows, row i belonging to records()[i].
class EmbeddingStore {
public:
    static constexpr std::uint16_t kFormatVersion = 1;

    // Validates shape, unit norms (1e-5) and id uniqueness.
    EmbeddingStore(std::size_t dimensionality, std::string backend_name,
                   std::vector<float> matrix, std::vector<ImageRecord> records);

    std::size_t dimensionality() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const std::string& backend_name() const noexcept { return backend_name_; }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(matrix_).subspan(i * dim_, dim_);
    }
    std::span<const float> matrix() const noexcept { return matrix_; }
    const std::vector<ImageRecord>& records() const noexcept { return records_; }
    const ImageRecord& record(std::size_t i) const { return records_.at(i); }
    std::optional<std::size_t> find(const std::string& id) const;

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

private:
    std::size_t dim_;
    std::string backend_name_;
    std::vector<float> matrix_;
    std::vector<ImageRecord> records_;
    std::map<std::string, std::size_t> by_id_;
};

// Binary layout, all integers little-endian:
//   "CATL" | u16 version | u32 dim | u64 count | u32 len + backend name
//   | count*dim f32 row-major | u64 len + record table (one JSON object per line)
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes);

}  // namespace atlas
