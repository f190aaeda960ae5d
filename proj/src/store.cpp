#include "atlas/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'A', 'T', 'L'};
constexpr double kUnitTolerance = 1e-5;

nlohmann::json record_to_json(const ImageRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["uri"] = r.uri;
    if (r.geo) {
        j["lat"] = r.geo->lat;
        j["lon"] = r.geo->lon;
    }
    j["meta"] = r.metadata;
    return j;
}

ImageRecord record_from_json(const nlohmann::json& j) {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.uri = j.at("uri").get<std::string>();
    if (j.contains("lat") && j.contains("lon")) {
        r.geo = GeoPoint{j.at("lat").get<double>(), j.at("lon").get<double>()};
    }
    if (j.contains("meta")) {
        r.metadata = j.at("meta").get<std::map<std::string, std::string>>();
    }
    return r;
}

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    template <typename T>
    void le(T value) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
        }
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::span<const std::uint8_t> take(std::uint64_t n, const char* what) {
        if (n > data_.size() - pos_) {
            throw CorruptStore(pos_, std::string("truncated ") + what + ": need " +
                                         std::to_string(n) + " bytes, have " +
                                         std::to_string(data_.size() - pos_));
        }
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    template <typename T>
    T le(const char* what) {
        auto b = take(sizeof(T), what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        }
        return static_cast<T>(v);
    }
    std::uint64_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::uint64_t pos_ = 0;
};

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dimensionality, std::string backend_name,
                               std::vector<float> matrix, std::vector<ImageRecord> records)
    : dim_(dimensionality),
      backend_name_(std::move(backend_name)),
      matrix_(std::move(matrix)),
      records_(std::move(records)) {
    if (dim_ == 0) {
        throw Error(ErrorKind::BadArgument, "store dimensionality must be positive");
    }
    if (matrix_.size() != records_.size() * dim_) {
        throw Error(ErrorKind::DimMismatch,
                    "matrix holds " + std::to_string(matrix_.size()) + " values for " +
                        std::to_string(records_.size()) + " records of dimensionality " +
                        std::to_string(dim_));
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        double sq = 0.0;
        for (float x : row(i)) {
            sq += static_cast<double>(x) * x;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > kUnitTolerance) {
            throw Error(ErrorKind::BadArgument, "row " + std::to_string(i) + " ('" +
                                                    records_[i].id + "') is not unit norm");
        }
        const auto& r = records_[i];
        if (r.geo && !r.geo->valid()) {
            throw Error(ErrorKind::BadArgument, "record '" + r.id + "' has out-of-range geo");
        }
        if (!by_id_.emplace(r.id, i).second) {
            throw Error(ErrorKind::DuplicateId, "duplicate id '" + r.id + "'");
        }
    }
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.backend_name_ == b.backend_name_ &&
           a.matrix_.size() == b.matrix_.size() &&
           std::memcmp(a.matrix_.data(), b.matrix_.data(), a.matrix_.size() * sizeof(float)) == 0 &&
           a.records_ == b.records_;
}

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.le<std::uint16_t>(EmbeddingStore::kFormatVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(store.dimensionality()));
    w.le<std::uint64_t>(store.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(store.backend_name().size()));
    w.bytes(store.backend_name().data(), store.backend_name().size());
    for (float x : store.matrix()) {
        w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(x));
    }
    std::string table;
    for (const auto& r : store.records()) {
        table += record_to_json(r).dump();
        table += '\n';
    }
    w.le<std::uint64_t>(table.size());
    w.bytes(table.data(), table.size());
    return w.take();
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    auto magic = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
        throw CorruptStore(0, "bad magic (expected CATL)");
    }
    const auto version_at = r.offset();
    const auto version = r.le<std::uint16_t>("version");
    if (version != EmbeddingStore::kFormatVersion) {
        throw CorruptStore(version_at, "unsupported format version: expected " +
                                           std::to_string(EmbeddingStore::kFormatVersion) +
                                           ", found " + std::to_string(version));
    }
    const auto dim = r.le<std::uint32_t>("dimensionality");
    const auto count = r.le<std::uint64_t>("count");
    const auto name_len = r.le<std::uint32_t>("backend name length");
    auto name_bytes = r.take(name_len, "backend name");
    std::string backend(name_bytes.begin(), name_bytes.end());

    const auto matrix_at = r.offset();
    if (dim != 0 && count > r.remaining() / 4 / dim) {
        throw CorruptStore(matrix_at, "truncated matrix: " + std::to_string(count) + " rows of " +
                                          std::to_string(dim) + " floats do not fit");
    }
    std::vector<float> matrix(static_cast<std::size_t>(count) * dim);
    for (float& x : matrix) {
        x = std::bit_cast<float>(r.le<std::uint32_t>("matrix"));
    }

    const auto table_len = r.le<std::uint64_t>("record table length");
    const auto table_at = r.offset();
    auto table_bytes = r.take(table_len, "record table");
    if (r.remaining() != 0) {
        throw CorruptStore(r.offset(), "trailing bytes after record table");
    }
    std::vector<ImageRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    std::size_t line_start = 0;
    const std::string_view table(reinterpret_cast<const char*>(table_bytes.data()), table_bytes.size());
    while (line_start < table.size()) {
        auto line_end = table.find('\n', line_start);
        if (line_end == std::string_view::npos) {
            throw CorruptStore(table_at + line_start, "unterminated record line");
        }
        try {
            records.push_back(record_from_json(
                nlohmann::json::parse(table.substr(line_start, line_end - line_start))));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptStore(table_at + line_start, std::string("bad record: ") + e.what());
        }
        line_start = line_end + 1;
    }
    if (records.size() != count) {
        throw CorruptStore(table_at, "record table has " + std::to_string(records.size()) +
                                         " entries, header says " + std::to_string(count));
    }
    try {
        return EmbeddingStore(dim, std::move(backend), std::move(matrix), std::move(records));
    } catch (const Error& e) {
        throw CorruptStore(matrix_at, e.what());
    }
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    const auto bytes = serialize_store(store);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(ErrorKind::IoError, "cannot write " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot move store into place at " + path.string() + ": " + ec.message());
    }
}

EmbeddingStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open store " + path.string());
    }
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    return deserialize_store(bytes);
}

}  // namespace atlas
