#include "atlas/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "atlas/errors.hpp"
#include "atlas/image.hpp"
#include "csv.hpp"

namespace fs = std::filesystem;

namespace atlas {

namespace {

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) {
        text.erase(0, 3);
    }
    return text;
}

bool is_url(const std::string& uri) {
    return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0;
}

std::string resolve_uri(const std::string& uri, const fs::path& base) {
    if (is_url(uri)) {
        return uri;
    }
    std::string path = uri;
    if (path.rfind("file://", 0) == 0) {
        path.erase(0, 7);
    }
    fs::path p(path);
    if (p.is_relative()) {
        p = base / p;
    }
    return p.lexically_normal().string();
}

std::optional<double> parse_coordinate(const std::string& text, std::size_t line, const char* what) {
    if (text.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ManifestError(line, std::string(what) + " is not a number: '" + text + "'");
    }
    return v;
}

std::optional<GeoPoint> make_geo(std::optional<double> lat, std::optional<double> lon,
                                 std::size_t line) {
    if (!lat && !lon) {
        return std::nullopt;
    }
    if (!lat || !lon) {
        throw ManifestError(line, "lat and lon must be given together");
    }
    if (*lat < -90.0 || *lat > 90.0) {
        throw ManifestError(line, "lat " + std::to_string(*lat) + " outside [-90, 90]");
    }
    if (*lon < -180.0 || *lon > 180.0) {
        throw ManifestError(line, "lon " + std::to_string(*lon) + " outside [-180, 180]");
    }
    return GeoPoint{*lat, *lon};
}

void finish_record(ImageRecord& rec, std::size_t line, std::set<std::string>& seen) {
    if (rec.uri.empty()) {
        throw ManifestError(line, "missing uri");
    }
    if (rec.id.empty()) {
        try {
            rec.id = hex_digest(load_record_bytes(rec));
        } catch (const Error& e) {
            throw ManifestError(line, std::string("empty id and unreadable image: ") + e.what());
        }
    }
    if (!seen.insert(rec.id).second) {
        throw Error(ErrorKind::DuplicateId, "duplicate id '" + rec.id + "' (line " +
                                                std::to_string(line) + ")");
    }
}

std::vector<ImageRecord> scan_csv(const fs::path& manifest) {
    const auto rows = detail::read_csv(read_text(manifest));
    if (rows.empty()) {
        throw ManifestError(1, "empty manifest");
    }
    const auto& header = rows.front().fields;
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = column("id");
    const auto uri_col = column("uri");
    if (!id_col || !uri_col) {
        throw ManifestError(rows.front().line, "header must name the id and uri columns");
    }
    const auto lat_col = column("lat");
    const auto lon_col = column("lon");
    const fs::path base = manifest.parent_path();

    std::vector<ImageRecord> out;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != header.size()) {
            throw ManifestError(row.line, "expected " + std::to_string(header.size()) +
                                              " fields, found " + std::to_string(row.fields.size()));
        }
        ImageRecord rec;
        rec.id = row.fields[*id_col];
        rec.uri = row.fields[*uri_col].empty() ? "" : resolve_uri(row.fields[*uri_col], base);
        rec.geo = make_geo(lat_col ? parse_coordinate(row.fields[*lat_col], row.line, "lat") : std::nullopt,
                           lon_col ? parse_coordinate(row.fields[*lon_col], row.line, "lon") : std::nullopt,
                           row.line);
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c != *id_col && c != *uri_col && c != lat_col && c != lon_col) {
                rec.metadata[header[c]] = row.fields[c];
            }
        }
        finish_record(rec, row.line, seen);
        out.push_back(std::move(rec));
    }
    return out;
}

std::optional<double> json_coordinate(const nlohmann::json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_string()) {
        return parse_coordinate(v.get<std::string>(), line, key);
    }
    throw ManifestError(line, std::string(key) + " must be a number");
}

std::vector<ImageRecord> scan_jsonl(const fs::path& manifest) {
    std::istringstream in(read_text(manifest));
    const fs::path base = manifest.parent_path();
    std::vector<ImageRecord> out;
    std::set<std::string> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') {
            text.pop_back();
        }
        if (text.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const auto obj = nlohmann::json::parse(text, nullptr, false);
        if (!obj.is_object()) {
            throw ManifestError(line, "not a JSON object");
        }
        if (!obj.contains("id") || !obj.at("id").is_string()) {
            throw ManifestError(line, "id must be a string");
        }
        if (!obj.contains("uri") || !obj.at("uri").is_string()) {
            throw ManifestError(line, "uri must be a string");
        }
        ImageRecord rec;
        rec.id = obj.at("id").get<std::string>();
        const auto uri = obj.at("uri").get<std::string>();
        rec.uri = uri.empty() ? "" : resolve_uri(uri, base);
        rec.geo = make_geo(json_coordinate(obj, "lat", line), json_coordinate(obj, "lon", line), line);
        for (const auto& [key, value] : obj.items()) {
            if (key == "id" || key == "uri" || key == "lat" || key == "lon") {
                continue;
            }
            rec.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        finish_record(rec, line, seen);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

std::vector<ImageRecord> scan_directory(const fs::path& root) {
    std::vector<ImageRecord> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || !has_image_extension(entry.path())) {
            continue;
        }
        ImageRecord rec;
        rec.id = entry.path().lexically_relative(root).generic_string();
        rec.uri = entry.path().lexically_normal().string();
        out.push_back(std::move(rec));
    }
    std::sort(out.begin(), out.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    return out;
}

std::vector<ImageRecord> scan_manifest(const fs::path& manifest) {
    std::string ext = manifest.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") {
        return scan_jsonl(manifest);
    }
    return scan_csv(manifest);
}

std::vector<ImageRecord> scan_corpus(const fs::path& source) {
    if (fs::is_directory(source)) {
        return scan_directory(source);
    }
    if (fs::is_regular_file(source)) {
        return scan_manifest(source);
    }
    throw Error(ErrorKind::IoError, "no such corpus source: " + source.string());
}

std::vector<std::uint8_t> load_record_bytes(const ImageRecord& record) {
    if (!is_url(record.uri)) {
        std::string path = record.uri;
        if (path.rfind("file://", 0) == 0) {
            path.erase(0, 7);
        }
        return read_file(path);
    }
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(record.uri, m, kUrl)) {
        throw Error(ErrorKind::IoError, "bad url " + record.uri);
    }
    httplib::Client client(m[1].str());
    client.set_follow_location(true);
    auto res = client.Get(m[2].matched ? m[2].str() : "/");
    if (!res || res->status != 200) {
        throw Error(ErrorKind::IoError, "cannot fetch " + record.uri);
    }
    return {res->body.begin(), res->body.end()};
}

EmbedResult embed_corpus(const std::vector<ImageRecord>& records, EncoderBackend& backend,
                         const EmbedOptions& options, const ImageLoader& loader) {
    if (records.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no records to embed");
    }
    if (options.batch_size == 0 || options.workers == 0) {
        throw Error(ErrorKind::BadArgument, "batch_size and workers must be positive");
    }
    const std::size_t dim = backend.dimensionality();
    const std::size_t n = records.size();
    std::vector<std::optional<EmbeddingVector>> rows(n);
    std::vector<std::string> reasons(n);

    const std::size_t batches = (n + options.batch_size - 1) / options.batch_size;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= batches || abort.load()) {
                return;
            }
            const std::size_t end = std::min(n, (b + 1) * options.batch_size);
            for (std::size_t i = b * options.batch_size; i < end; ++i) {
                try {
                    rows[i] = backend.encode_image(loader(records[i]));
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::DecodeError || e.kind() == ErrorKind::IoError) {
                        reasons[i] = std::string(e.name()) + ": " + e.what();
                        continue;
                    }
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    abort = true;
                    return;
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    abort = true;
                    return;
                }
            }
        }
    };

    const std::size_t workers = std::min(options.workers, batches);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<float> matrix;
    std::vector<ImageRecord> kept;
    std::vector<DroppedRecord> dropped;
    for (std::size_t i = 0; i < n; ++i) {
        if (!rows[i]) {
            dropped.push_back({records[i].id, reasons[i]});
            continue;
        }
        const auto values = rows[i]->values();
        matrix.insert(matrix.end(), values.begin(), values.end());
        kept.push_back(records[i]);
    }
    if (kept.empty()) {
        throw Error(ErrorKind::EmptyCorpus,
                    "all " + std::to_string(n) + " records failed to decode (first: " +
                        dropped.front().id + ": " + dropped.front().reason + ")");
    }
    return EmbedResult{EmbeddingStore(dim, backend.name(), std::move(matrix), std::move(kept)),
                       std::move(dropped)};
}

}  // namespace atlas
