#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/store.hpp"

namespace atlas {

// Directory: one record per image file (by extension), id = generic relative
// path, lexicographic order. Manifest (.csv, .jsonl, .ndjson): row order, ids
// required as a column; an empty id falls back to the content digest.
// Relative uris resolve against the manifest's directory.
std::vector<ImageRecord> scan_corpus(const std::filesystem::path& source);
std::vector<ImageRecord> scan_directory(const std::filesystem::path& root);
std::vector<ImageRecord> scan_manifest(const std::filesystem::path& manifest);

struct DroppedRecord {
    std::string id;
    std::string reason;
};

struct EmbedOptions {
    std::size_t batch_size = 32;
    std::size_t workers = 1;
};

struct EmbedResult {
    EmbeddingStore store;
    std::vector<DroppedRecord> dropped;
};

// Loads the bytes behind a record uri (file path, file:// or http(s)://).
using ImageLoader = std::function<std::vector<std::uint8_t>(const ImageRecord&)>;
std::vector<std::uint8_t> load_record_bytes(const ImageRecord& record);

// Embeds every record; undecodable records are dropped and listed in the
// result. Row order equals record order for any batch size or worker count.
EmbedResult embed_corpus(const std::vector<ImageRecord>& records, EncoderBackend& backend,
                         const EmbedOptions& options = {},
                         const ImageLoader& loader = load_record_bytes);

}  // namespace atlas
