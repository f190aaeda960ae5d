#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "atlas/backend.hpp"
#include "atlas/concept_map.hpp"
#include "atlas/scatter.hpp"
#include "atlas/store.hpp"

#include <json.hpp>

// Analysis payloads shared by the CLI and the HTTP service. Both surfaces
// build their output here and serialize with payload_text, so identical
// queries yield byte-identical documents.
namespace atlas::api {

struct SearchQuery {
    std::string prompt;
    std::string templ = std::string(kDefaultTemplate);
    std::size_t k = 10;
};

struct ScatterQuery {
    std::string x;
    std::string y;
    std::string templ = "{}";
    Normalization norm_x = Normalization::None;
    Normalization norm_y = Normalization::None;
    std::optional<std::size_t> sample;
    std::uint64_t seed = 0;
};

struct MapQuery {
    std::string prompt;
    std::string templ = std::string(kDefaultTemplate);
    std::optional<GeoBBox> bbox;  // defaults to the extent of the geo records
    std::size_t rows = 64;
    std::size_t cols = 64;
    Stat stat = Stat::Mean;
    std::size_t min_count = 3;
};

struct ContrastQuery {
    std::string a;
    std::string b;
    std::string templ = std::string(kDefaultTemplate);
    std::optional<GeoBBox> bbox;
    std::size_t rows = 64;
    std::size_t cols = 64;
    Stat stat = Stat::Mean;
    std::size_t min_count = 3;
};

struct ExtremesQuery {
    std::string prompt;
    std::string templ = std::string(kDefaultTemplate);
    std::size_t n = 5;
};

// Points of a scatter query, optionally subsampled; shared by the scatter
// payload and file export.
std::vector<ScatterPoint> scatter_points(const EmbeddingStore& store, EncoderBackend& backend,
                                         const ScatterQuery& q);

nlohmann::json search(const EmbeddingStore& store, EncoderBackend& backend, const SearchQuery& q);
// {points: [{id,x,y,residual}], meta: {...}, correlation: number|null}
nlohmann::json scatter(const EmbeddingStore& store, EncoderBackend& backend, const ScatterQuery& q);
// GeoJSON FeatureCollection with a foreign "meta" member.
nlohmann::json map(const EmbeddingStore& store, EncoderBackend& backend, const MapQuery& q);
nlohmann::json contrast(const EmbeddingStore& store, EncoderBackend& backend, const ContrastQuery& q);
nlohmann::json extremes(const EmbeddingStore& store, EncoderBackend& backend, const ExtremesQuery& q);
// Residual extremes of a scatter: {above: [...], below: [...]}.
nlohmann::json residual_extremes(const EmbeddingStore& store, EncoderBackend& backend,
                                 const ScatterQuery& q, std::size_t n);

std::string payload_text(const nlohmann::json& payload);

// {"error": name, "message": text}
nlohmann::json error_body(std::string_view name, std::string_view message);

}  // namespace atlas::api
