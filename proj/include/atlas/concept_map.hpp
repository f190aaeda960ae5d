#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/embedding.hpp"
#include "atlas/store.hpp"

#include <json.hpp>

namespace atlas {

// Plain-degree box. Boxes crossing the antimeridian (lon_min > lon_max) are
// rejected like any other inverted box.
struct GeoBBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    // Throws BadBBox.
    void validate() const;
    bool contains(const GeoPoint& p) const noexcept {
        return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
    }
    double lat_span() const noexcept { return lat_max - lat_min; }
    double lon_span() const noexcept { return lon_max - lon_min; }

    // "lat_min,lon_min,lat_max,lon_max"
    static GeoBBox parse(const std::string& text);
    // Smallest box around the geo-tagged records, padded when degenerate.
    static GeoBBox around(const EmbeddingStore& store);
};

// Lattice {lat_min + i*interval} x {lon_min + j*interval} inside the box,
// row-major by latitude. Throws BadInterval unless 0 < interval <= min span.
std::vector<GeoPoint> sample_points(const GeoBBox& bbox, double interval);
std::size_t lattice_size(const GeoBBox& bbox, double interval);

enum class Stat { Mean, Max };
Stat parse_stat(const std::string& text);
std::string_view stat_name(Stat stat);

struct GridSpec {
    GeoBBox bbox;
    std::size_t rows = 64;
    std::size_t cols = 64;
    Stat stat = Stat::Mean;
    std::size_t min_count = 3;

    // Throws BadBBox / BadArgument.
    void validate() const;
    double lat_edge(std::size_t row) const;
    double lon_edge(std::size_t col) const;
};

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

// Half-open cells [edge_i, edge_{i+1}); the maximum lat and lon edges are
// inclusive. nullopt for points outside the box.
std::optional<Cell> assign_cell(const GeoPoint& p, const GridSpec& grid);

struct HeatCell {
    std::size_t count = 0;
    std::optional<double> aggregate;  // defined when count >= 1
    std::optional<double> heat;       // defined when count >= min_count
};

class HeatGrid {
public:
    HeatGrid(GridSpec spec);

    const GridSpec& spec() const noexcept { return spec_; }
    std::size_t rows() const noexcept { return spec_.rows; }
    std::size_t cols() const noexcept { return spec_.cols; }
    const HeatCell& at(std::size_t row, std::size_t col) const { return cells_.at(row * spec_.cols + col); }
    HeatCell& at(std::size_t row, std::size_t col) { return cells_.at(row * spec_.cols + col); }
    const std::vector<HeatCell>& cells() const noexcept { return cells_; }
    std::size_t total_count() const;

    // FeatureCollection of cell polygons (lon, lat order) with properties
    // {row, col, count, aggregate, heat}; empty cells are omitted.
    nlohmann::json to_geojson() const;
    // {bbox, rows, cols, count[][], aggregate[][], heat[][]} with nulls.
    nlohmann::json to_matrix() const;

private:
    GridSpec spec_;
    std::vector<HeatCell> cells_;
};

// Bins per-record values (same order as store records) into the grid, applies
// the statistic and min-max heat normalization (0.5 everywhere when all
// defined aggregates are equal). Throws EmptyRegion.
HeatGrid bin_values(const EmbeddingStore& store, std::span<const double> values,
                    const GridSpec& grid);

HeatGrid aggregate_map(const EmbeddingStore& store, const Prompt& prompt,
                       EncoderBackend& backend, const GridSpec& grid);

// Per-image z(a) - z(b), z over the whole corpus with population std.
// Throws DegenerateScores when either score set has zero variance.
std::vector<double> contrast_values(std::span<const float> scores_a, std::span<const float> scores_b);

HeatGrid contrast_map(const EmbeddingStore& store, const Prompt& prompt_a,
                      const Prompt& prompt_b, EncoderBackend& backend, const GridSpec& grid);

struct Extremes {
    std::vector<ConceptScore> top;     // highest first
    std::vector<ConceptScore> bottom;  // lowest first
};

// Ties at the cut go to the smaller id. Throws BadArgument for n == 0.
Extremes extremes(std::span<const ConceptScore> scores, std::size_t n);

}  // namespace atlas
