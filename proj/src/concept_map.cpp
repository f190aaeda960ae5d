#include "atlas/concept_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "atlas/errors.hpp"
#include "atlas/scoring.hpp"

namespace atlas {

namespace {

// Absorbs representation error in span / interval (0.3 / 0.1 = 2.9999...).
constexpr double kLatticeSlack = 1e-9;
constexpr double kDegenerateStd = 1e-9;
constexpr double kPointPad = 5e-4;

std::size_t steps(double span, double interval) {
    return static_cast<std::size_t>(std::floor(span / interval + kLatticeSlack)) + 1;
}

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};

Moments moments(std::span<const float> v) {
    Moments m;
    if (v.empty()) {
        return m;
    }
    double sum = 0.0;
    for (float x : v) {
        sum += x;
    }
    m.mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (float x : v) {
        const double d = x - m.mean;
        sq += d * d;
    }
    m.stddev = std::sqrt(sq / static_cast<double>(v.size()));
    return m;
}

}  // namespace

void GeoBBox::validate() const {
    const bool finite = std::isfinite(lat_min) && std::isfinite(lat_max) &&
                        std::isfinite(lon_min) && std::isfinite(lon_max);
    if (!finite || lat_min < -90.0 || lat_max > 90.0 || lon_min < -180.0 || lon_max > 180.0) {
        throw Error(ErrorKind::BadBBox, "bbox outside [-90,90] x [-180,180]");
    }
    if (!(lat_min < lat_max)) {
        throw Error(ErrorKind::BadBBox, "lat_min must be below lat_max");
    }
    if (!(lon_min < lon_max)) {
        throw Error(ErrorKind::BadBBox,
                    "lon_min must be below lon_max (antimeridian-crossing boxes are not supported)");
    }
}

GeoBBox GeoBBox::parse(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(' ');
        const auto last = item.find_last_not_of(' ');
        if (first == std::string::npos) {
            throw Error(ErrorKind::BadBBox, "empty bbox component in '" + text + "'");
        }
        const char* b = item.data() + first;
        const char* e = item.data() + last + 1;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || ptr != e) {
            throw Error(ErrorKind::BadBBox, "bad bbox component '" + item + "'");
        }
        parts.push_back(v);
    }
    if (parts.size() != 4) {
        throw Error(ErrorKind::BadBBox, "bbox must be lat_min,lon_min,lat_max,lon_max");
    }
    GeoBBox box{parts[0], parts[2], parts[1], parts[3]};
    box.validate();
    return box;
}

GeoBBox GeoBBox::around(const EmbeddingStore& store) {
    GeoBBox box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    bool any = false;
    for (const auto& r : store.records()) {
        if (!r.geo) {
            continue;
        }
        any = true;
        box.lat_min = std::min(box.lat_min, r.geo->lat);
        box.lat_max = std::max(box.lat_max, r.geo->lat);
        box.lon_min = std::min(box.lon_min, r.geo->lon);
        box.lon_max = std::max(box.lon_max, r.geo->lon);
    }
    if (!any) {
        throw Error(ErrorKind::EmptyRegion, "store has no geo-tagged records");
    }
    if (box.lat_min == box.lat_max) {
        box.lat_min = std::max(-90.0, box.lat_min - kPointPad);
        box.lat_max = std::min(90.0, box.lat_max + kPointPad);
    }
    if (box.lon_min == box.lon_max) {
        box.lon_min = std::max(-180.0, box.lon_min - kPointPad);
        box.lon_max = std::min(180.0, box.lon_max + kPointPad);
    }
    return box;
}

std::size_t lattice_size(const GeoBBox& bbox, double interval) {
    bbox.validate();
    if (!(interval > 0.0) || !std::isfinite(interval)) {
        throw Error(ErrorKind::BadInterval, "interval must be positive");
    }
    if (interval > std::min(bbox.lat_span(), bbox.lon_span())) {
        throw Error(ErrorKind::BadInterval, "interval exceeds the smaller bbox span");
    }
    return steps(bbox.lat_span(), interval) * steps(bbox.lon_span(), interval);
}

std::vector<GeoPoint> sample_points(const GeoBBox& bbox, double interval) {
    const std::size_t total = lattice_size(bbox, interval);
    const std::size_t n_lat = steps(bbox.lat_span(), interval);
    const std::size_t n_lon = total / n_lat;
    std::vector<GeoPoint> out;
    out.reserve(total);
    for (std::size_t i = 0; i < n_lat; ++i) {
        const double lat = std::min(bbox.lat_min + static_cast<double>(i) * interval, bbox.lat_max);
        for (std::size_t j = 0; j < n_lon; ++j) {
            const double lon = std::min(bbox.lon_min + static_cast<double>(j) * interval, bbox.lon_max);
            out.push_back({lat, lon});
        }
    }
    return out;
}

Stat parse_stat(const std::string& text) {
    if (text == "mean") return Stat::Mean;
    if (text == "max") return Stat::Max;
    throw Error(ErrorKind::BadArgument, "stat must be mean or max, got '" + text + "'");
}

std::string_view stat_name(Stat stat) { return stat == Stat::Mean ? "mean" : "max"; }

void GridSpec::validate() const {
    bbox.validate();
    if (rows == 0 || cols == 0) {
        throw Error(ErrorKind::BadArgument, "grid needs at least one row and column");
    }
    if (min_count == 0) {
        throw Error(ErrorKind::BadArgument, "min_count must be at least 1");
    }
}

double GridSpec::lat_edge(std::size_t row) const {
    if (row >= rows) {
        return bbox.lat_max;
    }
    return bbox.lat_min + bbox.lat_span() * static_cast<double>(row) / static_cast<double>(rows);
}

double GridSpec::lon_edge(std::size_t col) const {
    if (col >= cols) {
        return bbox.lon_max;
    }
    return bbox.lon_min + bbox.lon_span() * static_cast<double>(col) / static_cast<double>(cols);
}

namespace {

// Index i with edge(i) <= v < edge(i+1), last interval closed.
template <typename Edge>
std::size_t locate(double v, double lo, double span, std::size_t n, Edge edge) {
    const double guess = std::floor((v - lo) / span * static_cast<double>(n));
    std::size_t i = guess <= 0.0 ? 0 : std::min(n - 1, static_cast<std::size_t>(guess));
    while (i > 0 && v < edge(i)) {
        --i;
    }
    while (i + 1 < n && v >= edge(i + 1)) {
        ++i;
    }
    return i;
}

}  // namespace

std::optional<Cell> assign_cell(const GeoPoint& p, const GridSpec& grid) {
    if (!grid.bbox.contains(p)) {
        return std::nullopt;
    }
    const auto& b = grid.bbox;
    return Cell{locate(p.lat, b.lat_min, b.lat_span(), grid.rows,
                       [&](std::size_t i) { return grid.lat_edge(i); }),
                locate(p.lon, b.lon_min, b.lon_span(), grid.cols,
                       [&](std::size_t i) { return grid.lon_edge(i); })};
}

HeatGrid::HeatGrid(GridSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    cells_.resize(spec_.rows * spec_.cols);
}

std::size_t HeatGrid::total_count() const {
    std::size_t total = 0;
    for (const auto& c : cells_) {
        total += c.count;
    }
    return total;
}

nlohmann::json HeatGrid::to_geojson() const {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c = 0; c < cols(); ++c) {
            const auto& cell = at(r, c);
            if (cell.count == 0) {
                continue;
            }
            const double s = spec_.lat_edge(r), n = spec_.lat_edge(r + 1);
            const double w = spec_.lon_edge(c), e = spec_.lon_edge(c + 1);
            nlohmann::json props;
            props["row"] = r;
            props["col"] = c;
            props["count"] = cell.count;
            props["aggregate"] = cell.aggregate ? nlohmann::json(*cell.aggregate) : nlohmann::json(nullptr);
            props["heat"] = cell.heat ? nlohmann::json(*cell.heat) : nlohmann::json(nullptr);
            features.push_back({{"type", "Feature"},
                                {"geometry",
                                 {{"type", "Polygon"},
                                  {"coordinates", {{{w, s}, {e, s}, {e, n}, {w, n}, {w, s}}}}}},
                                {"properties", std::move(props)}});
        }
    }
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

nlohmann::json HeatGrid::to_matrix() const {
    nlohmann::json counts = nlohmann::json::array();
    nlohmann::json aggregates = nlohmann::json::array();
    nlohmann::json heats = nlohmann::json::array();
    for (std::size_t r = 0; r < rows(); ++r) {
        nlohmann::json cr = nlohmann::json::array(), ar = nlohmann::json::array(),
                       hr = nlohmann::json::array();
        for (std::size_t c = 0; c < cols(); ++c) {
            const auto& cell = at(r, c);
            cr.push_back(cell.count);
            ar.push_back(cell.aggregate ? nlohmann::json(*cell.aggregate) : nlohmann::json(nullptr));
            hr.push_back(cell.heat ? nlohmann::json(*cell.heat) : nlohmann::json(nullptr));
        }
        counts.push_back(std::move(cr));
        aggregates.push_back(std::move(ar));
        heats.push_back(std::move(hr));
    }
    const auto& b = spec_.bbox;
    return {{"bbox", {{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min}, {"lon_max", b.lon_max}}},
            {"rows", rows()},
            {"cols", cols()},
            {"count", std::move(counts)},
            {"aggregate", std::move(aggregates)},
            {"heat", std::move(heats)}};
}

HeatGrid bin_values(const EmbeddingStore& store, std::span<const double> values,
                    const GridSpec& grid) {
    if (values.size() != store.size()) {
        throw Error(ErrorKind::DimMismatch, "one value per record required");
    }
    HeatGrid heat(grid);
    std::vector<double> sum(grid.rows * grid.cols, 0.0);
    std::vector<double> peak(grid.rows * grid.cols, -std::numeric_limits<double>::infinity());
    std::size_t inside = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& geo = store.record(i).geo;
        if (!geo) {
            continue;
        }
        const auto cell = assign_cell(*geo, grid);
        if (!cell) {
            continue;
        }
        ++inside;
        const std::size_t at = cell->row * grid.cols + cell->col;
        ++heat.at(cell->row, cell->col).count;
        sum[at] += values[i];
        peak[at] = std::max(peak[at], values[i]);
    }
    if (inside == 0) {
        throw Error(ErrorKind::EmptyRegion, "no geo-tagged records inside the bbox");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t at = 0; at < sum.size(); ++at) {
        auto& cell = heat.at(at / grid.cols, at % grid.cols);
        if (cell.count == 0) {
            continue;
        }
        cell.aggregate = grid.stat == Stat::Mean ? sum[at] / static_cast<double>(cell.count) : peak[at];
        if (cell.count >= grid.min_count) {
            lo = std::min(lo, *cell.aggregate);
            hi = std::max(hi, *cell.aggregate);
        }
    }
    for (std::size_t at = 0; at < sum.size(); ++at) {
        auto& cell = heat.at(at / grid.cols, at % grid.cols);
        if (cell.count == 0 || cell.count < grid.min_count) {
            continue;
        }
        cell.heat = hi > lo ? std::clamp((*cell.aggregate - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    }
    return heat;
}

HeatGrid aggregate_map(const EmbeddingStore& store, const Prompt& prompt,
                       EncoderBackend& backend, const GridSpec& grid) {
    grid.validate();
    const auto scores = score_values(store, prompt, backend);
    const std::vector<double> values(scores.begin(), scores.end());
    return bin_values(store, values, grid);
}

std::vector<double> contrast_values(std::span<const float> scores_a, std::span<const float> scores_b) {
    if (scores_a.size() != scores_b.size()) {
        throw Error(ErrorKind::DimMismatch, "score vectors differ in length");
    }
    const auto ma = moments(scores_a);
    const auto mb = moments(scores_b);
    if (ma.stddev < kDegenerateStd || mb.stddev < kDegenerateStd) {
        throw Error(ErrorKind::DegenerateScores,
                    "zero variance in prompt scores; z-scores are undefined");
    }
    std::vector<double> out(scores_a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (scores_a[i] - ma.mean) / ma.stddev - (scores_b[i] - mb.mean) / mb.stddev;
    }
    return out;
}

HeatGrid contrast_map(const EmbeddingStore& store, const Prompt& prompt_a,
                      const Prompt& prompt_b, EncoderBackend& backend, const GridSpec& grid) {
    grid.validate();
    const auto a = score_values(store, prompt_a, backend);
    const auto b = score_values(store, prompt_b, backend);
    return bin_values(store, contrast_values(a, b), grid);
}

Extremes extremes(std::span<const ConceptScore> scores, std::size_t n) {
    if (n == 0) {
        throw Error(ErrorKind::BadArgument, "n must be at least 1");
    }
    Extremes out;
    out.top.assign(scores.begin(), scores.end());
    out.bottom.assign(scores.begin(), scores.end());
    const std::size_t take = std::min(n, scores.size());
    std::sort(out.top.begin(), out.top.end(), [](const ConceptScore& a, const ConceptScore& b) {
        return a.score != b.score ? a.score > b.score : a.image_id < b.image_id;
    });
    std::sort(out.bottom.begin(), out.bottom.end(), [](const ConceptScore& a, const ConceptScore& b) {
        return a.score != b.score ? a.score < b.score : a.image_id < b.image_id;
    });
    out.top.resize(take);
    out.bottom.resize(take);
    return out;
}

}  // namespace atlas
