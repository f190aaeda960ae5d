#include "atlas/api.hpp"

#include "atlas/errors.hpp"
#include "atlas/format.hpp"
#include "atlas/index.hpp"
#include "atlas/scoring.hpp"

namespace atlas::api {

namespace {

using nlohmann::json;

json point_json(const ScatterPoint& p) {
    return {{"id", p.image_id},
            {"x", f32_display(p.x)},
            {"y", f32_display(p.y)},
            {"residual", f32_display(p.residual)}};
}

json score_json(const ConceptScore& s) {
    return {{"id", s.image_id}, {"score", f32_display(s.score)}};
}

json bbox_json(const GeoBBox& b) {
    return {{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min}, {"lon_max", b.lon_max}};
}

void require_prompt(const std::string& text, const char* what) {
    if (text.empty()) {
        throw Error(ErrorKind::BadArgument, std::string("missing ") + what);
    }
}

GridSpec grid_for(const EmbeddingStore& store, const std::optional<GeoBBox>& bbox, std::size_t rows,
                  std::size_t cols, Stat stat, std::size_t min_count) {
    GridSpec grid{bbox ? *bbox : GeoBBox::around(store), rows, cols, stat, min_count};
    grid.validate();
    return grid;
}

json map_meta(const HeatGrid& grid) {
    const auto& spec = grid.spec();
    return {{"bbox", bbox_json(spec.bbox)},
            {"rows", spec.rows},
            {"cols", spec.cols},
            {"stat", stat_name(spec.stat)},
            {"min_count", spec.min_count},
            {"count", grid.total_count()}};
}

}  // namespace

std::vector<ScatterPoint> scatter_points(const EmbeddingStore& store, EncoderBackend& backend,
                                         const ScatterQuery& q) {
    require_prompt(q.x, "x prompt");
    require_prompt(q.y, "y prompt");
    if (q.sample && *q.sample == 0) {
        throw Error(ErrorKind::BadArgument, "sample must be at least 1");
    }
    const auto xs = score_values(store, Prompt{q.x, q.templ}, backend);
    const auto ys = score_values(store, Prompt{q.y, q.templ}, backend);
    if (q.sample) {
        const auto rows = sample_indices(store.size(), *q.sample, q.seed);
        return scatter_from_scores(store, xs, ys, q.norm_x, q.norm_y, &rows);
    }
    return scatter_from_scores(store, xs, ys, q.norm_x, q.norm_y);
}

json search(const EmbeddingStore& store, EncoderBackend& backend, const SearchQuery& q) {
    require_prompt(q.prompt, "prompt");
    const Prompt prompt{q.prompt, q.templ};
    const auto hits = search_text(store, prompt, backend, q.k);
    json out_hits = json::array();
    for (const auto& h : hits) {
        out_hits.push_back({{"id", h.image_id}, {"score", f32_display(h.score)}, {"rank", h.rank}});
    }
    return {{"prompt", q.prompt}, {"rendered", prompt.rendered()}, {"k", q.k}, {"hits", std::move(out_hits)}};
}

json scatter(const EmbeddingStore& store, EncoderBackend& backend, const ScatterQuery& q) {
    const auto points = scatter_points(store, backend, q);
    json out_points = json::array();
    for (const auto& p : points) {
        out_points.push_back(point_json(p));
    }
    json corr = nullptr;
    try {
        corr = correlation(points);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateScores) {
            throw;
        }
    }
    const ScatterMeta meta{{Prompt{q.x, q.templ}, q.norm_x}, {Prompt{q.y, q.templ}, q.norm_y},
                           backend.name(), q.sample, q.seed};
    json m = meta.to_json();
    m["count"] = points.size();
    return {{"points", std::move(out_points)}, {"meta", std::move(m)}, {"correlation", corr}};
}

json residual_extremes(const EmbeddingStore& store, EncoderBackend& backend, const ScatterQuery& q,
                       std::size_t n) {
    const auto points = scatter_points(store, backend, q);
    const auto ext = atlas::residual_extremes(points, n);
    json above = json::array(), below = json::array();
    for (const auto& p : ext.above) above.push_back(point_json(p));
    for (const auto& p : ext.below) below.push_back(point_json(p));
    return {{"x", q.x}, {"y", q.y}, {"above", std::move(above)}, {"below", std::move(below)}};
}

json map(const EmbeddingStore& store, EncoderBackend& backend, const MapQuery& q) {
    require_prompt(q.prompt, "prompt");
    const Prompt prompt{q.prompt, q.templ};
    const auto grid = aggregate_map(store, prompt, backend,
                                    grid_for(store, q.bbox, q.rows, q.cols, q.stat, q.min_count));
    json out = grid.to_geojson();
    json meta = map_meta(grid);
    meta["prompt"] = q.prompt;
    meta["rendered"] = prompt.rendered();
    out["meta"] = std::move(meta);
    return out;
}

json contrast(const EmbeddingStore& store, EncoderBackend& backend, const ContrastQuery& q) {
    require_prompt(q.a, "prompt a");
    require_prompt(q.b, "prompt b");
    const Prompt a{q.a, q.templ}, b{q.b, q.templ};
    const auto grid = contrast_map(store, a, b, backend,
                                   grid_for(store, q.bbox, q.rows, q.cols, q.stat, q.min_count));
    json out = grid.to_geojson();
    json meta = map_meta(grid);
    meta["a"] = q.a;
    meta["b"] = q.b;
    meta["rendered_a"] = a.rendered();
    meta["rendered_b"] = b.rendered();
    out["meta"] = std::move(meta);
    return out;
}

json extremes(const EmbeddingStore& store, EncoderBackend& backend, const ExtremesQuery& q) {
    require_prompt(q.prompt, "prompt");
    const auto scores = score_corpus(store, Prompt{q.prompt, q.templ}, backend);
    const auto ext = atlas::extremes(scores, q.n);
    json top = json::array(), bottom = json::array();
    for (const auto& s : ext.top) top.push_back(score_json(s));
    for (const auto& s : ext.bottom) bottom.push_back(score_json(s));
    return {{"prompt", q.prompt}, {"top", std::move(top)}, {"bottom", std::move(bottom)}};
}

std::string payload_text(const json& payload) { return payload.dump() + "\n"; }

json error_body(std::string_view name, std::string_view message) {
    return {{"error", name}, {"message", message}};
}

}  // namespace atlas::api
