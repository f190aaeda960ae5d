#include "atlas/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "atlas/errors.hpp"
#include "atlas/format.hpp"
#include "atlas/image.hpp"
#include "atlas/scoring.hpp"
#include "csv.hpp"

namespace atlas {

namespace {

constexpr double kDegenerateStd = 1e-9;

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string f32_text(double v) { return f32_to_string(static_cast<float>(v)); }

}  // namespace

Normalization parse_normalization(const std::string& text) {
    if (text == "none") return Normalization::None;
    if (text == "rank") return Normalization::Rank;
    if (text == "zscore") return Normalization::ZScore;
    throw Error(ErrorKind::BadArgument, "normalization must be none, rank or zscore, got '" + text + "'");
}

std::string_view normalization_name(Normalization n) {
    switch (n) {
        case Normalization::None: return "none";
        case Normalization::Rank: return "rank";
        case Normalization::ZScore: return "zscore";
    }
    return "none";
}

std::vector<double> rank_normalize(std::span<const float> scores) {
    const std::size_t n = scores.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) {
        return out;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        // 1-based ranks i+1 .. j+1 share their mean.
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) {
            out[order[t]] = (avg_rank - 1.0) / static_cast<double>(n - 1);
        }
        i = j + 1;
    }
    return out;
}

std::vector<double> zscore_normalize(std::span<const float> scores) {
    if (scores.empty()) {
        return {};
    }
    double sum = 0.0;
    for (float s : scores) {
        sum += s;
    }
    const double mean = sum / static_cast<double>(scores.size());
    double sq = 0.0;
    for (float s : scores) {
        sq += (s - mean) * (s - mean);
    }
    const double stddev = std::sqrt(sq / static_cast<double>(scores.size()));
    if (stddev < kDegenerateStd) {
        throw Error(ErrorKind::DegenerateScores, "zero variance on axis; z-scores are undefined");
    }
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = (scores[i] - mean) / stddev;
    }
    return out;
}

std::vector<double> apply_normalization(std::span<const float> scores, Normalization n) {
    switch (n) {
        case Normalization::Rank: return rank_normalize(scores);
        case Normalization::ZScore: return zscore_normalize(scores);
        case Normalization::None: break;
    }
    return {scores.begin(), scores.end()};
}

double diagonal_residual(double x, double y) noexcept { return (y - x) / std::sqrt(2.0); }

std::vector<ScatterPoint> scatter_from_scores(const EmbeddingStore& store,
                                              std::span<const float> x_scores,
                                              std::span<const float> y_scores,
                                              Normalization x_norm, Normalization y_norm,
                                              const std::vector<std::size_t>* rows) {
    if (x_scores.size() != store.size() || y_scores.size() != store.size()) {
        throw Error(ErrorKind::DimMismatch, "one score per record required on each axis");
    }
    std::vector<std::size_t> keep;
    if (rows) {
        keep = *rows;
    } else {
        keep.resize(store.size());
        std::iota(keep.begin(), keep.end(), 0);
    }
    std::vector<float> xk, yk;
    xk.reserve(keep.size());
    yk.reserve(keep.size());
    for (std::size_t i : keep) {
        xk.push_back(x_scores[i]);
        yk.push_back(y_scores[i]);
    }
    const auto xs = apply_normalization(xk, x_norm);
    const auto ys = apply_normalization(yk, y_norm);
    std::vector<ScatterPoint> out;
    out.reserve(keep.size());
    for (std::size_t t = 0; t < keep.size(); ++t) {
        out.push_back({store.record(keep[t]).id, xs[t], ys[t], diagonal_residual(xs[t], ys[t])});
    }
    return out;
}

std::vector<ScatterPoint> scatter(const EmbeddingStore& store, const AxisSpec& axis_x,
                                  const AxisSpec& axis_y, EncoderBackend& backend) {
    const auto x = score_values(store, axis_x.prompt, backend);
    const auto y = score_values(store, axis_y.prompt, backend);
    return scatter_from_scores(store, x, y, axis_x.normalization, axis_y.normalization);
}

double correlation(std::span<const ScatterPoint> points) {
    if (points.size() < 2) {
        throw Error(ErrorKind::DegenerateScores, "correlation needs at least 2 points");
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        const double dx = p.x - mx, dy = p.y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (std::sqrt(sxx / n) < kDegenerateStd || std::sqrt(syy / n) < kDegenerateStd) {
        throw Error(ErrorKind::DegenerateScores, "zero variance on an axis; correlation is undefined");
    }
    // sqrt(sxx * syy) is exact when sxx == syy, so y = x gives exactly 1.
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ResidualExtremes residual_extremes(std::span<const ScatterPoint> points, std::size_t n) {
    if (n == 0) {
        throw Error(ErrorKind::BadArgument, "n must be at least 1");
    }
    ResidualExtremes out;
    out.above.assign(points.begin(), points.end());
    out.below.assign(points.begin(), points.end());
    std::sort(out.above.begin(), out.above.end(), [](const ScatterPoint& a, const ScatterPoint& b) {
        return a.residual != b.residual ? a.residual > b.residual : a.image_id < b.image_id;
    });
    std::sort(out.below.begin(), out.below.end(), [](const ScatterPoint& a, const ScatterPoint& b) {
        return a.residual != b.residual ? a.residual < b.residual : a.image_id < b.image_id;
    });
    const std::size_t take = std::min(n, points.size());
    out.above.resize(take);
    out.below.resize(take);
    return out;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> all(size);
    std::iota(all.begin(), all.end(), 0);
    if (n >= size) {
        return all;
    }
    std::vector<std::size_t> out;
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
    std::sort(out.begin(), out.end());
    return out;
}

ExportFormat format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".jsonl" || ext == ".ndjson" ? ExportFormat::Jsonl : ExportFormat::Csv;
}

nlohmann::json ScatterMeta::to_json() const {
    nlohmann::json j;
    j["x"] = {{"prompt", x.prompt.text},
              {"template", x.prompt.templ},
              {"normalization", normalization_name(x.normalization)}};
    j["y"] = {{"prompt", y.prompt.text},
              {"template", y.prompt.templ},
              {"normalization", normalization_name(y.normalization)}};
    j["backend"] = backend;
    j["sample"] = sample ? nlohmann::json(*sample) : nlohmann::json(nullptr);
    j["seed"] = seed;
    return j;
}

void export_scatter(std::span<const ScatterPoint> points, const std::filesystem::path& path,
                    ExportFormat format, const ScatterMeta* meta) {
    if (points.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no points to export");
    }
    std::ostringstream out;
    if (format == ExportFormat::Csv) {
        out << "id,x,y,residual\n";
        for (const auto& p : points) {
            out << detail::csv_field(p.image_id) << ',' << f32_text(p.x) << ',' << f32_text(p.y)
                << ',' << f32_text(p.residual) << '\n';
        }
    } else {
        for (const auto& p : points) {
            nlohmann::json j = {{"id", p.image_id},
                                {"x", f32_display(p.x)},
                                {"y", f32_display(p.y)},
                                {"residual", f32_display(p.residual)}};
            out << j.dump() << '\n';
        }
    }
    write_text(path, out.str());
    if (meta) {
        write_text(path.string() + ".meta.json", meta->to_json().dump(2) + "\n");
    }
}

std::vector<ScatterPoint> import_scatter(const std::filesystem::path& path, ExportFormat format) {
    const std::string text = read_text(path);
    std::vector<ScatterPoint> out;
    if (format == ExportFormat::Csv) {
        const auto rows = detail::read_csv(text);
        if (rows.empty() || rows.front().fields != std::vector<std::string>{"id", "x", "y", "residual"}) {
            throw Error(ErrorKind::BadArgument, path.string() + ": expected header id,x,y,residual");
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& f = rows[r].fields;
            if (f.size() != 4) {
                throw ManifestError(rows[r].line, "expected 4 fields");
            }
            out.push_back({f[0], parse_f32(f[1]), parse_f32(f[2]), parse_f32(f[3])});
        }
        return out;
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line);
        out.push_back({j.at("id").get<std::string>(), static_cast<float>(j.at("x").get<double>()),
                       static_cast<float>(j.at("y").get<double>()),
                       static_cast<float>(j.at("residual").get<double>())});
    }
    return out;
}

}  // namespace atlas
