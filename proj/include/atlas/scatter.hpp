#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/embedding.hpp"
#include "atlas/store.hpp"

#include <json.hpp>

namespace atlas {

enum class Normalization { None, Rank, ZScore };
Normalization parse_normalization(const std::string& text);
std::string_view normalization_name(Normalization n);

struct AxisSpec {
    Prompt prompt;
    Normalization normalization = Normalization::None;
};

struct ScatterPoint {
    std::string image_id;
    double x = 0.0;
    double y = 0.0;
    double residual = 0.0;  // (y - x) / sqrt(2)

    friend bool operator==(const ScatterPoint&, const ScatterPoint&) = default;
};

// (rank - 1) / (n - 1) with average ranks for ties; a single value maps to 0.
std::vector<double> rank_normalize(std::span<const float> scores);
// Population z-scores. Throws DegenerateScores on zero variance.
std::vector<double> zscore_normalize(std::span<const float> scores);
std::vector<double> apply_normalization(std::span<const float> scores, Normalization n);

double diagonal_residual(double x, double y) noexcept;

// Builds points from two already-computed score vectors (store order). When
// `rows` is given only those store rows are kept, and normalization is
// computed over the kept rows.
std::vector<ScatterPoint> scatter_from_scores(const EmbeddingStore& store,
                                              std::span<const float> x_scores,
                                              std::span<const float> y_scores,
                                              Normalization x_norm, Normalization y_norm,
                                              const std::vector<std::size_t>* rows = nullptr);

// Scores both axes through score_corpus, normalizes, then computes residuals.
std::vector<ScatterPoint> scatter(const EmbeddingStore& store, const AxisSpec& axis_x,
                                  const AxisSpec& axis_y, EncoderBackend& backend);

// Pearson correlation of (x, y). Throws DegenerateScores for < 2 points or a
// zero-variance axis.
double correlation(std::span<const ScatterPoint> points);

struct ResidualExtremes {
    std::vector<ScatterPoint> above;  // largest residual first
    std::vector<ScatterPoint> below;  // smallest residual first
};

ResidualExtremes residual_extremes(std::span<const ScatterPoint> points, std::size_t n);

// Seeded uniform sample of `n` row indices in ascending order (all rows when
// n >= size).
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

enum class ExportFormat { Csv, Jsonl };
ExportFormat format_for(const std::filesystem::path& path);

struct ScatterMeta {
    AxisSpec x;
    AxisSpec y;
    std::string backend;
    std::optional<std::size_t> sample;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

// Columns id,x,y,residual rendered as the shortest decimal that round-trips
// the f32 value. Writes `<path>.meta.json` beside the data when meta is given.
void export_scatter(std::span<const ScatterPoint> points, const std::filesystem::path& path,
                    ExportFormat format, const ScatterMeta* meta = nullptr);
std::vector<ScatterPoint> import_scatter(const std::filesystem::path& path, ExportFormat format);

}  // namespace atlas
