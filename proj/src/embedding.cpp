#include "atlas/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

constexpr double kZeroNorm = 1e-12;
// Norms this close to 1 are already unit at float precision.
constexpr double kUnitSlack = 4.0 * std::numeric_limits<float>::epsilon();

double squared_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) {
        sum += static_cast<double>(x) * static_cast<double>(x);
    }
    return sum;
}

}  // namespace

EmbeddingVector normalize(std::span<const float> v) {
    const double norm = std::sqrt(squared_norm(v));
    if (!(norm >= kZeroNorm) || !std::isfinite(norm)) {
        throw Error(ErrorKind::ZeroVector, "cannot normalize a zero or non-finite vector");
    }
    std::vector<float> out(v.begin(), v.end());
    if (std::abs(norm - 1.0) > kUnitSlack) {
        for (float& x : out) {
            x = static_cast<float>(static_cast<double>(x) / norm);
        }
    }
    return EmbeddingVector(std::move(out), true);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimMismatch, "dimensionality " + std::to_string(a.size()) +
                                                " vs " + std::to_string(b.size()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return std::clamp(dot, -1.0, 1.0);
}

std::string Prompt::rendered() const {
    const auto pos = templ.find("{}");
    if (pos == std::string::npos) {
        return templ;
    }
    std::string out = templ;
    out.replace(pos, 2, text);
    return out;
}

std::vector<double> softmax_scaled(std::span<const double> similarities, double logit_scale) {
    std::vector<double> out(similarities.size());
    if (similarities.empty()) {
        return out;
    }
    const double peak = *std::max_element(similarities.begin(), similarities.end());
    double total = 0.0;
    for (std::size_t i = 0; i < similarities.size(); ++i) {
        out[i] = std::exp(logit_scale * (similarities[i] - peak));
        total += out[i];
    }
    for (double& p : out) {
        p /= total;
    }
    return out;
}

}  // namespace atlas
