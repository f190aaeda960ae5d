#include "atlas/backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "atlas/errors.hpp"
#include "atlas/image.hpp"

namespace atlas {

template <typename Fn>
EmbeddingVector EncoderBackend::checked(Fn&& fn) {
    std::vector<float> raw;
    try {
        if (thread_safe()) {
            raw = fn();
        } else {
            std::lock_guard lock(call_mutex_);
            raw = fn();
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::BackendError, name() + ": " + e.what());
    }
    if (raw.size() != dimensionality()) {
        throw Error(ErrorKind::BackendError,
                    name() + ": returned " + std::to_string(raw.size()) +
                        " values, declared dimensionality " + std::to_string(dimensionality()));
    }
    try {
        return normalize(raw);
    } catch (const Error& e) {
        throw Error(ErrorKind::BackendError, name() + ": " + e.what());
    }
}

EmbeddingVector EncoderBackend::encode_image(std::span<const std::uint8_t> bytes) {
    return checked([&] { return image_features(bytes); });
}

EmbeddingVector EncoderBackend::encode_text(std::string_view text) {
    return checked([&] { return text_features(text); });
}

// --- toy ---------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, ToyEncoder::kHueBins> kColourWords = {
    "red", "orange", "yellow", "green", "cyan", "blue", "purple", "magenta"};
constexpr std::array<double, ToyEncoder::kHueBins> kHueCentres = {0, 30, 60, 120, 180, 240, 270, 300};
// Pixels with max-min channel spread below this carry no usable hue.
constexpr int kMinChroma = 16;
constexpr std::size_t kAchromaticBin = ToyEncoder::kHueBins;

}  // namespace

int ToyEncoder::colour_bin(std::string_view word) {
    for (std::size_t i = 0; i < kColourWords.size(); ++i) {
        if (kColourWords[i] == word) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int ToyEncoder::hue_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int hi = std::max({r, g, b});
    const int lo = std::min({r, g, b});
    const int chroma = hi - lo;
    if (chroma < kMinChroma) {
        return -1;
    }
    double hue;
    if (hi == r) {
        hue = 60.0 * std::fmod(static_cast<double>(g - b) / chroma + 6.0, 6.0);
    } else if (hi == g) {
        hue = 60.0 * (static_cast<double>(b - r) / chroma + 2.0);
    } else {
        hue = 60.0 * (static_cast<double>(r - g) / chroma + 4.0);
    }
    int best = 0;
    double best_dist = 361.0;
    for (std::size_t i = 0; i < kHueCentres.size(); ++i) {
        double d = std::abs(hue - kHueCentres[i]);
        d = std::min(d, 360.0 - d);
        if (d < best_dist) {
            best_dist = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::vector<float> ToyEncoder::image_features(std::span<const std::uint8_t> bytes) {
    const RgbImage img = decode_rgb(bytes);
    std::vector<std::uint64_t> counts(kDim, 0);
    for (std::size_t i = 0; i + 2 < img.pixels.size(); i += 3) {
        const int bin = hue_bin(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
        ++counts[bin < 0 ? kAchromaticBin : static_cast<std::size_t>(bin)];
    }
    return {counts.begin(), counts.end()};
}

std::vector<float> ToyEncoder::text_features(std::string_view text) {
    if (text.empty()) {
        throw Error(ErrorKind::BadArgument, "toy: empty text");
    }
    std::vector<float> out(kDim, 0.0f);
    bool any_colour = false;
    std::string word;
    auto flush = [&] {
        if (const int bin = colour_bin(word); bin >= 0) {
            out[static_cast<std::size_t>(bin)] += 1.0f;
            any_colour = true;
        }
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    if (any_colour) {
        return out;
    }
    for (unsigned char c : text) {
        out[c % kDim] += 1.0f;
    }
    return out;
}

// --- http --------------------------------------------------------------------

struct HttpEncoder::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string path;
};

HttpEncoder::HttpEncoder(std::string url, std::size_t dimensionality, std::string name)
    : impl_(std::make_unique<Impl>()), name_(std::move(name)) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) {
        throw Error(ErrorKind::ConfigError, "bad encoder url '" + url + "'");
    }
    impl_->client = std::make_unique<httplib::Client>(m[1].str());
    impl_->client->set_connection_timeout(5);
    impl_->client->set_read_timeout(120);
    impl_->path = m[2].matched ? m[2].str() : "/";
    if (name_.empty()) {
        name_ = "http:" + url;
    }
    dim_ = dimensionality;
    if (dim_ == 0) {
        nlohmann::json probe = {{"text", "a"}};
        try {
            dim_ = post(probe.dump(), "application/json").size();
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(ErrorKind::BackendError, name_ + ": " + e.what());
        }
        if (dim_ == 0) {
            throw Error(ErrorKind::BackendError, name_ + ": empty embedding from probe");
        }
    }
}

HttpEncoder::~HttpEncoder() = default;

std::vector<float> HttpEncoder::post(const std::string& body, const std::string& content_type) {
    auto res = impl_->client->Post(impl_->path, body, content_type);
    if (!res) {
        throw Error(ErrorKind::BackendError,
                    name_ + ": transport error: " + httplib::to_string(res.error()));
    }
    if (res->status == 400 || res->status == 415 || res->status == 422) {
        throw Error(ErrorKind::DecodeError, name_ + ": rejected input: " + res->body);
    }
    if (res->status != 200) {
        throw Error(ErrorKind::BackendError,
                    name_ + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (!parsed.is_array()) {
        throw Error(ErrorKind::BackendError, name_ + ": expected a JSON array");
    }
    std::vector<float> out;
    out.reserve(parsed.size());
    for (const auto& v : parsed) {
        if (!v.is_number()) {
            throw Error(ErrorKind::BackendError, name_ + ": non-numeric embedding component");
        }
        out.push_back(v.get<float>());
    }
    return out;
}

std::vector<float> HttpEncoder::image_features(std::span<const std::uint8_t> bytes) {
    return post(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
}

std::vector<float> HttpEncoder::text_features(std::string_view text) {
    nlohmann::json body = {{"text", std::string(text)}};
    return post(body.dump(), "application/json");
}

std::unique_ptr<EncoderBackend> make_backend(const std::string& spec) {
    if (spec == "toy") {
        return std::make_unique<ToyEncoder>();
    }
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        return std::make_unique<HttpEncoder>(spec);
    }
    throw Error(ErrorKind::ConfigError, "unknown backend '" + spec + "' (expected toy or an http url)");
}

}  // namespace atlas
