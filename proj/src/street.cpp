#include "atlas/street.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "atlas/image.hpp"
#include "csv.hpp"

namespace fs = std::filesystem;

namespace atlas {

using detail::csv_field;

namespace {

std::string coordinate(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

struct Outcome {
    std::optional<Panorama> pano;
    std::optional<std::string> failure;
    bool visited = false;
};

Outcome fetch_with_retry(StreetImageryClient& client, const GeoPoint& point,
                         const RetryPolicy& policy,
                         const std::function<void(std::chrono::milliseconds)>& sleep) {
    auto backoff = policy.initial_backoff;
    std::string last;
    for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(1, policy.attempts); ++attempt) {
        try {
            return {client.fetch(point), std::nullopt, true};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ClientError) {
                throw;
            }
            last = e.what();
        }
        if (attempt < policy.attempts) {
            sleep(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<std::int64_t>(std::llround(static_cast<double>(backoff.count()) * policy.multiplier)));
        }
    }
    return {std::nullopt, "after " + std::to_string(policy.attempts) + " attempts: " + last, true};
}

}  // namespace

void write_manifest_csv(const std::vector<ImageRecord>& records, const fs::path& path) {
    std::set<std::string> keys;
    for (const auto& r : records) {
        for (const auto& [k, v] : r.metadata) {
            keys.insert(k);
        }
    }
    std::ostringstream out;
    out << "id,uri,lat,lon";
    for (const auto& k : keys) {
        out << ',' << csv_field(k);
    }
    out << '\n';
    for (const auto& r : records) {
        out << csv_field(r.id) << ',' << csv_field(r.uri) << ',';
        if (r.geo) {
            out << coordinate(r.geo->lat) << ',' << coordinate(r.geo->lon);
        } else {
            out << ',';
        }
        for (const auto& k : keys) {
            auto it = r.metadata.find(k);
            out << ',' << (it == r.metadata.end() ? "" : csv_field(it->second));
        }
        out << '\n';
    }
    const std::string text = out.str();
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FetchResult fetch_panoramas(const std::vector<GeoPoint>& points, StreetImageryClient& client,
                            const FetchOptions& options) {
    const auto sleep = options.sleep ? options.sleep : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
    fs::create_directories(options.out_dir);

    std::vector<Outcome> outcomes(points.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> quota{false};
    std::string quota_message;
    std::exception_ptr failure;
    std::mutex mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size() || quota.load()) {
                return;
            }
            try {
                outcomes[i] = fetch_with_retry(client, points[i], options.retry, sleep);
            } catch (const Error& e) {
                std::lock_guard lock(mutex);
                if (e.kind() == ErrorKind::QuotaExceeded) {
                    if (!quota.exchange(true)) {
                        quota_message = e.what();
                    }
                } else if (!failure) {
                    failure = std::current_exception();
                }
                quota = true;  // stop issuing requests either way
                return;
            }
        }
    };
    {
        const std::size_t workers = std::max<std::size_t>(1, std::min(options.in_flight, points.size()));
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    FetchResult result;
    result.report.requested = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& o = outcomes[i];
        if (o.failure) {
            result.report.failures.push_back({i, *o.failure});
            continue;
        }
        if (!o.pano) {
            // Points never reached after a quota stop are not counted as missing.
            if (o.visited) {
                ++result.report.missing;
            }
            continue;
        }
        ImageRecord rec;
        rec.id = "p" + std::to_string(i);
        const fs::path file = options.out_dir / (rec.id + ".jpg");
        write_file(file, o.pano->image);
        rec.uri = file.string();
        rec.geo = o.pano->location;
        rec.metadata["pano_id"] = o.pano->pano_id;
        rec.metadata["query_lat"] = coordinate(points[i].lat);
        rec.metadata["query_lon"] = coordinate(points[i].lon);
        result.records.push_back(std::move(rec));
    }
    write_manifest_csv(result.records, options.out_dir / "manifest.csv");
    if (quota.load()) {
        throw Error(ErrorKind::QuotaExceeded,
                    quota_message + " (" + std::to_string(result.records.size()) +
                        " records saved to " + (options.out_dir / "manifest.csv").string() + ")");
    }
    if (result.records.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no imagery found for any of " +
                                                std::to_string(points.size()) + " points");
    }
    return result;
}

namespace {

class HttpStreetClient final : public StreetImageryClient {
public:
    explicit HttpStreetClient(StreetClientConfig config) : config_(std::move(config)) {
        static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(config_.endpoint, m, kUrl)) {
            throw Error(ErrorKind::ConfigError, "bad street imagery endpoint '" + config_.endpoint + "'");
        }
        host_ = m[1].str();
        path_ = m[2].matched ? m[2].str() : "";
        if (const char* key = std::getenv(config_.api_key_env.c_str())) {
            key_ = key;
        }
    }

    std::optional<Panorama> fetch(const GeoPoint& point) override {
        httplib::Client client(host_);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);
        httplib::Params meta_params{{"location", coordinate(point.lat) + "," + coordinate(point.lon)}};
        if (!key_.empty()) {
            meta_params.emplace("key", key_);
        }
        auto meta = client.Get(path_ + "/metadata", meta_params, httplib::Headers{});
        check(meta);
        if (meta->status == 404) {
            return std::nullopt;
        }
        const auto j = nlohmann::json::parse(meta->body, nullptr, false);
        const std::string status = j.value("status", "");
        if (status == "OVER_QUERY_LIMIT") {
            throw Error(ErrorKind::QuotaExceeded, "street imagery quota exhausted");
        }
        if (status != "OK") {
            return std::nullopt;
        }
        Panorama pano;
        pano.pano_id = j.value("pano_id", "");
        pano.location = {j.at("location").value("lat", point.lat), j.at("location").value("lng", point.lon)};
        httplib::Params image_params{
            {"pano", pano.pano_id},
            {"size", std::to_string(config_.width) + "x" + std::to_string(config_.height)}};
        if (!key_.empty()) {
            image_params.emplace("key", key_);
        }
        auto img = client.Get(path_.empty() ? "/" : path_, image_params, httplib::Headers{});
        check(img);
        if (img->status != 200) {
            throw Error(ErrorKind::ClientError, "image request failed with HTTP " + std::to_string(img->status));
        }
        pano.image.assign(img->body.begin(), img->body.end());
        return pano;
    }

private:
    static void check(const httplib::Result& res) {
        if (!res) {
            throw Error(ErrorKind::ClientError, "transport error: " + httplib::to_string(res.error()));
        }
        if (res->status == 403 || res->status == 429) {
            throw Error(ErrorKind::QuotaExceeded, "street imagery quota exhausted (HTTP " +
                                                      std::to_string(res->status) + ")");
        }
        if (res->status >= 500) {
            throw Error(ErrorKind::ClientError, "HTTP " + std::to_string(res->status));
        }
    }

    StreetClientConfig config_;
    std::string host_;
    std::string path_;
    std::string key_;
};

}  // namespace

std::unique_ptr<StreetImageryClient> make_http_street_client(const StreetClientConfig& config) {
    return std::make_unique<HttpStreetClient>(config);
}

}  // namespace atlas
