#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atlas/errors.hpp"
#include "atlas/store.hpp"

namespace atlas {

struct Panorama {
    std::string pano_id;
    GeoPoint location;  // where the imagery was actually taken
    std::vector<std::uint8_t> image;
};

// Source of street-level imagery around a coordinate.
//
// fetch returns nullopt when there is no imagery near the point. Transport
// problems throw ClientError (retried); exhausted quota throws QuotaExceeded.
// Implementations must be safe to call from several threads.
class StreetImageryClient {
public:
    virtual ~StreetImageryClient() = default;
    virtual std::optional<Panorama> fetch(const GeoPoint& point) = 0;
};

struct RetryPolicy {
    std::size_t attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

struct FetchOptions {
    std::filesystem::path out_dir;
    RetryPolicy retry;
    std::size_t in_flight = 4;
    // Injected for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct PointFailure {
    std::size_t index;  // lattice index
    std::string message;
};

struct FetchReport {
    std::size_t requested = 0;
    std::size_t missing = 0;
    std::vector<PointFailure> failures;
};

struct FetchResult {
    std::vector<ImageRecord> records;
    FetchReport report;
};

// Fetches one panorama per lattice point, writes images plus manifest.csv to
// out_dir and returns records in lattice order. Record ids are "p<index>",
// geo is the imagery location. Throws EmptyCorpus when nothing was fetched
// and QuotaExceeded (after writing the partial manifest) on quota exhaustion.
FetchResult fetch_panoramas(const std::vector<GeoPoint>& points, StreetImageryClient& client,
                            const FetchOptions& options);

void write_manifest_csv(const std::vector<ImageRecord>& records,
                        const std::filesystem::path& path);

struct StreetClientConfig {
    std::string endpoint;  // base URL, e.g. https://maps.example.com/streetview
    std::string api_key_env = "ATLAS_STREET_API_KEY";
    int width = 640;
    int height = 640;
};

// Street View Static style client: GET {endpoint}/metadata?location=lat,lon
// then GET {endpoint}?pano=ID&size=WxH. 403/429 mean quota exhaustion.
std::unique_ptr<StreetImageryClient> make_http_street_client(const StreetClientConfig& config);

}  // namespace atlas
