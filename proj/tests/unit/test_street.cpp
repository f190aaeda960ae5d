#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "atlas/concept_map.hpp"
#include "atlas/errors.hpp"
#include "atlas/image.hpp"
#include "atlas/ingest.hpp"
#include "atlas/street.hpp"
#include "fixtures.hpp"

using namespace atlas;
using atlas::testing::TempDir;
using std::chrono::milliseconds;

namespace {

// Scripted client: per lattice point a list of behaviours consumed one call
// at a time ('e' transport error, 'n' no imagery, 'q' quota, 'i' image).
class ScriptedClient final : public StreetImageryClient {
public:
    explicit ScriptedClient(std::map<std::pair<double, double>, std::string> script, char fallback = 'i')
        : script_(std::move(script)), fallback_(fallback) {}

    std::optional<Panorama> fetch(const GeoPoint& p) override {
        char action;
        {
            std::lock_guard lock(mutex_);
            ++calls_;
            auto& steps = script_[{p.lat, p.lon}];
            if (steps.empty()) {
                action = fallback_;
            } else {
                action = steps.front();
                steps.erase(steps.begin());
            }
        }
        switch (action) {
            case 'e': throw Error(ErrorKind::ClientError, "connection reset");
            case 'n': return std::nullopt;
            case 'q': throw Error(ErrorKind::QuotaExceeded, "daily limit");
            default: break;
        }
        Panorama pano;
        pano.pano_id = "pano-" + std::to_string(p.lat) + "-" + std::to_string(p.lon);
        pano.location = {p.lat + 0.0001, p.lon - 0.0002};
        pano.image = encode_solid_png(0, 0, 255);
        return pano;
    }

    std::size_t calls() const { return calls_; }

private:
    std::mutex mutex_;
    std::map<std::pair<double, double>, std::string> script_;
    char fallback_;
    std::size_t calls_ = 0;
};

FetchOptions options_for(const TempDir& dir, std::vector<milliseconds>* sleeps = nullptr) {
    FetchOptions o;
    o.out_dir = dir / "pano";
    static std::mutex m;
    o.sleep = [sleeps](milliseconds d) {
        if (sleeps) {
            std::lock_guard lock(m);
            sleeps->push_back(d);
        }
    };
    return o;
}

}  // namespace

TEST_CASE("stub client over nine points with two gaps") {
    TempDir dir;
    const auto points = sample_points({0, 1, 0, 1}, 0.5);
    REQUIRE(points.size() == 9);
    ScriptedClient client({{{0.0, 0.5}, "n"}, {{1.0, 1.0}, "n"}});
    const auto result = fetch_panoramas(points, client, options_for(dir));
    CHECK(result.records.size() == 7);
    CHECK(result.report.requested == 9);
    CHECK(result.report.missing == 2);
    CHECK(result.report.failures.empty());
    // lattice order, ids by lattice index, geo = imagery location
    CHECK(result.records[0].id == "p0");
    CHECK(result.records[1].id == "p2");
    CHECK(result.records.back().id == "p7");
    CHECK(result.records[0].geo == GeoPoint{0.0001, -0.0002});
    CHECK(result.records[0].metadata.at("query_lat") == "0");

    // the written manifest scans back to the same records
    const auto scanned = scan_corpus(dir / "pano/manifest.csv");
    REQUIRE(scanned.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(scanned[i].id == result.records[i].id);
        CHECK(scanned[i].geo == result.records[i].geo);
        CHECK(scanned[i].metadata.at("pano_id") == result.records[i].metadata.at("pano_id"));
    }
}

TEST_CASE("all points failing is an empty corpus") {
    TempDir dir;
    const auto points = sample_points({0, 1, 0, 1}, 1.0);
    ScriptedClient none({}, 'n');
    CHECK_THROWS_AS(fetch_panoramas(points, none, options_for(dir)), Error);
    ScriptedClient broken({}, 'e');
    try {
        fetch_panoramas(points, broken, options_for(dir));
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyCorpus);
    }
}

TEST_CASE("retry schedule defaults to three attempts with doubling backoff from one second") {
    const RetryPolicy defaults;
    CHECK(defaults.attempts == 3);
    CHECK(defaults.initial_backoff == milliseconds(1000));
    CHECK(defaults.multiplier == 2.0);

    TempDir dir;
    std::vector<milliseconds> sleeps;
    auto opts = options_for(dir, &sleeps);
    opts.in_flight = 1;
    const std::vector<GeoPoint> points{{0, 0}, {1, 1}};
    SUBCASE("transient errors recover") {
        ScriptedClient client({{{0.0, 0.0}, "ee"}});
        const auto result = fetch_panoramas(points, client, opts);
        CHECK(result.records.size() == 2);
        CHECK(result.report.failures.empty());
        CHECK(sleeps == std::vector<milliseconds>{milliseconds(1000), milliseconds(2000)});
        CHECK(client.calls() == 4);
    }
    SUBCASE("exhausted retries fail the point and the run continues") {
        ScriptedClient client({{{0.0, 0.0}, "eeee"}});
        const auto result = fetch_panoramas(points, client, opts);
        CHECK(result.records.size() == 1);
        CHECK(result.records[0].id == "p1");
        REQUIRE(result.report.failures.size() == 1);
        CHECK(result.report.failures[0].index == 0);
        CHECK(result.report.failures[0].message.find("connection reset") != std::string::npos);
        CHECK(sleeps.size() == 2);
        CHECK(client.calls() == 4);
    }
}

TEST_CASE("quota exhaustion aborts but keeps partial results") {
    TempDir dir;
    auto opts = options_for(dir);
    opts.in_flight = 1;
    const auto points = sample_points({0, 1, 0, 1}, 0.5);
    ScriptedClient client({{{0.5, 0.5}, "q"}});
    try {
        fetch_panoramas(points, client, opts);
        FAIL("expected QuotaExceeded");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::QuotaExceeded);
    }
    const auto saved = scan_corpus(dir / "pano/manifest.csv");
    CHECK(saved.size() == 4);
    CHECK(saved.back().id == "p3");
}

TEST_CASE("parallel fetch output is ordered by lattice index") {
    TempDir dir;
    const auto points = sample_points({0, 2, 0, 2}, 0.25);
    ScriptedClient client({{{0.25, 0.5}, "n"}});
    auto opts = options_for(dir);
    opts.in_flight = 8;
    const auto result = fetch_panoramas(points, client, opts);
    CHECK(result.records.size() == points.size() - 1);
    for (std::size_t i = 1; i < result.records.size(); ++i) {
        CHECK(std::stoul(result.records[i - 1].id.substr(1)) < std::stoul(result.records[i].id.substr(1)));
    }
}

TEST_CASE("http street client against a local stub service") {
    httplib::Server server;
    std::atomic<int> image_calls{0};
    std::string seen_key;
    std::mutex key_mutex;
    server.Get("/sv/metadata", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(key_mutex);
            seen_key = req.get_param_value("key");
        }
        const auto loc = req.get_param_value("location");
        if (loc == "0,0") {
            res.set_content(R"({"status":"ZERO_RESULTS"})", "application/json");
        } else if (loc == "1,1") {
            res.set_content(R"({"status":"OVER_QUERY_LIMIT"})", "application/json");
        } else if (loc == "2,2") {
            res.status = 503;
        } else if (loc == "3,3") {
            res.status = 429;
        } else {
            res.set_content(R"({"status":"OK","pano_id":"abc","location":{"lat":48.85,"lng":2.29}})",
                            "application/json");
        }
    });
    server.Get("/sv", [&](const httplib::Request& req, httplib::Response& res) {
        ++image_calls;
        CHECK(req.get_param_value("pano") == "abc");
        CHECK(req.get_param_value("size") == "320x240");
        const auto png = encode_solid_png(10, 200, 10);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("ATLAS_TEST_STREET_KEY", "secret", 1);
    StreetClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/sv";
    cfg.api_key_env = "ATLAS_TEST_STREET_KEY";
    cfg.width = 320;
    cfg.height = 240;
    auto client = make_http_street_client(cfg);

    const auto pano = client->fetch({48.8566, 2.3522});
    REQUIRE(pano);
    CHECK(pano->pano_id == "abc");
    CHECK(pano->location == GeoPoint{48.85, 2.29});
    CHECK(pano->image == encode_solid_png(10, 200, 10));
    CHECK(image_calls == 1);
    {
        std::lock_guard lock(key_mutex);
        CHECK(seen_key == "secret");
    }
    CHECK(!client->fetch({0, 0}));
    auto kind = [&](GeoPoint p) {
        try {
            client->fetch(p);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    CHECK(kind({1, 1}) == ErrorKind::QuotaExceeded);
    CHECK(kind({2, 2}) == ErrorKind::ClientError);
    CHECK(kind({3, 3}) == ErrorKind::QuotaExceeded);

    server.stop();
    th.join();
    CHECK(kind({4, 4}) == ErrorKind::ClientError);

    StreetClientConfig bad;
    bad.endpoint = "not a url";
    CHECK_THROWS_AS(make_http_street_client(bad), Error);
}
