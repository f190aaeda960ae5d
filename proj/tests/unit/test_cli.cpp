#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "atlas/backend.hpp"
#include "atlas/cli.hpp"
#include "atlas/image.hpp"
#include "atlas/service.hpp"
#include "fixtures.hpp"

using namespace atlas;
using atlas::testing::read_text;
using atlas::testing::TempDir;
using atlas::testing::write_text;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

// RGB toy corpus on a small geo patch; returns the manifest path.
std::filesystem::path rgb_corpus(const TempDir& dir, std::size_t n = 30) {
    static const char* colours[] = {"red", "green", "blue"};
    std::vector<atlas::testing::SolidImage> images;
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back({"img" + std::to_string(i), colours[i % 3],
                          GeoPoint{48.8 + 0.01 * static_cast<double>(i % 10), 2.2 + 0.01 * static_cast<double>(i / 3)}});
    }
    return atlas::testing::write_solid_corpus(dir.path(), images);
}

}  // namespace

TEST_CASE("ingest then search ranks the red image first") {
    TempDir dir;
    const auto manifest = rgb_corpus(dir);
    const auto store = (dir / "corpus.catl").string();
    const auto ing = cli({"ingest", "--manifest", manifest.string(), "--backend", "toy", "--out", store});
    REQUIRE(ing.code == 0);
    const auto summary = json::parse(ing.out);
    CHECK(summary["count"] == 30);
    CHECK(summary["dropped"].empty());

    const auto s = cli({"search", "--store", store, "--prompt", "red", "-k", "5"});
    REQUIRE(s.code == 0);
    const auto hits = json::parse(s.out)["hits"];
    REQUIRE(hits.size() == 5);
    CHECK(hits[0]["id"] == "img0");
    for (const auto& h : hits) CHECK(h["score"] == 1.0);

    // embed is an alias and the global flags may come first
    CHECK(cli({"--seed", "3", "embed", "--dir", (dir / "img").string(), "--out", (dir / "dir.catl").string(),
               "--workers", "4", "--batch-size", "7"})
              .code == 0);
}

TEST_CASE("scatter export writes the csv schema") {
    TempDir dir;
    const auto store = (dir / "corpus.catl").string();
    REQUIRE(cli({"ingest", "--manifest", rgb_corpus(dir).string(), "--out", store}).code == 0);
    const auto pts = (dir / "pts.csv").string();
    const auto r = cli({"scatter", "--store", store, "--x", "naked", "--y", "nude", "--out", pts});
    REQUIRE(r.code == 0);
    const auto text = read_text(pts);
    CHECK(text.rfind("id,x,y,residual\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 31);
    const auto meta = json::parse(read_text(pts + ".meta.json"));
    CHECK(meta["x"]["prompt"] == "naked");
    CHECK(meta["backend"] == "toy");

    const auto jl = (dir / "pts.jsonl").string();
    REQUIRE(cli({"scatter", "--store", store, "--x", "red", "--y", "blue", "--norm", "rank", "--sample", "10",
                 "--seed", "9", "--out", jl})
                .code == 0);
    const auto jtext = read_text(jl);
    CHECK(std::count(jtext.begin(), jtext.end(), '\n') == 10);
    CHECK(json::parse(read_text(jl + ".meta.json"))["seed"] == 9);
}

TEST_CASE("map output conserves counts inside the bbox") {
    TempDir dir;
    const auto store = (dir / "geo.catl").string();
    REQUIRE(cli({"ingest", "--manifest", rgb_corpus(dir).string(), "--out", store}).code == 0);
    const auto heat = (dir / "heat.geojson").string();
    const auto matrix = (dir / "heat.json").string();
    // bbox excludes the last lat row (48.89) on purpose
    const auto r = cli({"map", "--store", store, "--prompt", "Paris", "--bbox", "48.795,2.19,48.885,2.30",
                        "--rows", "64", "--cols", "64", "--out", heat, "--matrix", matrix});
    REQUIRE(r.code == 0);
    const auto fc = json::parse(read_text(heat));
    std::size_t total = 0;
    for (const auto& f : fc["features"]) total += f["properties"]["count"].get<std::size_t>();
    CHECK(total == 27);
    CHECK(fc["meta"]["count"] == 27);
    const auto m = json::parse(read_text(matrix));
    std::size_t mtotal = 0;
    for (const auto& row : m["count"])
        for (const auto& c : row) mtotal += c.get<std::size_t>();
    CHECK(mtotal == 27);

    const auto contrast = cli({"map", "--store", store, "--prompt", "red", "--contrast", "blue", "--rows", "4",
                               "--cols", "4", "--min-count", "1"});
    REQUIRE(contrast.code == 0);
    CHECK(json::parse(contrast.out)["meta"]["b"] == "blue");
}

TEST_CASE("extremes subcommand") {
    TempDir dir;
    const auto store = (dir / "c.catl").string();
    REQUIRE(cli({"ingest", "--manifest", rgb_corpus(dir, 9).string(), "--out", store}).code == 0);
    const auto top = json::parse(cli({"extremes", "--store", store, "--prompt", "green", "-n", "2"}).out);
    CHECK(top["top"][0]["id"] == "img1");
    CHECK(top["top"][1]["id"] == "img4");
    const auto res = json::parse(cli({"extremes", "--store", store, "--x", "red", "--y", "blue", "-n", "1"}).out);
    CHECK(res["above"][0]["id"] == "img2");
    CHECK(res["below"][0]["id"] == "img0");
}

TEST_CASE("usage and engine errors") {
    const auto unknown = cli({"search", "--bogus"});
    CHECK(unknown.code == 2);
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"search", "--store", "x"}).code == 2);
    CHECK(cli({"--help"}).code == 0);

    TempDir dir;
    const auto missing = cli({"search", "--store", (dir / "none.catl").string(), "--prompt", "red"});
    CHECK(missing.code == 1);
    CHECK(missing.err.rfind("error: IoError: ", 0) == 0);

    write_text(dir / "bad.catl", "CATL garbage");
    const auto corrupt = cli({"search", "--store", (dir / "bad.catl").string(), "--prompt", "red"});
    CHECK(corrupt.code == 1);
    CHECK(corrupt.err.rfind("error: CorruptStore: ", 0) == 0);

    write_text(dir / "m.csv", "id,uri,lat,lon\na,a.png,91,0\n");
    const auto manifest = cli({"ingest", "--manifest", (dir / "m.csv").string(), "--out", (dir / "o.catl").string()});
    CHECK(manifest.code == 1);
    CHECK(manifest.err.rfind("error: ManifestError: line 2", 0) == 0);
}

TEST_CASE("config file and environment") {
    TempDir dir;
    const auto store = (dir / "c.catl").string();
    REQUIRE(cli({"ingest", "--manifest", rgb_corpus(dir).string(), "--out", store}).code == 0);
    write_text(dir / "atlas.toml", "template = \"{}\"\nbackend = \"toy\"\n[map]\nrows = 3\ncols = 2\nmin_count = 1\n");
    const auto cfg = (dir / "atlas.toml").string();
    const auto s = json::parse(cli({"--config", cfg, "search", "--store", store, "--prompt", "red"}).out);
    CHECK(s["rendered"] == "red");
    const auto m = json::parse(cli({"--config", cfg, "map", "--store", store, "--prompt", "red"}).out);
    CHECK(m["meta"]["rows"] == 3);
    CHECK(m["meta"]["cols"] == 2);
    ::setenv("ATLAS_MAP_ROWS", "5", 1);
    const auto e = json::parse(cli({"--config", cfg, "map", "--store", store, "--prompt", "red"}).out);
    CHECK(e["meta"]["rows"] == 5);
    const auto flag = json::parse(cli({"--config", cfg, "map", "--store", store, "--prompt", "red", "--rows", "7"}).out);
    CHECK(flag["meta"]["rows"] == 7);
    ::unsetenv("ATLAS_MAP_ROWS");
    ::setenv("ATLAS_BACKEND", "nonsense", 1);
    const auto bad = cli({"search", "--store", store, "--prompt", "red"});
    CHECK(bad.code == 1);
    CHECK(bad.err.rfind("error: ConfigError", 0) == 0);
    ::unsetenv("ATLAS_BACKEND");
}

TEST_CASE("CLI and HTTP payloads are byte-identical") {
    TempDir dir;
    const auto store = (dir / "c.catl").string();
    REQUIRE(cli({"ingest", "--manifest", rgb_corpus(dir).string(), "--out", store}).code == 0);
    ToyEncoder toy;
    Service svc(toy);
    svc.corpora().add("c", store);
    auto http = [&](std::string path, std::multimap<std::string, std::string> params) {
        const auto res = svc.handle({"GET", std::move(path), std::move(params), {}});
        REQUIRE(res.status == 200);
        return res.body;
    };
    CHECK(cli({"search", "--store", store, "--prompt", "red", "-k", "4"}).out ==
          http("/corpora/c/search", {{"q", "red"}, {"k", "4"}}));
    CHECK(cli({"search", "--store", store, "--prompt", "Las Meninas", "--template", "{}"}).out ==
          http("/corpora/c/search", {{"q", "Las Meninas"}, {"template", "{}"}}));
    CHECK(cli({"scatter", "--store", store, "--x", "red", "--y", "blue", "--norm", "zscore", "--sample", "12",
               "--seed", "5"})
              .out == http("/corpora/c/scatter", {{"x", "red"}, {"y", "blue"}, {"norm", "zscore"}, {"sample", "12"}, {"seed", "5"}}));
    CHECK(cli({"map", "--store", store, "--prompt", "green", "--rows", "8", "--cols", "8", "--stat", "max"}).out ==
          http("/corpora/c/map", {{"prompt", "green"}, {"rows", "8"}, {"cols", "8"}, {"stat", "max"}}));
    CHECK(cli({"map", "--store", store, "--prompt", "red", "--contrast", "green", "--rows", "4", "--cols", "4",
               "--bbox", "48.8,2.2,48.9,2.3"})
              .out == http("/corpora/c/contrast", {{"a", "red"}, {"b", "green"}, {"rows", "4"}, {"cols", "4"},
                                                    {"bbox", "48.8,2.2,48.9,2.3"}}));
    CHECK(cli({"extremes", "--store", store, "--prompt", "blue", "-n", "3"}).out ==
          http("/corpora/c/extremes", {{"prompt", "blue"}, {"n", "3"}}));
}
