#include <doctest.h>

#include <cstdlib>

#include "atlas/config.hpp"
#include "atlas/errors.hpp"
#include "fixtures.hpp"

using namespace atlas;

TEST_CASE("toml-style parsing") {
    const auto cfg = Config::parse(
        "# top comment\n"
        "backend = \"toy\"\n"
        "seed = 42   # trailing comment\n"
        "template = \"a # not a comment {}\"\n"
        "\n"
        "[map]\n"
        "rows = 32\n"
        "stat = 'max'\n"
        "[corpora]\n"
        "paris = /data/paris.catl\n");
    CHECK(cfg.get_string("backend", "") == "toy");
    CHECK(cfg.get_int("seed", 0) == 42);
    CHECK(cfg.get_string("template", "") == "a # not a comment {}");
    CHECK(cfg.get_int("map.rows", 64) == 32);
    CHECK(cfg.get_string("map.stat", "") == "max");
    CHECK(cfg.get_int("map.cols", 64) == 64);
    CHECK(cfg.section("corpora.") == std::map<std::string, std::string>{{"paris", "/data/paris.catl"}});
    CHECK(!cfg.has("rows"));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(Config::parse("just words\n"), Error);
    CHECK_THROWS_AS(Config::parse("[unterminated\n"), Error);
    CHECK_THROWS_AS(Config::parse("x = \"open\n"), Error);
    const auto cfg = Config::parse("rows = many\nscale = 1.5\n");
    CHECK_THROWS_AS(cfg.get_int("rows", 1), Error);
    CHECK(cfg.get_double("scale", 0.0) == 1.5);
    CHECK_THROWS_AS(Config::load("/no/such/config.toml"), Error);
}

TEST_CASE("environment overrides") {
    CHECK(Config::env_name("map.min_count") == "ATLAS_MAP_MIN_COUNT");
    CHECK(Config::env_name("street.api-key-env") == "ATLAS_STREET_API_KEY_ENV");
    auto cfg = Config::parse("backend = toy\n[map]\nrows = 10\n");
    ::setenv("ATLAS_MAP_ROWS", "99", 1);
    ::setenv("ATLAS_PORT", "9000", 1);
    cfg.apply_env({"port"});
    CHECK(cfg.get_int("map.rows", 0) == 99);
    CHECK(cfg.get_int("port", 0) == 9000);
    CHECK(cfg.get_string("backend", "") == "toy");
    ::unsetenv("ATLAS_MAP_ROWS");
    ::unsetenv("ATLAS_PORT");
}
