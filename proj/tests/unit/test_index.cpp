#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "atlas/backend.hpp"
#include "atlas/embedding.hpp"
#include "atlas/errors.hpp"
#include "atlas/image.hpp"
#include "atlas/index.hpp"
#include "atlas/ingest.hpp"
#include "fixtures.hpp"

using namespace atlas;
using atlas::testing::make_store;
using atlas::testing::random_unit_matrix;
using atlas::testing::random_unit_vector;

namespace {

// Full argsort over float dot products, id tie-break.
std::vector<std::string> oracle(const std::vector<float>& m, std::size_t dim, std::span<const float> q,
                                std::size_t k) {
    const std::size_t n = m.size() / dim;
    std::vector<std::pair<float, std::string>> all;
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += static_cast<double>(m[i * dim + j]) * q[j];
        all.emplace_back(static_cast<float>(std::clamp(dot, -1.0, 1.0)), atlas::testing::row_id(i));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, n); ++i) ids.push_back(all[i].second);
    return ids;
}

std::vector<std::string> ids_of(const std::vector<SearchHit>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.image_id);
    return out;
}

}  // namespace

TEST_CASE("top_k worked example") {
    const float h = static_cast<float>(1.0 / std::sqrt(2.0));
    const auto store = make_store({1, 0, 0, 1, h, h}, 2, {}, {"A", "B", "C"});
    const auto q = normalize(std::vector<float>{1.0f, 0.0f});
    const auto hits = top_k(store, q, 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0] == SearchHit{"A", 1.0f, 1});
    CHECK(hits[1].image_id == "C");
    CHECK(hits[1].score == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(hits[1].rank == 2);
}

TEST_CASE("identical vectors tie-break on the smaller id") {
    const auto store = make_store({0, 1, 0, 1, 1, 0}, 2, {}, {"zeta", "alpha", "mid"});
    const auto q = normalize(std::vector<float>{0.0f, 1.0f});
    const auto hits = top_k(store, q, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].image_id == "alpha");
    CHECK(ids_of(top_k(store, q, 3)) == std::vector<std::string>{"alpha", "zeta", "mid"});
}

TEST_CASE("top_k agrees with a full-sort oracle") {
    constexpr std::size_t n = 1000, dim = 24;
    const auto m = random_unit_matrix(n, dim, 2024);
    const auto store = make_store(m, dim);
    for (std::uint64_t qi = 0; qi < 100; ++qi) {
        const auto qv = random_unit_vector(dim, 10'000 + qi);
        const auto q = normalize(qv);
        const std::size_t k = 1 + qi % 25;
        const auto hits = top_k(store, q, k);
        CHECK(ids_of(hits) == oracle(m, dim, q.values(), k));
        for (std::size_t r = 0; r < hits.size(); ++r) {
            CHECK(hits[r].rank == r + 1);
            if (r > 0) CHECK(hits[r - 1].score >= hits[r].score);
        }
    }
}

TEST_CASE("top_k edge cases") {
    const auto m = random_unit_matrix(5, 4, 9);
    const auto store = make_store(m, 4);
    const auto q = normalize(random_unit_vector(4, 1));
    CHECK(top_k(store, q, 50).size() == 5);
    CHECK_THROWS_AS(top_k(store, q, 0), Error);
    try {
        top_k(store, normalize(random_unit_vector(5, 1)), 3);
        FAIL("expected DimMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimMismatch);
    }
    const auto empty = make_store({}, 4);
    CHECK(top_k(empty, q, 3).empty());
}

TEST_CASE("search_text on a toy colour corpus") {
    atlas::testing::TempDir dir;
    const auto manifest = atlas::testing::write_solid_corpus(
        dir.path(), {{"g", "green", std::nullopt}, {"r", "red", std::nullopt}, {"b", "blue", std::nullopt}});
    ToyEncoder toy;
    const auto store = embed_corpus(scan_corpus(manifest), toy).store;
    const auto hits = search_text(store, Prompt::verbatim("red"), toy, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == SearchHit{"r", 1.0f, 1});

    const auto all = search_text(store, Prompt::verbatim("red"), toy, 10);
    CHECK(all.size() == 3);
    CHECK(search_text(store, Prompt::verbatim("red"), toy, 10) == all);
    // composition identity
    CHECK(search_text(store, Prompt{"blue"}, toy, 3) == top_k(store, toy.encode_text("a photo of blue"), 3));
}

TEST_CASE("hnsw recall@10 on 10,000 vectors") {
    constexpr std::size_t n = 10'000, dim = 32, queries = 100, k = 10;
    const auto m = random_unit_matrix(n, dim, 77);
    const auto store = make_store(m, dim);
    const HnswIndex index(store);
    double recall = 0.0;
    for (std::size_t qi = 0; qi < queries; ++qi) {
        const auto q = normalize(random_unit_vector(dim, 500 + qi));
        const auto exact = ids_of(top_k(store, q, k));
        const auto approx = index.search(q, k);
        REQUIRE(approx.size() == k);
        std::set<std::string> seen;
        for (const auto& h : approx) seen.insert(h.image_id);
        CHECK(seen.size() == k);
        std::size_t found = 0;
        for (const auto& id : exact) found += seen.count(id);
        recall += static_cast<double>(found) / k;
        for (std::size_t r = 1; r < approx.size(); ++r) CHECK(approx[r - 1].score >= approx[r].score);
    }
    recall /= queries;
    MESSAGE("mean recall@10 = " << recall);
    CHECK(recall >= 0.9);
}

TEST_CASE("hnsw self retrieval and defaults") {
    constexpr std::size_t n = 2000, dim = 16;
    const auto m = random_unit_matrix(n, dim, 5);
    const auto store = make_store(m, dim);
    const HnswIndex index(store);
    CHECK(index.params().max_degree == 16);
    CHECK(index.params().ef_construction == 200);
    CHECK(index.params().ef_search == 100);
    CHECK(index.params().seed == 42);
    for (std::size_t i = 0; i < n; i += 97) {
        const auto q = normalize(std::span<const float>(m.data() + i * dim, dim));
        const auto hits = index.search(q, 1);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].image_id == atlas::testing::row_id(i));
    }
    // small corpora return everything
    const auto tiny = make_store(random_unit_matrix(3, dim, 8), dim);
    const HnswIndex small(tiny);
    CHECK(small.search(normalize(random_unit_vector(dim, 4)), 10).size() == 3);
    CHECK_THROWS_AS(small.search(normalize(random_unit_vector(dim + 1, 4)), 1), Error);
}
