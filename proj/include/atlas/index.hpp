#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/embedding.hpp"
#include "atlas/store.hpp"

namespace atlas {

struct SearchHit {
    std::string image_id;
    float score = 0.0f;
    std::size_t rank = 0;  // 1-based

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

// Exact search: full scan through score_rows, partial selection, ties broken
// by ascending id. Returns min(k, size) hits. Throws DimMismatch, BadArgument.
std::vector<SearchHit> top_k(const EmbeddingStore& store, const EmbeddingVector& query,
                             std::size_t k);

// encode_text(prompt.rendered()) followed by top_k.
std::vector<SearchHit> search_text(const EmbeddingStore& store, const Prompt& prompt,
                                   EncoderBackend& backend, std::size_t k);

struct AnnParams {
    std::size_t max_degree = 16;        // M; layer 0 keeps 2*M links
    std::size_t ef_construction = 200;
    std::size_t ef_search = 100;
    std::uint64_t seed = 42;
};

// Hierarchical navigable small world graph over a store, inner-product metric.
// Holds a reference to the store, which must outlive the index. Immutable
// after construction.
class HnswIndex {
public:
    HnswIndex(const EmbeddingStore& store, AnnParams params = {});

    // Approximate top-k; scores are exact cosines of the returned rows, no
    // duplicate ids, same ordering rule as top_k.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const;

    const AnnParams& params() const noexcept { return params_; }
    int max_level() const noexcept { return max_level_; }

private:
    using Candidate = std::pair<float, std::uint32_t>;

    float similarity(std::span<const float> query, std::uint32_t node) const;
    std::vector<Candidate> search_layer(std::span<const float> query, std::uint32_t entry,
                                        std::size_t ef, int level) const;
    std::vector<std::uint32_t> select_neighbours(std::vector<Candidate> candidates,
                                                 std::size_t limit) const;
    void insert(std::uint32_t node, int level);

    const EmbeddingStore* store_;
    AnnParams params_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node -> level -> ids
    std::uint32_t entry_ = 0;
    int max_level_ = -1;
};

}  // namespace atlas
