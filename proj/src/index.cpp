#include "atlas/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "atlas/errors.hpp"
#include "atlas/scoring.hpp"

namespace atlas {

namespace {

void check_query(const EmbeddingStore& store, const EmbeddingVector& query) {
    if (query.dimensionality() != store.dimensionality()) {
        throw Error(ErrorKind::DimMismatch,
                    "query dimensionality " + std::to_string(query.dimensionality()) +
                        " vs store " + std::to_string(store.dimensionality()));
    }
}

// Total order: score descending, then id ascending.
struct HitOrder {
    const EmbeddingStore& store;
    std::span<const float> scores;
    bool operator()(std::size_t a, std::size_t b) const {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return store.record(a).id < store.record(b).id;
    }
};

}  // namespace

std::vector<SearchHit> top_k(const EmbeddingStore& store, const EmbeddingVector& query,
                             std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::BadArgument, "k must be at least 1");
    }
    check_query(store, query);
    const auto scores = score_rows(store, query);
    std::vector<std::size_t> order(store.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      HitOrder{store, scores});
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        hits.push_back({store.record(order[r]).id, scores[order[r]], r + 1});
    }
    return hits;
}

std::vector<SearchHit> search_text(const EmbeddingStore& store, const Prompt& prompt,
                                   EncoderBackend& backend, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::BadArgument, "k must be at least 1");
    }
    return top_k(store, backend.encode_text(prompt.rendered()), k);
}

// --- HNSW --------------------------------------------------------------------

HnswIndex::HnswIndex(const EmbeddingStore& store, AnnParams params)
    : store_(&store), params_(params) {
    if (store.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "cannot index an empty store");
    }
    if (params_.max_degree < 2 || params_.ef_construction == 0 || params_.ef_search == 0) {
        throw Error(ErrorKind::BadArgument, "max_degree >= 2 and positive ef values required");
    }
    std::mt19937_64 rng(params_.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double level_mult = 1.0 / std::log(static_cast<double>(params_.max_degree));
    links_.resize(store.size());
    for (std::uint32_t node = 0; node < store.size(); ++node) {
        const double u = std::max(unit(rng), 1e-12);
        const int level = static_cast<int>(std::floor(-std::log(u) * level_mult));
        insert(node, level);
    }
}

float HnswIndex::similarity(std::span<const float> query, std::uint32_t node) const {
    return static_cast<float>(cosine_similarity(query, store_->row(node)));
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const float> query,
                                                          std::uint32_t entry, std::size_t ef,
                                                          int level) const {
    std::vector<char> visited(store_->size(), 0);
    // Frontier: best first. Results: worst on top, capped at ef.
    std::priority_queue<Candidate> frontier;
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> results;
    const float s = similarity(query, entry);
    frontier.emplace(s, entry);
    results.emplace(s, entry);
    visited[entry] = 1;
    while (!frontier.empty()) {
        const auto [score, node] = frontier.top();
        if (results.size() >= ef && score < results.top().first) {
            break;
        }
        frontier.pop();
        for (std::uint32_t nb : links_[node][static_cast<std::size_t>(level)]) {
            if (visited[nb]) {
                continue;
            }
            visited[nb] = 1;
            const float ns = similarity(query, nb);
            if (results.size() < ef || ns > results.top().first) {
                frontier.emplace(ns, nb);
                results.emplace(ns, nb);
                if (results.size() > ef) {
                    results.pop();
                }
            }
        }
    }
    std::vector<Candidate> out;
    out.reserve(results.size());
    while (!results.empty()) {
        out.push_back(results.top());
        results.pop();
    }
    std::reverse(out.begin(), out.end());  // best first
    return out;
}

// Diversity heuristic: keep a candidate only if it is closer to the base than
// to every neighbour already kept; top up with the pruned ones.
std::vector<std::uint32_t> HnswIndex::select_neighbours(std::vector<Candidate> candidates,
                                                        std::size_t limit) const {
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> pruned;
    for (const auto& [score, node] : candidates) {
        if (kept.size() >= limit) {
            break;
        }
        bool diverse = true;
        for (std::uint32_t k : kept) {
            if (similarity(store_->row(node), k) > score) {
                diverse = false;
                break;
            }
        }
        (diverse ? kept : pruned).push_back(node);
    }
    for (std::size_t i = 0; i < pruned.size() && kept.size() < limit; ++i) {
        kept.push_back(pruned[i]);
    }
    return kept;
}

void HnswIndex::insert(std::uint32_t node, int level) {
    links_[node].resize(static_cast<std::size_t>(level) + 1);
    if (max_level_ < 0) {
        entry_ = node;
        max_level_ = level;
        return;
    }
    const auto query = store_->row(node);
    std::uint32_t cur = entry_;
    for (int l = max_level_; l > level; --l) {
        cur = search_layer(query, cur, 1, l).front().second;
    }
    for (int l = std::min(level, max_level_); l >= 0; --l) {
        const auto candidates = search_layer(query, cur, params_.ef_construction, l);
        const std::size_t cap = l == 0 ? 2 * params_.max_degree : params_.max_degree;
        auto& mine = links_[node][static_cast<std::size_t>(l)];
        mine = select_neighbours(candidates, params_.max_degree);
        for (std::uint32_t nb : mine) {
            auto& theirs = links_[nb][static_cast<std::size_t>(l)];
            theirs.push_back(node);
            if (theirs.size() > cap) {
                std::vector<Candidate> pool;
                pool.reserve(theirs.size());
                for (std::uint32_t t : theirs) {
                    pool.emplace_back(similarity(store_->row(nb), t), t);
                }
                theirs = select_neighbours(std::move(pool), cap);
            }
        }
        cur = candidates.front().second;
    }
    if (level > max_level_) {
        entry_ = node;
        max_level_ = level;
    }
}

std::vector<SearchHit> HnswIndex::search(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) {
        throw Error(ErrorKind::BadArgument, "k must be at least 1");
    }
    check_query(*store_, query);
    std::uint32_t cur = entry_;
    for (int l = max_level_; l > 0; --l) {
        cur = search_layer(query.values(), cur, 1, l).front().second;
    }
    const auto found = search_layer(query.values(), cur, std::max(params_.ef_search, k), 0);
    std::vector<std::size_t> ids;
    std::vector<float> scores(store_->size(), 0.0f);
    for (const auto& [score, node] : found) {
        ids.push_back(node);
        scores[node] = score;
    }
    const std::size_t take = std::min(k, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                      HitOrder{*store_, scores});
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        hits.push_back({store_->record(ids[r]).id, scores[ids[r]], r + 1});
    }
    return hits;
}

}  // namespace atlas
