#include "atlas/scoring.hpp"

#include "atlas/errors.hpp"

namespace atlas {

std::vector<float> score_rows(const EmbeddingStore& store, const EmbeddingVector& query) {
    if (query.dimensionality() != store.dimensionality()) {
        throw Error(ErrorKind::DimMismatch,
                    "query dimensionality " + std::to_string(query.dimensionality()) +
                        " vs store " + std::to_string(store.dimensionality()));
    }
    std::vector<float> out(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        out[i] = static_cast<float>(cosine_similarity(store.row(i), query.values()));
    }
    return out;
}

std::vector<float> score_values(const EmbeddingStore& store, const Prompt& prompt,
                                EncoderBackend& backend) {
    if (store.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "store has no images");
    }
    if (backend.dimensionality() != store.dimensionality()) {
        throw Error(ErrorKind::DimMismatch,
                    "backend '" + backend.name() + "' has dimensionality " +
                        std::to_string(backend.dimensionality()) + ", store has " +
                        std::to_string(store.dimensionality()));
    }
    return score_rows(store, backend.encode_text(prompt.rendered()));
}

std::vector<ConceptScore> score_corpus(const EmbeddingStore& store, const Prompt& prompt,
                                       EncoderBackend& backend) {
    const auto values = score_values(store, prompt, backend);
    std::vector<ConceptScore> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.push_back({store.record(i).id, values[i]});
    }
    return out;
}

std::vector<double> zero_shot_classify(const EmbeddingVector& image,
                                       std::span<const Prompt> prompts,
                                       EncoderBackend& backend, double logit_scale) {
    if (prompts.size() < 2) {
        throw Error(ErrorKind::InsufficientClasses,
                    "zero-shot classification needs at least 2 prompts, got " +
                        std::to_string(prompts.size()));
    }
    if (!(logit_scale > 0.0)) {
        throw Error(ErrorKind::BadArgument, "logit_scale must be positive");
    }
    std::vector<double> sims;
    sims.reserve(prompts.size());
    for (const auto& p : prompts) {
        sims.push_back(cosine_similarity(image, backend.encode_text(p.rendered())));
    }
    return softmax_scaled(sims, logit_scale);
}

}  // namespace atlas
