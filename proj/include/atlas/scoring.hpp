#pragma once

#include <span>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/embedding.hpp"
#include "atlas/store.hpp"

namespace atlas {

// Cosine of every store row against a unit query, in store order. The one
// place row scores are computed; search, maps and scatters all go through it.
std::vector<float> score_rows(const EmbeddingStore& store, const EmbeddingVector& query);

// Encodes the rendered prompt and scores every image against it.
// Throws EmptyCorpus, DimMismatch or BackendError.
std::vector<ConceptScore> score_corpus(const EmbeddingStore& store, const Prompt& prompt,
                                       EncoderBackend& backend);

// Bare score values of score_corpus, same order.
std::vector<float> score_values(const EmbeddingStore& store, const Prompt& prompt,
                                EncoderBackend& backend);

// Probability over prompts: softmax(logit_scale * cosine(image, prompt_i)).
// Throws InsufficientClasses for < 2 prompts and BadArgument for scale <= 0.
std::vector<double> zero_shot_classify(const EmbeddingVector& image,
                                       std::span<const Prompt> prompts,
                                       EncoderBackend& backend,
                                       double logit_scale = kDefaultLogitScale);

}  // namespace atlas
