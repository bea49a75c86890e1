#pragma once

#include "mtl/data.hpp"
#include "mtl/rng.hpp"
#include "mtl/tensor.hpp"

namespace mtl::toygen {

// Deterministic synthetic corpora for the test battery and shipped fixtures.
// Words carry a fixed (UPOS, semtag) pair, so token tagging for either task
// is learnable from word identity; both layers correlate through the shared
// lexicon.

// `count` sentences over the toy lexicon with UPOS + semtag layers.
std::vector<data::Sentence> correlated_corpus(int count, std::uint64_t seed);

// Flips the UPOS tag of roughly `rate` of the tokens (main-task label noise).
std::vector<data::Sentence> with_upos_noise(const std::vector<data::Sentence>& corpus, Real rate,
                                            std::uint64_t seed);

// Semtag-only view (tokens + semtags) of a corpus.
std::vector<data::Sentence> semtag_only(const std::vector<data::Sentence>& corpus);

// `count` sentences with heads/deprels/upos/semtags for parser runs.
std::vector<data::Sentence> parse_corpus(int count, std::uint64_t seed);

// The eight hand-made entailment pairs, semtagged from the lexicon.
std::vector<data::NliInstance> nli_pairs();

// Larger NLI corpus assembled from lexical templates.
std::vector<data::NliInstance> nli_corpus(int count, std::uint64_t seed);

// The coarse semantic tag inventory used by the toy lexicon.
std::vector<std::string> toy_tagset();

}  // namespace mtl::toygen
