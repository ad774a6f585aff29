#pragma once

#include <span>
#include <vector>

#include "narex/common.hpp"

namespace narex {

struct EvalPair {
    std::vector<int> hypothesis;
    std::vector<int> reference;
};

struct OverlapScore {
    real_t precision = 0.0;
    real_t recall = 0.0;
    real_t f1 = 0.0;
};

// Clipped n-gram overlap between one hypothesis and one reference.
OverlapScore rouge_n(std::span<const int> hyp, std::span<const int> ref, int n);

// Longest-common-subsequence overlap; precision over |hyp|, recall over |ref|.
OverlapScore rouge_l(std::span<const int> hyp, std::span<const int> ref);

// Geometric mean of clipped modified precisions for orders 1..n with a
// brevity penalty exp(1 - |ref|/|hyp|) when the hypothesis is shorter. A zero
// precision is floored at 1/(2|hyp|).
real_t bleu_n(std::span<const int> hyp, std::span<const int> ref, int n);

// Corpus-level variant: n-gram counts and lengths are pooled over all pairs
// before the geometric mean.
real_t bleu_corpus(std::span<const EvalPair> pairs, int n);

// Exact-match unigram alignment (greedy leftmost), recall-weighted harmonic
// mean F = PR / (0.1 P + 0.9 R), fragmentation penalty 0.5 (chunks/matches)^3.
// No stemming or synonym stages; scores are not comparable to official
// toolkits.
real_t meteor_simplified(std::span<const int> hyp, std::span<const int> ref);

// Unique n-grams across the whole hypothesis corpus over total n-grams.
real_t distinct_n(std::span<const std::vector<int>> hyps, int n);

}  // namespace narex
