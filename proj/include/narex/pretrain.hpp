#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "narex/adam.hpp"
#include "narex/model.hpp"
#include "narex/rng.hpp"
#include "narex/vocab.hpp"

namespace narex {

struct CorruptionConfig {
    real_t span_fraction = 0.15;
    real_t poisson_lambda = 3.0;
    bool shuffle_sentences = true;

    void validate() const;
};

// src is the corrupted document, tgt the original with a trailing EOS.
struct TrainingExample {
    std::vector<int> src_ids;
    std::vector<int> tgt_ids;
    int T = 0;  // == tgt_ids.size()
};

// Draws per-token exit layers, i.i.d. uniform over {1..L}.
class PermutationSampler {
  public:
    PermutationSampler(int k, int L, std::uint64_t seed)
        : k_(k), L_(L), rng_(seed) {
        NAREX_CHECK(k >= 1, "permutation sampler needs k >= 1, got ", k);
        NAREX_CHECK(L >= 1, "permutation sampler needs L >= 1, got ", L);
    }
    int k() const { return k_; }
    int layer_count() const { return L_; }
    ExitAssignment sample(int T) { return sample_exit_assignment(T, L_, rng_); }

    static ExitAssignment sample_exit_assignment(int T, int L, Rng& rng);

  private:
    int k_;
    int L_;
    Rng rng_;
};

inline ExitAssignment sample_exit_assignment(int T, int L, Rng& rng) {
    return PermutationSampler::sample_exit_assignment(T, L, rng);
}

// Splits on the vocabulary's full-stop token; each sentence keeps its stop.
std::vector<std::vector<int>> split_sentences(std::span<const int> doc_ids,
                                              int full_stop_id);

std::vector<int> shuffle_sentences(std::span<const int> doc_ids,
                                   const Vocabulary& vocab, Rng& rng);

// Zero-truncated Poisson(lambda): the raw span-length draw before clipping.
int sample_span_length(const CorruptionConfig& cfg, Rng& rng);

// Replaces non-overlapping spans with single MASK tokens until the covered
// token budget round(span_fraction * len) is reached.
std::vector<int> infill_spans(std::span<const int> doc_ids,
                              const CorruptionConfig& cfg, Rng& rng);

std::vector<int> corrupt_document(std::span<const int> doc_ids,
                                  const Vocabulary& vocab,
                                  const CorruptionConfig& cfg, Rng& rng);

// Greedy sentence packing so each piece plus EOS fits T_max; a single
// sentence that cannot fit is chunked.
std::vector<std::vector<int>> split_to_fit(std::span<const int> doc_ids,
                                           const Vocabulary& vocab, int T_max);

TrainingExample make_training_example(std::span<const int> doc_ids,
                                      const Vocabulary& vocab,
                                      const CorruptionConfig& cfg, Rng& rng);

struct LplmStats {
    real_t mean_exit = 0.0;
};

// Per-token cross-entropy at the assigned exit layers, averaged over the
// given assignments. Default path: one shared full-depth forward, per-layer
// off-ramp losses weighted by assignment counts. exact_copy_through instead
// runs one copy-through decode per assignment (slow, for equivalence checks).
Tensor lplm_loss_for_assignments(const Model& model,
                                 const TrainingExample& example,
                                 std::span<const ExitAssignment> assignments,
                                 bool exact_copy_through = false);

Tensor lplm_loss(const Model& model, const TrainingExample& example,
                 PermutationSampler& sampler, bool exact_copy_through = false,
                 LplmStats* stats = nullptr);

// Vanilla last-layer NAR loss (the degenerate all-L assignment).
Tensor nar_cross_entropy(const Model& model, const TrainingExample& example);

struct PretrainConfig {
    int steps = 0;
    int batch = 8;
    std::uint64_t seed = 0;
    int k = 10;  // assignments per sequence
    real_t lr = 2e-4;
    CorruptionConfig corruption;
};

struct StepRecord {
    int step = 0;
    real_t loss = 0.0;
    real_t tokens_per_sec = 0.0;  // wall-clock; excluded from determinism
    real_t mean_exit = 0.0;
};

struct TrainReport {
    std::vector<StepRecord> records;
};

// corrupt -> encode -> assigned-exit loss -> backward -> optimizer step,
// batched by gradient accumulation. Deterministic under fixed seed except
// for the tokens_per_sec field. Aborts with a diagnostic if the loss leaves
// the finite range.
TrainReport pretrain_loop(Model& model, const std::vector<std::string>& corpus,
                          const Vocabulary& vocab, const PretrainConfig& cfg,
                          AdamState& optimizer);

}  // namespace narex
