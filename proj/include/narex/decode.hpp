#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "narex/adam.hpp"
#include "narex/model.hpp"
#include "narex/pretrain.hpp"

namespace narex {

struct HardExitConfig {
    real_t delta = 0.5;  // entropy threshold in nats
    int T = 0;           // requested decode length
};

struct SoftExitConfig {
    int T = 0;
};

struct GenerationResult {
    std::vector<int> ids;           // prefix strictly before the first EOS
    std::vector<int> raw_ids;       // length T, untruncated
    std::vector<int> exit_layers;   // per position
    std::vector<real_t> exit_entropy;  // entropy at the exit layer, nats
    FlopCounters flops;
    std::int64_t wall_ns = 0;
    real_t mean_exit = 0.0;
};

// Shannon entropy in nats; 0 * log 0 counts as 0.
real_t entropy(std::span<const real_t> dist);

std::vector<int> truncate_at_eos(std::span<const int> raw_ids);

// Layer-synchronous sweep: at each layer every undecided position evaluates
// its off-ramp and exits once entropy drops strictly below delta (forced at
// layer L). Exited rows freeze and keep serving as attention keys/values.
GenerationResult generate_hard(const Model& model, const EncoderStates& enc,
                               const HardExitConfig& cfg);

// Every position runs all L layers; between layers the argmax prediction is
// embedded and fed back through the calibration matrix. Deterministic pure
// function of (model, enc, T).
GenerationResult generate_soft(const Model& model, const EncoderStates& enc,
                               const SoftExitConfig& cfg);

// Feedback forward shared by soft generation and soft fine-tuning. Returns
// the per-layer off-ramp logits ([T x V] each, layer L last).
std::vector<Tensor> soft_forward_logits(const Model& model,
                                        const EncoderStates& enc, int T,
                                        Rng* dropout_rng = nullptr);

// Sum of per-layer cross-entropies under the feedback forward.
Tensor soft_deep_supervision_loss(const Model& model,
                                  const TrainingExample& example,
                                  std::vector<real_t>* layer_losses = nullptr);

enum class FinetuneMode { Hard, Soft };

struct FinetunePair {
    std::vector<int> src_ids;
    std::vector<int> tgt_ids;  // raw target, no EOS yet
};

struct FinetuneConfig {
    FinetuneMode mode = FinetuneMode::Hard;
    int steps = 0;
    int batch = 8;
    std::uint64_t seed = 0;
    int k = 10;       // sampled exit assignments per sequence (hard mode)
    real_t lr = 2e-4;
    int T = 0;        // fixed training length; 0 = longest target + EOS
};

struct FinetuneRecord {
    int step = 0;
    real_t loss = 0.0;
    real_t mean_exit = 0.0;
    std::vector<real_t> layer_losses;  // soft mode only
};

struct FinetuneReport {
    std::vector<FinetuneRecord> records;
    int T = 0;  // resolved training length
};

// Hard mode continues assigned-exit training; soft mode trains the feedback
// forward with deep supervision. Targets are EOS-terminated and PAD-filled to
// the fixed length so every position carries loss.
FinetuneReport finetune_loop(Model& model,
                             const std::vector<FinetunePair>& dataset,
                             const FinetuneConfig& cfg, AdamState& optimizer);

}  // namespace narex
