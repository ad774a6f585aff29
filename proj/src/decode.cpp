#include "narex/decode.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "narex/autograd.hpp"
#include "narex/ops.hpp"
#include "narex/vocab.hpp"

namespace narex {

namespace {

int argmax_span(std::span<const real_t> row) {
    NAREX_CHECK(!row.empty(), "argmax over an empty row");
    int best = 0;
    for (int j = 1; j < static_cast<int>(row.size()); ++j) {
        if (row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(best)]) {
            best = j;
        }
    }
    return best;
}

std::vector<int> identity_index(int T) {
    std::vector<int> idx(static_cast<std::size_t>(T));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

void check_decode_length(const Model& model, int T) {
    NAREX_CHECK(T >= 1 && T <= model.config().T_max, "decode length ", T,
                " outside [1, ", model.config().T_max, "]");
}

// Fixed-length target: content, EOS, PAD fill. Rejects pairs that cannot fit.
std::vector<int> padded_target(const std::vector<int>& tgt, int T) {
    NAREX_CHECK(static_cast<int>(tgt.size()) + 1 <= T, "target of length ",
                tgt.size(), " plus EOS does not fit decode length ", T);
    std::vector<int> out = tgt;
    out.push_back(Vocabulary::kEos);
    out.resize(static_cast<std::size_t>(T), Vocabulary::kPad);
    return out;
}

}  // namespace

real_t entropy(std::span<const real_t> dist) {
    NAREX_CHECK(!dist.empty(), "entropy of an empty distribution");
    real_t total = 0.0;
    for (real_t p : dist) {
        NAREX_CHECK(p >= 0.0, "entropy: negative probability ", p);
        total += p;
    }
    NAREX_CHECK(std::abs(total - 1.0) <= 1e-4,
                "entropy: distribution sums to ", total, ", expected 1");
    real_t h = 0.0;
    for (real_t p : dist) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<int> truncate_at_eos(std::span<const int> raw_ids) {
    std::vector<int> out;
    for (int id : raw_ids) {
        if (id == Vocabulary::kEos) break;
        out.push_back(id);
    }
    return out;
}

GenerationResult generate_hard(const Model& model, const EncoderStates& enc,
                               const HardExitConfig& cfg) {
    NAREX_CHECK(enc.s.defined(), "generate_hard: undefined encoder states");
    NAREX_CHECK(cfg.delta >= 0.0, "entropy threshold must be non-negative, got ",
                cfg.delta);
    check_decode_length(model, cfg.T);

    const int T = cfg.T;
    const int L = model.config().L;
    const int V = model.config().V;

    GenerationResult out;
    out.raw_ids.assign(static_cast<std::size_t>(T), Vocabulary::kPad);
    out.exit_layers.assign(static_cast<std::size_t>(T), 0);
    out.exit_entropy.assign(static_cast<std::size_t>(T), 0.0);

    const auto start = std::chrono::steady_clock::now();
    {
        NoGradScope no_grad;
        FlopScope flops(out.flops);

        Tensor h = model.decoder_input(T);
        std::vector<int> active = identity_index(T);

        for (int l = 1; l <= L && !active.empty(); ++l) {
            h = model.run_decoder_layer(l, h, active, enc.s);
            Tensor rows = gather_rows(h, active);
            Tensor probs = softmax(model.off_ramp_logits(rows, l));

            std::vector<int> still_active;
            for (int i = 0; i < static_cast<int>(active.size()); ++i) {
                const int t = active[static_cast<std::size_t>(i)];
                const auto row = probs.values().subspan(
                    static_cast<std::size_t>(i) * static_cast<std::size_t>(V),
                    static_cast<std::size_t>(V));
                const real_t ent = entropy(row);
                if (ent < cfg.delta || l == L) {
                    out.exit_layers[static_cast<std::size_t>(t)] = l;
                    out.exit_entropy[static_cast<std::size_t>(t)] = ent;
                    out.raw_ids[static_cast<std::size_t>(t)] = argmax_span(row);
                } else {
                    still_active.push_back(t);
                }
            }
            active = std::move(still_active);
        }
    }
    out.wall_ns = elapsed_ns(start);
    out.ids = truncate_at_eos(out.raw_ids);
    out.mean_exit =
        std::accumulate(out.exit_layers.begin(), out.exit_layers.end(), 0.0) / T;
    return out;
}

std::vector<Tensor> soft_forward_logits(const Model& model,
                                        const EncoderStates& enc, int T,
                                        Rng* dropout_rng) {
    NAREX_CHECK(enc.s.defined(), "soft forward: undefined encoder states");
    check_decode_length(model, T);

    const int L = model.config().L;
    const int V = model.config().V;
    const std::vector<int> all_active = identity_index(T);

    std::vector<Tensor> per_layer;
    per_layer.reserve(static_cast<std::size_t>(L));

    Tensor h = model.decoder_input(T);
    for (int l = 1; l <= L; ++l) {
        h = model.run_decoder_layer(l, h, all_active, enc.s, /*causal=*/false,
                                    dropout_rng);
        Tensor logits = model.off_ramp_logits(h, l);
        per_layer.push_back(logits);
        if (l == L) break;

        // Embed the current best guess and mix it back into the stream; the
        // lookup reuses the decoder input token table.
        std::vector<int> guesses(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) {
            guesses[static_cast<std::size_t>(t)] = argmax_span(
                logits.values().subspan(
                    static_cast<std::size_t>(t) * static_cast<std::size_t>(V),
                    static_cast<std::size_t>(V)));
        }
        Tensor mixed = concat_cols(model.embed_tokens(guesses), h);
        FlopCategoryScope feedback(FlopCategory::DecoderFeedback);
        h = add_row_bias(matmul(mixed, model.soft_exit_w()),
                         model.soft_exit_b());
    }
    return per_layer;
}

GenerationResult generate_soft(const Model& model, const EncoderStates& enc,
                               const SoftExitConfig& cfg) {
    const int T = cfg.T;
    const int L = model.config().L;
    const int V = model.config().V;

    GenerationResult out;
    const auto start = std::chrono::steady_clock::now();
    {
        NoGradScope no_grad;
        FlopScope flops(out.flops);

        std::vector<Tensor> per_layer = soft_forward_logits(model, enc, T);
        Tensor probs = softmax(per_layer.back());
        out.raw_ids.resize(static_cast<std::size_t>(T));
        out.exit_entropy.resize(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) {
            const auto row = probs.values().subspan(
                static_cast<std::size_t>(t) * static_cast<std::size_t>(V),
                static_cast<std::size_t>(V));
            out.raw_ids[static_cast<std::size_t>(t)] = argmax_span(row);
            out.exit_entropy[static_cast<std::size_t>(t)] = entropy(row);
        }
    }
    out.wall_ns = elapsed_ns(start);
    out.exit_layers.assign(static_cast<std::size_t>(T), L);
    out.mean_exit = static_cast<real_t>(L);
    out.ids = truncate_at_eos(out.raw_ids);
    return out;
}

Tensor soft_deep_supervision_loss(const Model& model,
                                  const TrainingExample& example,
                                  std::vector<real_t>* layer_losses) {
    NAREX_CHECK(example.T >= 1 && static_cast<int>(example.tgt_ids.size()) ==
                                      example.T,
                "target ids do not match the stated length");
    EncoderStates enc = model.encode(example.src_ids);
    std::vector<Tensor> per_layer =
        soft_forward_logits(model, enc, example.T);

    if (layer_losses != nullptr) layer_losses->clear();
    Tensor loss;
    for (Tensor& logits : per_layer) {
        Tensor term = cross_entropy(logits, example.tgt_ids);
        if (layer_losses != nullptr) layer_losses->push_back(term.item());
        loss = loss.defined() ? add(loss, term) : term;
    }
    return loss;
}

FinetuneReport finetune_loop(Model& model,
                             const std::vector<FinetunePair>& dataset,
                             const FinetuneConfig& cfg, AdamState& optimizer) {
    NAREX_CHECK(cfg.steps >= 0, "finetune: negative step count");
    NAREX_CHECK(cfg.batch >= 1, "finetune: batch must be at least 1");
    NAREX_CHECK(!dataset.empty(), "finetune: empty dataset");

    // Resolve the fixed decode length: every target plus its EOS must fit.
    int longest = 0;
    for (const FinetunePair& pair : dataset) {
        longest = std::max(longest, static_cast<int>(pair.tgt_ids.size()));
    }
    const int T = cfg.T > 0 ? cfg.T : longest + 1;
    check_decode_length(model, T);

    std::vector<TrainingExample> examples;
    examples.reserve(dataset.size());
    for (const FinetunePair& pair : dataset) {
        TrainingExample ex;
        ex.src_ids = pair.src_ids;
        ex.tgt_ids = padded_target(pair.tgt_ids, T);
        ex.T = T;
        examples.push_back(std::move(ex));
    }

    std::vector<Tensor> params = model.params();
    if (!optimizer.initialized()) optimizer.init(params);
    optimizer.set_lr(cfg.lr);

    PermutationSampler sampler(cfg.k, model.config().L,
                               Rng::mix(cfg.seed, 0xFEEDF00DULL));
    FinetuneReport report;
    report.T = T;
    std::int64_t cursor = 0;

    for (int step = 0; step < cfg.steps; ++step) {
        real_t loss_sum = 0.0;
        real_t exit_sum = 0.0;
        std::vector<real_t> layer_sum;

        for (Tensor& p : params) p.zero_grad();
        for (int b = 0; b < cfg.batch; ++b, ++cursor) {
            const TrainingExample& ex = examples[static_cast<std::size_t>(
                cursor % static_cast<std::int64_t>(examples.size()))];

            TapeScope tape;
            Tensor loss;
            if (cfg.mode == FinetuneMode::Hard) {
                LplmStats stats;
                loss = lplm_loss(model, ex, sampler, false, &stats);
                exit_sum += stats.mean_exit;
            } else {
                std::vector<real_t> per_layer;
                loss = soft_deep_supervision_loss(model, ex, &per_layer);
                if (layer_sum.empty()) layer_sum.assign(per_layer.size(), 0.0);
                for (std::size_t i = 0; i < per_layer.size(); ++i) {
                    layer_sum[i] += per_layer[i];
                }
                exit_sum += static_cast<real_t>(model.config().L);
            }
            const real_t value = loss.item();
            NAREX_CHECK(std::isfinite(value),
                        "finetune diverged: non-finite loss at step ", step,
                        ", batch item ", b);
            backward(mul_scalar(loss, 1.0 / static_cast<real_t>(cfg.batch)));
            loss_sum += value;
        }
        optimizer.step(params);

        FinetuneRecord rec;
        rec.step = step;
        rec.loss = loss_sum / cfg.batch;
        rec.mean_exit = exit_sum / cfg.batch;
        for (real_t v : layer_sum) rec.layer_losses.push_back(v / cfg.batch);
        report.records.push_back(rec);
    }
    return report;
}

}  // namespace narex
