#include "narex/pretrain.hpp"

#include <chrono>
#include <cmath>

#include "narex/autograd.hpp"

namespace narex {

void CorruptionConfig::validate() const {
    NAREX_CHECK(span_fraction > 0.0 && span_fraction < 1.0,
                "corruption span_fraction must be in (0, 1), got ", span_fraction);
    NAREX_CHECK(poisson_lambda > 0.0,
                "corruption poisson_lambda must be positive, got ",
                poisson_lambda);
}

ExitAssignment PermutationSampler::sample_exit_assignment(int T, int L,
                                                          Rng& rng) {
    NAREX_CHECK(T >= 1, "exit assignment needs T >= 1, got ", T);
    NAREX_CHECK(L >= 1, "exit assignment needs L >= 1, got ", L);
    ExitAssignment out;
    out.exits.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) out.exits.push_back(rng.uniform_int(1, L));
    return out;
}

std::vector<std::vector<int>> split_sentences(std::span<const int> doc_ids,
                                              int full_stop_id) {
    std::vector<std::vector<int>> sentences;
    std::vector<int> current;
    for (int id : doc_ids) {
        current.push_back(id);
        if (id == full_stop_id) {
            sentences.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) sentences.push_back(std::move(current));
    return sentences;
}

std::vector<int> shuffle_sentences(std::span<const int> doc_ids,
                                   const Vocabulary& vocab, Rng& rng) {
    if (!vocab.contains(".")) {
        return {doc_ids.begin(), doc_ids.end()};
    }
    auto sentences = split_sentences(doc_ids, vocab.id_of("."));
    rng.shuffle(sentences);
    std::vector<int> out;
    out.reserve(doc_ids.size());
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
}

int sample_span_length(const CorruptionConfig& cfg, Rng& rng) {
    int len = 0;
    while (len == 0) len = rng.poisson(cfg.poisson_lambda);
    return len;
}

std::vector<int> infill_spans(std::span<const int> doc_ids,
                              const CorruptionConfig& cfg, Rng& rng) {
    cfg.validate();
    const int n = static_cast<int>(doc_ids.size());
    NAREX_CHECK(n >= 1, "infill_spans: empty document");
    const int budget =
        static_cast<int>(std::llround(cfg.span_fraction * static_cast<real_t>(n)));
    if (budget < 1) return {doc_ids.begin(), doc_ids.end()};

    std::vector<bool> masked(static_cast<std::size_t>(n), false);
    int covered = 0;
    while (covered < budget) {
        int len = std::min(sample_span_length(cfg, rng), budget - covered);
        bool placed = false;
        while (len >= 1 && !placed) {
            for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
                const int start = rng.uniform_int(0, n - len);
                bool clash = false;
                for (int i = start; i < start + len; ++i) {
                    if (masked[static_cast<std::size_t>(i)]) {
                        clash = true;
                        break;
                    }
                }
                if (clash) continue;
                for (int i = start; i < start + len; ++i) {
                    masked[static_cast<std::size_t>(i)] = true;
                }
                covered += len;
                placed = true;
            }
            // The document is too fragmented for this length; try shorter.
            if (!placed) --len;
        }
        if (!placed) break;  // no single free token left
    }

    std::vector<int> out;
    out.reserve(doc_ids.size());
    for (int i = 0; i < n; ++i) {
        if (!masked[static_cast<std::size_t>(i)]) {
            out.push_back(doc_ids[static_cast<std::size_t>(i)]);
        } else if (i == 0 || !masked[static_cast<std::size_t>(i - 1)]) {
            // First token of a span: the whole span becomes one MASK.
            out.push_back(Vocabulary::kMask);
        }
    }
    return out;
}

std::vector<int> corrupt_document(std::span<const int> doc_ids,
                                  const Vocabulary& vocab,
                                  const CorruptionConfig& cfg, Rng& rng) {
    std::vector<int> ids = cfg.shuffle_sentences
                               ? shuffle_sentences(doc_ids, vocab, rng)
                               : std::vector<int>{doc_ids.begin(), doc_ids.end()};
    return infill_spans(ids, cfg, rng);
}

std::vector<std::vector<int>> split_to_fit(std::span<const int> doc_ids,
                                           const Vocabulary& vocab, int T_max) {
    NAREX_CHECK(T_max >= 2, "split_to_fit needs room for a token plus EOS");
    const int cap = T_max - 1;  // leave room for EOS
    std::vector<std::vector<int>> pieces;
    const int stop = vocab.contains(".") ? vocab.id_of(".") : -1;
    std::vector<std::vector<int>> sentences =
        stop >= 0 ? split_sentences(doc_ids, stop)
                  : std::vector<std::vector<int>>{
                        {doc_ids.begin(), doc_ids.end()}};

    std::vector<int> current;
    const auto flush = [&] {
        if (!current.empty()) {
            pieces.push_back(std::move(current));
            current.clear();
        }
    };
    for (auto& sentence : sentences) {
        if (static_cast<int>(sentence.size()) > cap) {
            // One sentence alone exceeds the window: chunk it.
            flush();
            for (std::size_t off = 0; off < sentence.size();
                 off += static_cast<std::size_t>(cap)) {
                const auto end =
                    std::min(sentence.size(), off + static_cast<std::size_t>(cap));
                pieces.emplace_back(sentence.begin() + static_cast<std::ptrdiff_t>(off),
                                    sentence.begin() + static_cast<std::ptrdiff_t>(end));
            }
            continue;
        }
        if (static_cast<int>(current.size() + sentence.size()) > cap) flush();
        current.insert(current.end(), sentence.begin(), sentence.end());
    }
    flush();
    return pieces;
}

TrainingExample make_training_example(std::span<const int> doc_ids,
                                      const Vocabulary& vocab,
                                      const CorruptionConfig& cfg, Rng& rng) {
    NAREX_CHECK(!doc_ids.empty(), "training example from an empty document");
    TrainingExample ex;
    ex.tgt_ids.assign(doc_ids.begin(), doc_ids.end());
    ex.tgt_ids.push_back(Vocabulary::kEos);
    ex.T = static_cast<int>(ex.tgt_ids.size());
    ex.src_ids = corrupt_document(doc_ids, vocab, cfg, rng);
    return ex;
}

namespace {

Tensor shared_forward_loss(const Model& model, const TrainingExample& example,
                           std::span<const ExitAssignment> assignments) {
    const int T = example.T;
    const int L = model.config().L;
    const int k = static_cast<int>(assignments.size());

    // Count how often each (layer, position) pair is the assigned exit.
    std::vector<std::vector<real_t>> weight(
        static_cast<std::size_t>(L),
        std::vector<real_t>(static_cast<std::size_t>(T), 0.0));
    for (const ExitAssignment& a : assignments) {
        NAREX_CHECK(a.size() == T, "assignment length ", a.size(),
                    " does not match target length ", T);
        for (int t = 0; t < T; ++t) {
            const int l = a.exits[static_cast<std::size_t>(t)];
            NAREX_CHECK(l >= 1 && l <= L, "exit layer ", l, " outside [1, ", L,
                        "]");
            weight[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)] +=
                1.0 / (static_cast<real_t>(k) * T);
        }
    }

    EncoderStates enc = model.encode(example.src_ids);
    DecoderTrace trace =
        model.decode_with_exits(enc, T, ExitAssignment::uniform(T, L));

    Tensor loss;
    for (int l = 1; l <= L; ++l) {
        const auto& w = weight[static_cast<std::size_t>(l - 1)];
        bool any = false;
        for (real_t v : w) {
            if (v > 0.0) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        Tensor logits = model.off_ramp_logits(
            trace.layer_states[static_cast<std::size_t>(l)], l);
        Tensor term = cross_entropy_weighted(logits, example.tgt_ids, w);
        loss = loss.defined() ? add(loss, term) : term;
    }
    return loss;
}

Tensor exact_forward_loss(const Model& model, const TrainingExample& example,
                          std::span<const ExitAssignment> assignments) {
    const int k = static_cast<int>(assignments.size());
    Tensor loss;
    for (const ExitAssignment& a : assignments) {
        EncoderStates enc = model.encode(example.src_ids);
        DecoderTrace trace = model.decode_with_exits(enc, example.T, a);
        Tensor term = cross_entropy(trace.logits, example.tgt_ids);
        loss = loss.defined() ? add(loss, term) : term;
    }
    return mul_scalar(loss, 1.0 / static_cast<real_t>(k));
}

}  // namespace

Tensor lplm_loss_for_assignments(const Model& model,
                                 const TrainingExample& example,
                                 std::span<const ExitAssignment> assignments,
                                 bool exact_copy_through) {
    NAREX_CHECK(!assignments.empty(), "lplm loss needs at least one assignment");
    NAREX_CHECK(example.T >= 1 && example.T <= model.config().T_max,
                "target length ", example.T, " outside [1, ",
                model.config().T_max, "]");
    // Well-formed target: content, one EOS, then nothing but padding (fixed
    // decode-length targets PAD-fill the tail after the EOS).
    bool eos_ok = false;
    for (std::size_t i = 0; i < example.tgt_ids.size(); ++i) {
        if (example.tgt_ids[i] == Vocabulary::kEos) {
            eos_ok = true;
            for (std::size_t j = i + 1; j < example.tgt_ids.size(); ++j) {
                if (example.tgt_ids[j] != Vocabulary::kPad) eos_ok = false;
            }
            break;
        }
    }
    NAREX_CHECK(eos_ok, "training target must end with EOS");
    return exact_copy_through
               ? exact_forward_loss(model, example, assignments)
               : shared_forward_loss(model, example, assignments);
}

Tensor lplm_loss(const Model& model, const TrainingExample& example,
                 PermutationSampler& sampler, bool exact_copy_through,
                 LplmStats* stats) {
    std::vector<ExitAssignment> assignments;
    assignments.reserve(static_cast<std::size_t>(sampler.k()));
    real_t exit_sum = 0.0;
    for (int i = 0; i < sampler.k(); ++i) {
        assignments.push_back(sampler.sample(example.T));
        for (int e : assignments.back().exits) exit_sum += e;
    }
    if (stats != nullptr) {
        stats->mean_exit =
            exit_sum / (static_cast<real_t>(sampler.k()) * example.T);
    }
    return lplm_loss_for_assignments(model, example, assignments,
                                     exact_copy_through);
}

Tensor nar_cross_entropy(const Model& model, const TrainingExample& example) {
    EncoderStates enc = model.encode(example.src_ids);
    DecoderTrace trace = model.decode_with_exits(
        enc, example.T, ExitAssignment::uniform(example.T, model.config().L));
    return cross_entropy(trace.logits, example.tgt_ids);
}

TrainReport pretrain_loop(Model& model, const std::vector<std::string>& corpus,
                          const Vocabulary& vocab, const PretrainConfig& cfg,
                          AdamState& optimizer) {
    NAREX_CHECK(!corpus.empty(), "pretrain: empty corpus");
    NAREX_CHECK(cfg.batch >= 1, "pretrain: batch must be at least 1");
    cfg.corruption.validate();

    // Tokenize and window every document up front.
    std::vector<std::vector<int>> examples;
    for (const std::string& line : corpus) {
        const std::vector<int> ids = encode(line, vocab);
        if (ids.empty()) continue;
        for (auto& piece : split_to_fit(ids, vocab, model.config().T_max)) {
            examples.push_back(std::move(piece));
        }
    }
    NAREX_CHECK(!examples.empty(), "pretrain: corpus has no usable documents");

    std::vector<Tensor> params = model.params();
    if (!optimizer.initialized()) optimizer.init(params);
    optimizer.set_lr(cfg.lr);

    PermutationSampler sampler(cfg.k, model.config().L,
                               Rng::mix(cfg.seed, 0x5AFE5EEDULL));
    TrainReport report;
    std::int64_t cursor = 0;

    for (int step = 0; step < cfg.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        real_t loss_sum = 0.0;
        real_t exit_sum = 0.0;
        std::int64_t token_count = 0;

        for (Tensor& p : params) p.zero_grad();
        for (int b = 0; b < cfg.batch; ++b, ++cursor) {
            const std::size_t doc =
                static_cast<std::size_t>(cursor % static_cast<std::int64_t>(examples.size()));
            Rng doc_rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(cursor)));
            TrainingExample ex = make_training_example(
                examples[doc], vocab, cfg.corruption, doc_rng);

            TapeScope tape;
            LplmStats stats;
            Tensor loss = lplm_loss(model, ex, sampler, false, &stats);
            const real_t value = loss.item();
            NAREX_CHECK(std::isfinite(value),
                        "pretrain diverged: non-finite loss at step ", step,
                        ", batch item ", b);
            backward(mul_scalar(loss, 1.0 / static_cast<real_t>(cfg.batch)));
            loss_sum += value;
            exit_sum += stats.mean_exit;
            token_count += ex.T;
        }
        optimizer.step(params);

        const auto elapsed =
            std::chrono::duration_cast<std::chrono::duration<real_t>>(
                std::chrono::steady_clock::now() - start)
                .count();
        StepRecord rec;
        rec.step = step;
        rec.loss = loss_sum / cfg.batch;
        rec.mean_exit = exit_sum / cfg.batch;
        rec.tokens_per_sec =
            elapsed > 0.0 ? static_cast<real_t>(token_count) / elapsed : 0.0;
        report.records.push_back(rec);
    }
    return report;
}

}  // namespace narex
