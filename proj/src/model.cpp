#include "narex/model.hpp"

#include <cmath>

#include "narex/autograd.hpp"
#include "narex/vocab.hpp"

namespace narex {

namespace {

// Weight matrices use fan-in-scaled normal init so activations and gradients
// stay O(1) through projections regardless of width. The vocabulary
// classifiers use a deliberately smaller scale: they read the raw residual
// stream (whose norm grows with depth), and a fresh model should start from a
// near-uniform output distribution.
constexpr real_t kClassifierShrink = 0.1;

real_t fan_in_std(int fan_in) {
    return 1.0 / std::sqrt(static_cast<real_t>(fan_in));
}

Tensor weight(Shape shape, Rng& rng, real_t std_dev) {
    return Tensor::randn(std::move(shape), rng, std_dev, true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

LayerNormParams make_ln(int d) {
    return {Tensor::full({d}, 1.0, true), zeros_param({d})};
}

AttentionParams make_attention(int d, Rng& rng) {
    const real_t s = fan_in_std(d);
    return {weight({d, d}, rng, s), zeros_param({d}), weight({d, d}, rng, s),
            zeros_param({d}), weight({d, d}, rng, s), zeros_param({d}),
            weight({d, d}, rng, s), zeros_param({d})};
}

FfnParams make_ffn(int d, int d_ff, Rng& rng) {
    return {weight({d, d_ff}, rng, fan_in_std(d)), zeros_param({d_ff}),
            weight({d_ff, d}, rng, fan_in_std(d_ff)), zeros_param({d})};
}

// Scaled dot-product over pre-projected Q/K/V, head by head.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      const Tensor& wo, const Tensor& bo, int heads,
                      bool causal) {
    const int dh = q.cols() / heads;
    const real_t scale = 1.0 / std::sqrt(static_cast<real_t>(dh));
    Tensor ctx;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = mul_scalar(matmul(qh, transpose(kh)), scale);
        if (causal) scores = causal_mask(scores);
        Tensor ctx_h = matmul(softmax(scores), vh);
        ctx = h == 0 ? ctx_h : concat_cols(ctx, ctx_h);
    }
    return add_row_bias(matmul(ctx, wo), bo);
}

Tensor project(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_row_bias(matmul(x, w), b);
}

Tensor maybe_dropout(const Tensor& x, real_t p, Rng* rng) {
    return rng == nullptr || p == 0.0 ? x : dropout(x, p, *rng);
}

std::vector<int> identity_indices(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

int argmax_row(const Tensor& logits) {
    const auto v = logits.values();
    int best = 0;
    for (std::size_t j = 1; j < v.size(); ++j) {
        if (v[j] > v[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace

void ModelConfig::validate() const {
    NAREX_CHECK(L >= 1, "model config: L must be at least 1, got ", L);
    NAREX_CHECK(d >= 1 && heads >= 1 && d % heads == 0,
                "model config: d (", d, ") must be a positive multiple of heads (",
                heads, ")");
    NAREX_CHECK(d_ff >= 1, "model config: d_ff must be positive, got ", d_ff);
    NAREX_CHECK(T_max >= 1, "model config: T_max must be at least 1, got ", T_max);
    NAREX_CHECK(V >= 5, "model config: V must cover the reserved ids, got ", V);
    NAREX_CHECK(dropout >= 0.0 && dropout < 1.0,
                "model config: dropout must be in [0, 1), got ", dropout);
}

Model::Model(ModelConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    tok_embed_ = weight({cfg_.V, cfg_.d}, rng, fan_in_std(cfg_.d));
    pos_embed_ = weight({cfg_.T_max, cfg_.d}, rng, fan_in_std(cfg_.d));
    for (int l = 0; l < cfg_.L; ++l) {
        enc_layers_.push_back({make_ln(cfg_.d), make_attention(cfg_.d, rng),
                               make_ln(cfg_.d), make_ffn(cfg_.d, cfg_.d_ff, rng)});
    }
    enc_final_ln_ = make_ln(cfg_.d);
    for (int l = 0; l < cfg_.L; ++l) {
        dec_layers_.push_back({make_ln(cfg_.d), make_attention(cfg_.d, rng),
                               make_ln(cfg_.d), make_attention(cfg_.d, rng),
                               make_ln(cfg_.d), make_ffn(cfg_.d, cfg_.d_ff, rng)});
    }
    const int ramp_count = cfg_.share_off_ramps ? 1 : cfg_.L;
    const real_t ramp_std = kClassifierShrink * fan_in_std(cfg_.d);
    for (int l = 0; l < ramp_count; ++l) {
        off_ramps_.push_back(
            {weight({cfg_.d, cfg_.V}, rng, ramp_std), zeros_param({cfg_.V})});
    }
    soft_exit_w_ = weight({2 * cfg_.d, cfg_.d}, rng, fan_in_std(2 * cfg_.d));
    soft_exit_b_ = zeros_param({cfg_.d});
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    const auto add = [&out](std::string name, const Tensor& t) {
        out.emplace_back(std::move(name), t);
    };
    const auto add_ln = [&add](const std::string& prefix,
                               const LayerNormParams& p) {
        add(prefix + ".gain", p.gain);
        add(prefix + ".bias", p.bias);
    };
    const auto add_attn = [&add](const std::string& prefix,
                                 const AttentionParams& p) {
        add(prefix + ".wq", p.wq);
        add(prefix + ".bq", p.bq);
        add(prefix + ".wk", p.wk);
        add(prefix + ".bk", p.bk);
        add(prefix + ".wv", p.wv);
        add(prefix + ".bv", p.bv);
        add(prefix + ".wo", p.wo);
        add(prefix + ".bo", p.bo);
    };
    const auto add_ffn = [&add](const std::string& prefix, const FfnParams& p) {
        add(prefix + ".w1", p.w1);
        add(prefix + ".b1", p.b1);
        add(prefix + ".w2", p.w2);
        add(prefix + ".b2", p.b2);
    };

    add("tok_embed", tok_embed_);
    add("pos_embed", pos_embed_);
    for (std::size_t l = 0; l < enc_layers_.size(); ++l) {
        const std::string prefix = "enc." + std::to_string(l);
        add_ln(prefix + ".ln1", enc_layers_[l].ln1);
        add_attn(prefix + ".attn", enc_layers_[l].attn);
        add_ln(prefix + ".ln2", enc_layers_[l].ln2);
        add_ffn(prefix + ".ffn", enc_layers_[l].ffn);
    }
    add_ln("enc.final_ln", enc_final_ln_);
    for (std::size_t l = 0; l < dec_layers_.size(); ++l) {
        const std::string prefix = "dec." + std::to_string(l);
        add_ln(prefix + ".ln1", dec_layers_[l].ln1);
        add_attn(prefix + ".self", dec_layers_[l].self_attn);
        add_ln(prefix + ".ln2", dec_layers_[l].ln2);
        add_attn(prefix + ".cross", dec_layers_[l].cross_attn);
        add_ln(prefix + ".ln3", dec_layers_[l].ln3);
        add_ffn(prefix + ".ffn", dec_layers_[l].ffn);
    }
    for (std::size_t l = 0; l < off_ramps_.size(); ++l) {
        const std::string prefix = "off_ramp." + std::to_string(l);
        add(prefix + ".w", off_ramps_[l].w);
        add(prefix + ".b", off_ramps_[l].b);
    }
    add("soft_exit.w", soft_exit_w_);
    add("soft_exit.b", soft_exit_b_);
    return out;
}

std::vector<Tensor> Model::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

Tensor Model::embed_tokens(std::span<const int> ids) const {
    return embedding_rows(tok_embed_, ids);
}

Tensor Model::embed_sequence(std::span<const int> ids) const {
    const int n = static_cast<int>(ids.size());
    NAREX_CHECK(n >= 1 && n <= cfg_.T_max, "embed_sequence: length ", n,
                " outside [1, ", cfg_.T_max, "]");
    return add(embed_tokens(ids), slice_rows(pos_embed_, 0, n));
}

Tensor Model::decoder_input(int T) const {
    const std::vector<int> masks(static_cast<std::size_t>(T), Vocabulary::kMask);
    return embed_sequence(masks);
}

Tensor Model::encoder_layer_forward(const EncoderLayerParams& p, const Tensor& x,
                                    Rng* dropout_rng) const {
    Tensor normed = layer_norm(x, p.ln1.gain, p.ln1.bias);
    Tensor q = project(normed, p.attn.wq, p.attn.bq);
    Tensor k = project(normed, p.attn.wk, p.attn.bk);
    Tensor v = project(normed, p.attn.wv, p.attn.bv);
    Tensor attn = attention_core(q, k, v, p.attn.wo, p.attn.bo, cfg_.heads, false);
    Tensor h = add(x, maybe_dropout(attn, cfg_.dropout, dropout_rng));

    Tensor normed2 = layer_norm(h, p.ln2.gain, p.ln2.bias);
    Tensor ff = project(gelu(project(normed2, p.ffn.w1, p.ffn.b1)), p.ffn.w2,
                        p.ffn.b2);
    return add(h, maybe_dropout(ff, cfg_.dropout, dropout_rng));
}

EncoderStates Model::encode(std::span<const int> src_ids,
                            Rng* dropout_rng) const {
    NAREX_CHECK(!src_ids.empty(), "encode: empty source sequence");
    std::vector<int> ids(src_ids.begin(), src_ids.end());
    bool truncated = false;
    if (static_cast<int>(ids.size()) > cfg_.T_max) {
        ids.resize(static_cast<std::size_t>(cfg_.T_max));
        truncated = true;
    }
    FlopCategoryScope cat(FlopCategory::Encoder);
    Tensor x = embed_sequence(ids);
    for (const auto& layer : enc_layers_) {
        x = encoder_layer_forward(layer, x, dropout_rng);
    }
    x = layer_norm(x, enc_final_ln_.gain, enc_final_ln_.bias);
    return {x, static_cast<int>(ids.size()), truncated};
}

Tensor Model::run_decoder_layer(int layer, const Tensor& states,
                                std::span<const int> active_idx,
                                const Tensor& enc_s, bool causal,
                                Rng* dropout_rng) const {
    NAREX_CHECK(layer >= 1 && layer <= cfg_.L, "decoder layer ", layer,
                " outside [1, ", cfg_.L, "]");
    if (active_idx.empty()) return states;
    const int T = states.rows();
    for (std::size_t i = 0; i < active_idx.size(); ++i) {
        NAREX_CHECK(active_idx[i] >= 0 && active_idx[i] < T &&
                        (i == 0 || active_idx[i] > active_idx[i - 1]),
                    "active positions must be strictly increasing and within [0, ",
                    T, ")");
    }
    const bool all_active = static_cast<int>(active_idx.size()) == T;
    NAREX_CHECK(!causal || all_active,
                "causal decoding requires every position active");
    const DecoderLayerParams& p = dec_layers_[static_cast<std::size_t>(layer - 1)];

    Tensor h = states;
    {
        FlopCategoryScope cat(FlopCategory::DecoderSelfAttn);
        // Keys/values span every position, so the norm runs over all rows.
        Tensor normed = layer_norm(states, p.ln1.gain, p.ln1.bias);
        Tensor q = project(gather_rows(normed, active_idx), p.self_attn.wq,
                           p.self_attn.bq);
        Tensor k, v;
        if (all_active) {
            k = project(normed, p.self_attn.wk, p.self_attn.bk);
            v = project(normed, p.self_attn.wv, p.self_attn.bv);
        } else {
            std::vector<int> frozen;
            frozen.reserve(static_cast<std::size_t>(T) - active_idx.size());
            std::size_t cursor = 0;
            for (int t = 0; t < T; ++t) {
                if (cursor < active_idx.size() && active_idx[cursor] == t) {
                    ++cursor;
                } else {
                    frozen.push_back(t);
                }
            }
            Tensor k_act = project(gather_rows(normed, active_idx),
                                   p.self_attn.wk, p.self_attn.bk);
            Tensor v_act = project(gather_rows(normed, active_idx),
                                   p.self_attn.wv, p.self_attn.bv);
            Tensor k_frozen, v_frozen;
            {
                // Frozen rows still serve as keys/values; their projections
                // are bookkept apart from the core per-layer work.
                FlopCategoryScope frozen_cat(FlopCategory::DecoderFrozenKv);
                k_frozen = project(gather_rows(normed, frozen), p.self_attn.wk,
                                   p.self_attn.bk);
                v_frozen = project(gather_rows(normed, frozen), p.self_attn.wv,
                                   p.self_attn.bv);
            }
            k = merge_rows(T, active_idx, k_act, frozen, k_frozen);
            v = merge_rows(T, active_idx, v_act, frozen, v_frozen);
        }
        Tensor attn = attention_core(q, k, v, p.self_attn.wo, p.self_attn.bo,
                                     cfg_.heads, causal);
        attn = maybe_dropout(attn, cfg_.dropout, dropout_rng);
        h = scatter_rows_update(states, active_idx,
                                add(gather_rows(states, active_idx), attn));
    }
    if (enc_s.defined()) {
        FlopCategoryScope cat(FlopCategory::DecoderCrossAttn);
        Tensor q_in = layer_norm(gather_rows(h, active_idx), p.ln2.gain,
                                 p.ln2.bias);
        Tensor q = project(q_in, p.cross_attn.wq, p.cross_attn.bq);
        Tensor k = project(enc_s, p.cross_attn.wk, p.cross_attn.bk);
        Tensor v = project(enc_s, p.cross_attn.wv, p.cross_attn.bv);
        Tensor attn = attention_core(q, k, v, p.cross_attn.wo, p.cross_attn.bo,
                                     cfg_.heads, false);
        attn = maybe_dropout(attn, cfg_.dropout, dropout_rng);
        h = scatter_rows_update(h, active_idx,
                                add(gather_rows(h, active_idx), attn));
    }
    {
        FlopCategoryScope cat(FlopCategory::DecoderFfn);
        Tensor x = layer_norm(gather_rows(h, active_idx), p.ln3.gain, p.ln3.bias);
        Tensor ff = project(gelu(project(x, p.ffn.w1, p.ffn.b1)), p.ffn.w2,
                            p.ffn.b2);
        ff = maybe_dropout(ff, cfg_.dropout, dropout_rng);
        h = scatter_rows_update(h, active_idx,
                                add(gather_rows(h, active_idx), ff));
    }
    return h;
}

DecoderTrace Model::decode_with_exits(const EncoderStates& enc, int T,
                                      const ExitAssignment& exits,
                                      Rng* dropout_rng) const {
    NAREX_CHECK(T >= 1 && T <= cfg_.T_max, "decode length ", T,
                " outside [1, ", cfg_.T_max, "]");
    NAREX_CHECK(exits.size() == T, "exit assignment covers ", exits.size(),
                " positions, expected ", T);
    for (int e : exits.exits) {
        NAREX_CHECK(e >= 1 && e <= cfg_.L, "exit layer ", e, " outside [1, ",
                    cfg_.L, "]");
    }

    DecoderTrace trace;
    trace.exits = exits.exits;
    Tensor h = decoder_input(T);
    trace.layer_states.push_back(h);
    for (int l = 1; l <= cfg_.L; ++l) {
        std::vector<int> active;
        for (int t = 0; t < T; ++t) {
            if (exits.exits[static_cast<std::size_t>(t)] >= l) active.push_back(t);
        }
        h = run_decoder_layer(l, h, active, enc.s, false, dropout_rng);
        trace.layer_states.push_back(h);
    }

    Tensor logits = Tensor::zeros({T, cfg_.V});
    for (int l = 1; l <= cfg_.L; ++l) {
        std::vector<int> idx;
        for (int t = 0; t < T; ++t) {
            if (exits.exits[static_cast<std::size_t>(t)] == l) idx.push_back(t);
        }
        if (idx.empty()) continue;
        Tensor rows = gather_rows(trace.layer_states[static_cast<std::size_t>(l)],
                                  idx);
        logits = scatter_rows_update(logits, idx, off_ramp_logits(rows, l));
    }
    trace.logits = logits;
    return trace;
}

const DecoderLayerParams& Model::decoder_layer(int layer) const {
    NAREX_CHECK(layer >= 1 && layer <= cfg_.L, "decoder layer ", layer,
                " outside [1, ", cfg_.L, "]");
    return dec_layers_[static_cast<std::size_t>(layer - 1)];
}

const OffRampParams& Model::off_ramp(int layer) const {
    NAREX_CHECK(layer >= 1 && layer <= cfg_.L, "off-ramp layer ", layer,
                " outside [1, ", cfg_.L, "]");
    return cfg_.share_off_ramps ? off_ramps_[0]
                                : off_ramps_[static_cast<std::size_t>(layer - 1)];
}

Tensor Model::off_ramp_logits(const Tensor& rows, int layer) const {
    const OffRampParams& ramp = off_ramp(layer);
    FlopCategoryScope cat(FlopCategory::OffRamp);
    return add_row_bias(matmul(rows, ramp.w), ramp.b);
}

std::vector<real_t> Model::off_ramp_predict(const Tensor& h, int layer) const {
    NAREX_CHECK(h.defined() && static_cast<int>(h.numel()) == cfg_.d,
                "off_ramp_predict expects a single hidden vector of width ",
                cfg_.d);
    NoGradScope no_grad;
    Tensor row = Tensor::from_values({1, cfg_.d},
                                     {h.values().begin(), h.values().end()});
    Tensor probs = softmax(off_ramp_logits(row, layer));
    return {probs.values().begin(), probs.values().end()};
}

ArResult Model::decode_ar_reference(const EncoderStates& enc, int T) const {
    NAREX_CHECK(T >= 1 && T <= cfg_.T_max, "decode length ", T,
                " outside [1, ", cfg_.T_max, "]");
    NoGradScope no_grad;
    ArResult res;
    FlopScope scope(res.flops);
    std::vector<int> prefix{Vocabulary::kBos};
    for (int step = 0; step < T; ++step) {
        const int s = static_cast<int>(prefix.size());
        Tensor x = embed_sequence(prefix);
        const std::vector<int> all = identity_indices(s);
        for (int l = 1; l <= cfg_.L; ++l) {
            x = run_decoder_layer(l, x, all, enc.s, /*causal=*/true, nullptr);
        }
        ++res.decoder_passes;
        Tensor logits = off_ramp_logits(slice_rows(x, s - 1, 1), cfg_.L);
        const int next = argmax_row(logits);
        res.ids.push_back(next);
        prefix.push_back(next);
    }
    return res;
}

}  // namespace narex
