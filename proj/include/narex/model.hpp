#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "narex/flops.hpp"
#include "narex/ops.hpp"
#include "narex/rng.hpp"
#include "narex/tensor.hpp"

namespace narex {

struct ModelConfig {
    int L = 6;        // encoder and decoder layer count
    int d = 256;      // hidden width
    int heads = 8;    // attention heads
    int d_ff = 1024;  // feed-forward width
    int T_max = 64;   // maximum decoder length and source length
    int V = 0;        // vocabulary size
    bool share_off_ramps = true;
    real_t dropout = 0.0;

    void validate() const;
};

struct LayerNormParams {
    Tensor gain, bias;
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnParams {
    Tensor w1, b1, w2, b2;
};

struct EncoderLayerParams {
    LayerNormParams ln1;
    AttentionParams attn;
    LayerNormParams ln2;
    FfnParams ffn;
};

struct DecoderLayerParams {
    LayerNormParams ln1;
    AttentionParams self_attn;
    LayerNormParams ln2;
    AttentionParams cross_attn;
    LayerNormParams ln3;
    FfnParams ffn;
};

struct OffRampParams {
    Tensor w;  // [d x V]
    Tensor b;  // [V]
};

struct EncoderStates {
    Tensor s;  // [n x d]
    int n = 0;
    bool truncated = false;  // input was longer than T_max and got cut
};

// Per-position exit layers, entries in [1, L].
struct ExitAssignment {
    std::vector<int> exits;

    static ExitAssignment uniform(int T, int layer) {
        return ExitAssignment{std::vector<int>(static_cast<std::size_t>(T), layer)};
    }
    int size() const { return static_cast<int>(exits.size()); }
};

struct DecoderTrace {
    // layer_states[0] is the decoder input h^0; layer_states[l] the stream
    // after layer l. Rows past their exit layer are bit-identical copies.
    std::vector<Tensor> layer_states;
    Tensor logits;  // [T x V], row t from the off-ramp at layer exits[t]
    std::vector<int> exits;
};

struct ArResult {
    std::vector<int> ids;  // length T, greedy, untruncated
    FlopCounters flops;
    int decoder_passes = 0;
};

class Model {
  public:
    Model(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    // Stable registration order; checkpoint and optimizer both key off this.
    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;

    EncoderStates encode(std::span<const int> src_ids,
                         Rng* dropout_rng = nullptr) const;

    // T copies of Embed(MASK) plus position embeddings: the NAR decoder input.
    Tensor decoder_input(int T) const;
    Tensor embed_tokens(std::span<const int> ids) const;
    Tensor embed_sequence(std::span<const int> ids) const;  // token + position

    // One decoder layer over the current stream. Rows not in active_idx are
    // returned bit-identical and participate only as self-attention keys and
    // values (their key/value projections are tagged DecoderFrozenKv).
    Tensor run_decoder_layer(int layer, const Tensor& states,
                             std::span<const int> active_idx,
                             const Tensor& enc_s, bool causal = false,
                             Rng* dropout_rng = nullptr) const;

    DecoderTrace decode_with_exits(const EncoderStates& enc, int T,
                                   const ExitAssignment& exits,
                                   Rng* dropout_rng = nullptr) const;

    // rows [n x d] -> logits [n x V] through off-ramp `layer` (1-based).
    Tensor off_ramp_logits(const Tensor& rows, int layer) const;
    // Single hidden vector -> probability distribution over V.
    std::vector<real_t> off_ramp_predict(const Tensor& h, int layer) const;

    // Greedy left-to-right benchmark mode: causal self-attention, full prefix
    // recomputation each step, last-layer classifier. Cost counters cover the
    // whole loop; quality is not a contract here.
    ArResult decode_ar_reference(const EncoderStates& enc, int T) const;

    const Tensor& token_embedding() const { return tok_embed_; }
    const Tensor& position_embedding() const { return pos_embed_; }
    const Tensor& soft_exit_w() const { return soft_exit_w_; }
    const Tensor& soft_exit_b() const { return soft_exit_b_; }
    const OffRampParams& off_ramp(int layer) const;
    const DecoderLayerParams& decoder_layer(int layer) const;  // 1-based

  private:
    Tensor encoder_layer_forward(const EncoderLayerParams& p, const Tensor& x,
                                 Rng* dropout_rng) const;

    ModelConfig cfg_;
    Tensor tok_embed_;  // [V x d]
    Tensor pos_embed_;  // [T_max x d]
    std::vector<EncoderLayerParams> enc_layers_;
    LayerNormParams enc_final_ln_;
    std::vector<DecoderLayerParams> dec_layers_;
    std::vector<OffRampParams> off_ramps_;  // size 1 when shared, else L
    Tensor soft_exit_w_;  // [2d x d]
    Tensor soft_exit_b_;  // [d]
};

}  // namespace narex
