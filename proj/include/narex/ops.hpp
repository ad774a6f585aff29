#pragma once

#include <span>
#include <vector>

#include "narex/autograd.hpp"
#include "narex/flops.hpp"
#include "narex/tensor.hpp"

namespace narex {

// Dense kernels with tape-recorded backwards. Shapes are 2-D unless noted;
// 1-D tensors are treated as a single row where that makes sense.

// [m x k] * [k x n] -> [m x n]; counts 2*m*k*n flops.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);            // same shape
Tensor add_row_bias(const Tensor& x, const Tensor& bias);  // bias [cols]
Tensor mul_scalar(const Tensor& x, real_t s);
Tensor gelu(const Tensor& x);  // exact erf form

// Softmax along the last axis. Subtract-max stabilized.
Tensor softmax(const Tensor& x);

// Row-wise layer norm over the last axis, then affine with gain/bias [cols].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  real_t epsilon = 1e-5);

// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// Sum over rows of weight[r] * -log softmax(logits[r])[target[r]].
Tensor cross_entropy_weighted(const Tensor& logits, std::span<const int> targets,
                              std::span<const real_t> weights);

// Table lookup [V x d] by ids -> [n x d]; backward scatter-adds into the table.
Tensor embedding_rows(const Tensor& table, std::span<const int> ids);

Tensor slice_rows(const Tensor& x, int start, int count);
Tensor slice_cols(const Tensor& x, int start, int count);
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Picks rows by index. Returns x itself when idx is the identity permutation.
Tensor gather_rows(const Tensor& x, std::span<const int> idx);
// Copy of `base` with base[idx[i]] replaced by rows[i]; untouched rows are
// bit-identical to base.
Tensor scatter_rows_update(const Tensor& base, std::span<const int> idx,
                           const Tensor& rows);
// Assembles [row_count x cols] from two disjoint indexed row sets.
Tensor merge_rows(int row_count, std::span<const int> idx_a, const Tensor& a,
                  std::span<const int> idx_b, const Tensor& b);

// Fills entries above the diagonal with a large negative constant (pre-softmax
// causal mask for the AR reference decoder).
Tensor causal_mask(const Tensor& scores);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor add_scalar(const Tensor& x, real_t s);
Tensor hadamard(const Tensor& a, const Tensor& b);

// Inverted dropout; identity when p == 0. Train-time only.
Tensor dropout(const Tensor& x, real_t p, Rng& rng);

}  // namespace narex
