#include "narex/ops.hpp"

#include <algorithm>
#include <cmath>

namespace narex {

namespace {

constexpr real_t kMaskValue = -1e30;

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (active_tape() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void record(std::function<void()> fn) { active_tape()->record(std::move(fn)); }

// Output grad of a node that never influenced the loss stays unallocated.
bool has_out_grad(const Tensor& out) { return out.has_grad(); }

void check_2d(const Tensor& t, const char* what) {
    NAREX_CHECK(t.defined() && t.ndim() == 2, what, ": expected a 2-D tensor");
}

int row_width(const Tensor& t) { return t.cols(); }
int row_count_flat(const Tensor& t) {
    return static_cast<int>(t.numel()) / t.cols();
}

// C += A * B with C zeroed by the caller. ikj order keeps the inner loop
// contiguous in both B and C.
void kernel_matmul(const real_t* a, const real_t* b, real_t* c, int m, int k,
                   int n) {
    for (int i = 0; i < m; ++i) {
        const real_t* a_row = a + static_cast<std::size_t>(i) * k;
        real_t* c_row = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const real_t av = a_row[p];
            const real_t* b_row = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                c_row[j] += av * b_row[j];
            }
        }
    }
}

// dA[i,p] += sum_j dC[i,j] * B[p,j]
void kernel_matmul_grad_a(const real_t* dc, const real_t* b, real_t* da, int m,
                          int k, int n) {
    for (int i = 0; i < m; ++i) {
        const real_t* dc_row = dc + static_cast<std::size_t>(i) * n;
        real_t* da_row = da + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const real_t* b_row = b + static_cast<std::size_t>(p) * n;
            real_t acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += dc_row[j] * b_row[j];
            }
            da_row[p] += acc;
        }
    }
}

// dB[p,j] += sum_i A[i,p] * dC[i,j]
void kernel_matmul_grad_b(const real_t* a, const real_t* dc, real_t* db, int m,
                          int k, int n) {
    for (int i = 0; i < m; ++i) {
        const real_t* a_row = a + static_cast<std::size_t>(i) * k;
        const real_t* dc_row = dc + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const real_t av = a_row[p];
            real_t* db_row = db + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                db_row[j] += av * dc_row[j];
            }
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    NAREX_CHECK(b.rows() == k, "matmul: inner dimensions disagree, ",
                shape_str(a.shape()), " x ", shape_str(b.shape()));

    Tensor out = Tensor::zeros({m, n});
    kernel_matmul(a.values().data(), b.values().data(), out.values().data(), m,
                  k, n);
    count_flops(2ull * m * k * n);

    if (tracking({&a, &b})) {
        out.set_requires_grad(true);
        record([a, b, out, m, k, n]() {
            if (!has_out_grad(out)) return;
            const real_t* dc = out.grad_view().data();
            if (a.requires_grad()) {
                Tensor ga = a;
                kernel_matmul_grad_a(dc, b.values().data(), ga.grad().data(), m,
                                     k, n);
            }
            if (b.requires_grad()) {
                Tensor gb = b;
                kernel_matmul_grad_b(a.values().data(), dc, gb.grad().data(), m,
                                     k, n);
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& x) {
    check_2d(x, "transpose");
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({n, m});
    const auto xv = x.values();
    auto ov = out.values();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            ov[static_cast<std::size_t>(j) * m + i] =
                xv[static_cast<std::size_t>(i) * n + j];
        }
    }
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, m, n]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    g[static_cast<std::size_t>(i) * n + j] +=
                        og[static_cast<std::size_t>(j) * m + i];
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    NAREX_CHECK(a.shape() == b.shape(), "add: shape mismatch ",
                shape_str(a.shape()), " vs ", shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    if (tracking({&a, &b})) {
        out.set_requires_grad(true);
        record([a, b, out]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            if (a.requires_grad()) {
                Tensor ga = a;
                auto g = ga.grad();
                for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
            }
            if (b.requires_grad()) {
                Tensor gb = b;
                auto g = gb.grad();
                for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
            }
        });
    }
    return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    const int n = row_width(x);
    NAREX_CHECK(static_cast<int>(bias.numel()) == n,
                "add_row_bias: bias length ", bias.numel(),
                " does not match row width ", n);
    const int rows = row_count_flat(x);
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values(), bv = bias.values();
    auto ov = out.values();
    for (int r = 0; r < rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * n;
        for (int j = 0; j < n; ++j) ov[off + j] = xv[off + j] + bv[j];
    }
    if (tracking({&x, &bias})) {
        out.set_requires_grad(true);
        record([x, bias, out, rows, n]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            if (x.requires_grad()) {
                Tensor gx = x;
                auto g = gx.grad();
                for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
            }
            if (bias.requires_grad()) {
                Tensor gb = bias;
                auto g = gb.grad();
                for (int r = 0; r < rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n;
                    for (int j = 0; j < n; ++j) g[j] += og[off + j];
                }
            }
        });
    }
    return out;
}

Tensor mul_scalar(const Tensor& x, real_t s) {
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * s;
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, s]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * s;
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& x, real_t s) {
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] + s;
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
        });
    }
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    NAREX_CHECK(a.shape() == b.shape(), "hadamard: shape mismatch ",
                shape_str(a.shape()), " vs ", shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    if (tracking({&a, &b})) {
        out.set_requires_grad(true);
        record([a, b, out]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            if (a.requires_grad()) {
                Tensor ga = a;
                auto g = ga.grad();
                const auto bv2 = b.values();
                for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * bv2[i];
            }
            if (b.requires_grad()) {
                Tensor gb = b;
                auto g = gb.grad();
                const auto av2 = a.values();
                for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * av2[i];
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    constexpr real_t inv_sqrt2 = 0.7071067811865475244;
    for (std::size_t i = 0; i < ov.size(); ++i) {
        ov[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
    }
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            const auto xv2 = x.values();
            constexpr real_t inv_sqrt2b = 0.7071067811865475244;
            constexpr real_t inv_sqrt2pi = 0.3989422804014326779;
            for (std::size_t i = 0; i < og.size(); ++i) {
                const real_t v = xv2[i];
                const real_t cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2b));
                const real_t pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                g[i] += og[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& x) {
    const int n = row_width(x);
    const int rows = row_count_flat(x);
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (int r = 0; r < rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * n;
        real_t mx = xv[off];
        for (int j = 1; j < n; ++j) mx = std::max(mx, xv[off + j]);
        real_t denom = 0.0;
        for (int j = 0; j < n; ++j) {
            const real_t e = std::exp(xv[off + j] - mx);
            ov[off + j] = e;
            denom += e;
        }
        const real_t inv = 1.0 / denom;
        for (int j = 0; j < n; ++j) ov[off + j] *= inv;
    }
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, rows, n]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            const auto yv = out.values();
            for (int r = 0; r < rows; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * n;
                real_t dot = 0.0;
                for (int j = 0; j < n; ++j) dot += og[off + j] * yv[off + j];
                for (int j = 0; j < n; ++j) {
                    g[off + j] += yv[off + j] * (og[off + j] - dot);
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  real_t epsilon) {
    NAREX_CHECK(epsilon > 0.0, "layer_norm: epsilon must be positive");
    const int n = row_width(x);
    NAREX_CHECK(static_cast<int>(gain.numel()) == n &&
                    static_cast<int>(bias.numel()) == n,
                "layer_norm: gain/bias length must equal row width ", n);
    const int rows = row_count_flat(x);
    Tensor out = Tensor::zeros(x.shape());
    // Cached per-row statistics for the backward pass.
    auto xhat = std::make_shared<std::vector<real_t>>(x.numel());
    auto inv_sigma = std::make_shared<std::vector<real_t>>(rows);

    const auto xv = x.values();
    const auto gv = gain.values(), bv = bias.values();
    auto ov = out.values();
    for (int r = 0; r < rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * n;
        real_t mu = 0.0;
        for (int j = 0; j < n; ++j) mu += xv[off + j];
        mu /= n;
        real_t var = 0.0;
        for (int j = 0; j < n; ++j) {
            const real_t d = xv[off + j] - mu;
            var += d * d;
        }
        var /= n;
        const real_t inv = 1.0 / std::sqrt(var + epsilon);
        (*inv_sigma)[r] = inv;
        for (int j = 0; j < n; ++j) {
            const real_t h = (xv[off + j] - mu) * inv;
            (*xhat)[off + j] = h;
            ov[off + j] = gv[j] * h + bv[j];
        }
    }
    if (tracking({&x, &gain, &bias})) {
        out.set_requires_grad(true);
        record([x, gain, bias, out, xhat, inv_sigma, rows, n]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            const auto gv2 = gain.values();
            if (x.requires_grad()) {
                Tensor gx = x;
                auto g = gx.grad();
                for (int r = 0; r < rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n;
                    real_t mean_dy = 0.0, mean_dy_xhat = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const real_t dy = og[off + j] * gv2[j];
                        mean_dy += dy;
                        mean_dy_xhat += dy * (*xhat)[off + j];
                    }
                    mean_dy /= n;
                    mean_dy_xhat /= n;
                    const real_t inv = (*inv_sigma)[r];
                    for (int j = 0; j < n; ++j) {
                        const real_t dy = og[off + j] * gv2[j];
                        g[off + j] +=
                            inv * (dy - mean_dy - (*xhat)[off + j] * mean_dy_xhat);
                    }
                }
            }
            if (gain.requires_grad()) {
                Tensor gg = gain;
                auto g = gg.grad();
                for (int r = 0; r < rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n;
                    for (int j = 0; j < n; ++j) {
                        g[j] += og[off + j] * (*xhat)[off + j];
                    }
                }
            }
            if (bias.requires_grad()) {
                Tensor gb = bias;
                auto g = gb.grad();
                for (int r = 0; r < rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n;
                    for (int j = 0; j < n; ++j) g[j] += og[off + j];
                }
            }
        });
    }
    return out;
}

namespace {

// Shared core for the two cross-entropy flavours. weights[r] scales row r's
// negative log-likelihood; the result is the weighted sum.
Tensor cross_entropy_impl(const Tensor& logits, std::span<const int> targets,
                          std::vector<real_t> weights) {
    check_2d(logits, "cross_entropy logits");
    const int n = logits.rows(), v = logits.cols();
    NAREX_CHECK(static_cast<int>(targets.size()) == n,
                "cross_entropy: ", targets.size(), " targets for ", n, " rows");
    for (int r = 0; r < n; ++r) {
        NAREX_CHECK(targets[r] >= 0 && targets[r] < v,
                    "cross_entropy: target id ", targets[r],
                    " out of range [0, ", v, ") at row ", r);
    }

    auto probs = std::make_shared<std::vector<real_t>>(logits.numel());
    const auto zv = logits.values();
    real_t loss = 0.0;
    for (int r = 0; r < n; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * v;
        real_t mx = zv[off];
        for (int j = 1; j < v; ++j) mx = std::max(mx, zv[off + j]);
        real_t denom = 0.0;
        for (int j = 0; j < v; ++j) {
            const real_t e = std::exp(zv[off + j] - mx);
            (*probs)[off + j] = e;
            denom += e;
        }
        const real_t inv = 1.0 / denom;
        for (int j = 0; j < v; ++j) (*probs)[off + j] *= inv;
        const real_t lse = std::log(denom) + mx;
        loss += weights[r] * (lse - zv[off + targets[r]]);
    }
    Tensor out = Tensor::from_values({1}, {loss});

    if (tracking({&logits})) {
        out.set_requires_grad(true);
        std::vector<int> tgt(targets.begin(), targets.end());
        auto w = std::make_shared<std::vector<real_t>>(std::move(weights));
        record([logits, out, probs, tgt, w, n, v]() {
            if (!has_out_grad(out)) return;
            const real_t dl = out.grad_view()[0];
            Tensor gz = logits;
            auto g = gz.grad();
            for (int r = 0; r < n; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * v;
                const real_t wr = dl * (*w)[r];
                for (int j = 0; j < v; ++j) {
                    g[off + j] += wr * (*probs)[off + j];
                }
                g[off + tgt[r]] -= wr;
            }
        });
    }
    return out;
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    const int n = logits.rows();
    std::vector<real_t> w(static_cast<std::size_t>(n), 1.0 / n);
    return cross_entropy_impl(logits, targets, std::move(w));
}

Tensor cross_entropy_weighted(const Tensor& logits, std::span<const int> targets,
                              std::span<const real_t> weights) {
    NAREX_CHECK(weights.size() == static_cast<std::size_t>(logits.rows()),
                "cross_entropy_weighted: weight count mismatch");
    return cross_entropy_impl(logits, targets,
                              std::vector<real_t>(weights.begin(), weights.end()));
}

Tensor embedding_rows(const Tensor& table, std::span<const int> ids) {
    check_2d(table, "embedding table");
    const int v = table.rows(), d = table.cols();
    const int n = static_cast<int>(ids.size());
    NAREX_CHECK(n > 0, "embedding_rows: empty id list");
    Tensor out = Tensor::zeros({n, d});
    const auto tv = table.values();
    auto ov = out.values();
    for (int r = 0; r < n; ++r) {
        NAREX_CHECK(ids[r] >= 0 && ids[r] < v, "embedding_rows: id ", ids[r],
                    " out of range [0, ", v, ")");
        std::copy_n(tv.begin() + static_cast<std::size_t>(ids[r]) * d, d,
                    ov.begin() + static_cast<std::size_t>(r) * d);
    }
    if (tracking({&table})) {
        out.set_requires_grad(true);
        std::vector<int> idv(ids.begin(), ids.end());
        record([table, out, idv, d]() {
            if (!has_out_grad(out)) return;
            Tensor gt = table;
            auto g = gt.grad();
            const auto og = out.grad_view();
            for (std::size_t r = 0; r < idv.size(); ++r) {
                const std::size_t src = r * d;
                const std::size_t dst = static_cast<std::size_t>(idv[r]) * d;
                for (int j = 0; j < d; ++j) g[dst + j] += og[src + j];
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& x, int start, int count) {
    check_2d(x, "slice_rows");
    NAREX_CHECK(start >= 0 && count > 0 && start + count <= x.rows(),
                "slice_rows: range [", start, ", ", start + count,
                ") outside ", x.rows(), " rows");
    const int d = x.cols();
    Tensor out = Tensor::zeros({count, d});
    std::copy_n(x.values().begin() + static_cast<std::size_t>(start) * d,
                static_cast<std::size_t>(count) * d, out.values().begin());
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, start, count, d]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (std::size_t i = 0; i < static_cast<std::size_t>(count) * d; ++i) {
                g[static_cast<std::size_t>(start) * d + i] += og[i];
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int start, int count) {
    check_2d(x, "slice_cols");
    NAREX_CHECK(start >= 0 && count > 0 && start + count <= x.cols(),
                "slice_cols: range [", start, ", ", start + count,
                ") outside ", x.cols(), " cols");
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({m, count});
    const auto xv = x.values();
    auto ov = out.values();
    for (int r = 0; r < m; ++r) {
        std::copy_n(xv.begin() + static_cast<std::size_t>(r) * n + start, count,
                    ov.begin() + static_cast<std::size_t>(r) * count);
    }
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, start, count, m, n]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (int r = 0; r < m; ++r) {
                for (int j = 0; j < count; ++j) {
                    g[static_cast<std::size_t>(r) * n + start + j] +=
                        og[static_cast<std::size_t>(r) * count + j];
                }
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_2d(a, "concat_cols lhs");
    check_2d(b, "concat_cols rhs");
    NAREX_CHECK(a.rows() == b.rows(), "concat_cols: row counts differ, ",
                a.rows(), " vs ", b.rows());
    const int m = a.rows(), na = a.cols(), nb = b.cols();
    Tensor out = Tensor::zeros({m, na + nb});
    const auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (int r = 0; r < m; ++r) {
        std::copy_n(av.begin() + static_cast<std::size_t>(r) * na, na,
                    ov.begin() + static_cast<std::size_t>(r) * (na + nb));
        std::copy_n(bv.begin() + static_cast<std::size_t>(r) * nb, nb,
                    ov.begin() + static_cast<std::size_t>(r) * (na + nb) + na);
    }
    if (tracking({&a, &b})) {
        out.set_requires_grad(true);
        record([a, b, out, m, na, nb]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            if (a.requires_grad()) {
                Tensor ga = a;
                auto g = ga.grad();
                for (int r = 0; r < m; ++r) {
                    for (int j = 0; j < na; ++j) {
                        g[static_cast<std::size_t>(r) * na + j] +=
                            og[static_cast<std::size_t>(r) * (na + nb) + j];
                    }
                }
            }
            if (b.requires_grad()) {
                Tensor gb = b;
                auto g = gb.grad();
                for (int r = 0; r < m; ++r) {
                    for (int j = 0; j < nb; ++j) {
                        g[static_cast<std::size_t>(r) * nb + j] +=
                            og[static_cast<std::size_t>(r) * (na + nb) + na + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const int> idx) {
    check_2d(x, "gather_rows");
    const int m = x.rows(), d = x.cols();
    if (static_cast<int>(idx.size()) == m) {
        bool identity = true;
        for (int i = 0; i < m; ++i) {
            if (idx[i] != i) {
                identity = false;
                break;
            }
        }
        if (identity) return x;
    }
    const int n = static_cast<int>(idx.size());
    NAREX_CHECK(n > 0, "gather_rows: empty index list");
    Tensor out = Tensor::zeros({n, d});
    const auto xv = x.values();
    auto ov = out.values();
    for (int r = 0; r < n; ++r) {
        NAREX_CHECK(idx[r] >= 0 && idx[r] < m, "gather_rows: index ", idx[r],
                    " out of range [0, ", m, ")");
        std::copy_n(xv.begin() + static_cast<std::size_t>(idx[r]) * d, d,
                    ov.begin() + static_cast<std::size_t>(r) * d);
    }
    if (tracking({&x})) {
        out.set_requires_grad(true);
        std::vector<int> idv(idx.begin(), idx.end());
        record([x, out, idv, d]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (std::size_t r = 0; r < idv.size(); ++r) {
                for (int j = 0; j < d; ++j) {
                    g[static_cast<std::size_t>(idv[r]) * d + j] += og[r * d + j];
                }
            }
        });
    }
    return out;
}

Tensor scatter_rows_update(const Tensor& base, std::span<const int> idx,
                           const Tensor& rows) {
    check_2d(base, "scatter_rows_update base");
    check_2d(rows, "scatter_rows_update rows");
    const int m = base.rows(), d = base.cols();
    NAREX_CHECK(rows.cols() == d && rows.rows() == static_cast<int>(idx.size()),
                "scatter_rows_update: rows shape ", shape_str(rows.shape()),
                " does not match ", idx.size(), " indices of width ", d);
    Tensor out = Tensor::zeros({m, d});
    auto ov = out.values();
    std::copy(base.values().begin(), base.values().end(), ov.begin());
    const auto rv = rows.values();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        NAREX_CHECK(idx[r] >= 0 && idx[r] < m, "scatter_rows_update: index ",
                    idx[r], " out of range [0, ", m, ")");
        std::copy_n(rv.begin() + r * d, d,
                    ov.begin() + static_cast<std::size_t>(idx[r]) * d);
    }
    if (tracking({&base, &rows})) {
        out.set_requires_grad(true);
        std::vector<int> idv(idx.begin(), idx.end());
        record([base, rows, out, idv, m, d]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            std::vector<bool> replaced(static_cast<std::size_t>(m), false);
            for (int i : idv) replaced[static_cast<std::size_t>(i)] = true;
            if (base.requires_grad()) {
                Tensor gb = base;
                auto g = gb.grad();
                for (int r = 0; r < m; ++r) {
                    if (replaced[static_cast<std::size_t>(r)]) continue;
                    for (int j = 0; j < d; ++j) {
                        g[static_cast<std::size_t>(r) * d + j] +=
                            og[static_cast<std::size_t>(r) * d + j];
                    }
                }
            }
            if (rows.requires_grad()) {
                Tensor gr = rows;
                auto g = gr.grad();
                for (std::size_t r = 0; r < idv.size(); ++r) {
                    for (int j = 0; j < d; ++j) {
                        g[r * d + j] +=
                            og[static_cast<std::size_t>(idv[r]) * d + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor merge_rows(int row_count, std::span<const int> idx_a, const Tensor& a,
                  std::span<const int> idx_b, const Tensor& b) {
    check_2d(a, "merge_rows a");
    const int d = a.cols();
    NAREX_CHECK(static_cast<int>(idx_a.size()) == a.rows(),
                "merge_rows: a has ", a.rows(), " rows for ", idx_a.size(),
                " indices");
    NAREX_CHECK(idx_b.empty() ||
                    (b.defined() && b.cols() == d &&
                     static_cast<int>(idx_b.size()) == b.rows()),
                "merge_rows: b rows/indices mismatch");
    NAREX_CHECK(static_cast<int>(idx_a.size() + idx_b.size()) == row_count,
                "merge_rows: indices cover ", idx_a.size() + idx_b.size(),
                " rows, expected ", row_count);
    Tensor out = Tensor::zeros({row_count, d});
    auto ov = out.values();
    const auto av = a.values();
    for (std::size_t r = 0; r < idx_a.size(); ++r) {
        std::copy_n(av.begin() + r * d, d,
                    ov.begin() + static_cast<std::size_t>(idx_a[r]) * d);
    }
    if (!idx_b.empty()) {
        const auto bv = b.values();
        for (std::size_t r = 0; r < idx_b.size(); ++r) {
            std::copy_n(bv.begin() + r * d, d,
                        ov.begin() + static_cast<std::size_t>(idx_b[r]) * d);
        }
    }
    const bool track = idx_b.empty() ? tracking({&a}) : tracking({&a, &b});
    if (track) {
        out.set_requires_grad(true);
        std::vector<int> ia(idx_a.begin(), idx_a.end());
        std::vector<int> ib(idx_b.begin(), idx_b.end());
        record([a, b, out, ia, ib, d]() {
            if (!has_out_grad(out)) return;
            const auto og = out.grad_view();
            if (a.requires_grad()) {
                Tensor ga = a;
                auto g = ga.grad();
                for (std::size_t r = 0; r < ia.size(); ++r) {
                    for (int j = 0; j < d; ++j) {
                        g[r * d + j] += og[static_cast<std::size_t>(ia[r]) * d + j];
                    }
                }
            }
            if (!ib.empty() && b.requires_grad()) {
                Tensor gb = b;
                auto g = gb.grad();
                for (std::size_t r = 0; r < ib.size(); ++r) {
                    for (int j = 0; j < d; ++j) {
                        g[r * d + j] += og[static_cast<std::size_t>(ib[r]) * d + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor causal_mask(const Tensor& scores) {
    check_2d(scores, "causal_mask");
    const int m = scores.rows(), n = scores.cols();
    Tensor out = Tensor::zeros({m, n});
    const auto xv = scores.values();
    auto ov = out.values();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            ov[static_cast<std::size_t>(i) * n + j] =
                j > i ? kMaskValue : xv[static_cast<std::size_t>(i) * n + j];
        }
    }
    if (tracking({&scores})) {
        out.set_requires_grad(true);
        record([scores, out, m, n]() {
            if (!has_out_grad(out)) return;
            Tensor gx = scores;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j <= std::min(i, n - 1); ++j) {
                    g[static_cast<std::size_t>(i) * n + j] +=
                        og[static_cast<std::size_t>(i) * n + j];
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    real_t acc = 0.0;
    for (real_t v : x.values()) acc += v;
    Tensor out = Tensor::from_values({1}, {acc});
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out]() {
            if (!has_out_grad(out)) return;
            const real_t dl = out.grad_view()[0];
            Tensor gx = x;
            auto g = gx.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dl;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    return mul_scalar(sum(x), 1.0 / static_cast<real_t>(x.numel()));
}

Tensor dropout(const Tensor& x, real_t p, Rng& rng) {
    NAREX_CHECK(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1), got ", p);
    if (p == 0.0) return x;
    const real_t keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<real_t>>(x.numel());
    for (auto& m : *mask) m = rng.uniform() < p ? 0.0 : 1.0 / keep;
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * (*mask)[i];
    if (tracking({&x})) {
        out.set_requires_grad(true);
        record([x, out, mask]() {
            if (!has_out_grad(out)) return;
            Tensor gx = x;
            auto g = gx.grad();
            const auto og = out.grad_view();
            for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * (*mask)[i];
        });
    }
    return out;
}

}  // namespace narex
