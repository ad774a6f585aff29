#include "narex/adam.hpp"

#include <cmath>

namespace narex {

void AdamState::init(const std::vector<Tensor>& params) {
    NAREX_CHECK(!initialized(), "AdamState::init called twice");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor& p : params) {
        NAREX_CHECK(p.defined(), "AdamState::init: undefined parameter");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamState::step(std::vector<Tensor>& params) {
    NAREX_CHECK(initialized(), "AdamState::step before init");
    NAREX_CHECK(params.size() == m_.size(), "AdamState::step: got ",
                params.size(), " parameters, state holds ", m_.size());
    ++step_;
    const real_t bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<real_t>(step_));
    const real_t bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<real_t>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        NAREX_CHECK(p.numel() == m_[i].size(),
                    "AdamState::step: parameter ", i, " changed size");
        auto vals = p.values();
        auto& m = m_[i];
        auto& v = v_[i];
        // A parameter untouched this step keeps grad unallocated; its update
        // still runs with g = 0 so the moments decay consistently.
        const bool has_g = p.has_grad();
        const auto g = p.grad_view();
        for (std::size_t j = 0; j < m.size(); ++j) {
            const real_t gj = has_g ? g[j] : 0.0;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            const real_t mhat = m[j] / bc1;
            const real_t vhat = v[j] / bc2;
            vals[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

}  // namespace narex
