#pragma once

#include <cstdint>
#include <vector>

#include "narex/tensor.hpp"

namespace narex {

struct AdamConfig {
    real_t lr = 2e-4;
    real_t beta1 = 0.9;
    real_t beta2 = 0.999;
    real_t epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are indexed in step order of the
// parameter list handed to init(); the same list must be passed to step().
class AdamState {
  public:
    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

    void init(const std::vector<Tensor>& params);
    bool initialized() const { return !m_.empty(); }
    void step(std::vector<Tensor>& params);

    std::int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(real_t lr) { cfg_.lr = lr; }

  private:
    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<std::vector<real_t>> m_;
    std::vector<std::vector<real_t>> v_;
};

}  // namespace narex
