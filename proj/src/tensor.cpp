#include "narex/tensor.hpp"

#include <cmath>
#include <sstream>

namespace narex {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        NAREX_CHECK(d > 0, "tensor dimensions must be positive, got shape ",
                    shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto s = std::make_shared<TensorStorage>();
    s->values.assign(shape_numel(shape), 0.0);
    s->shape = std::move(shape);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
}

Tensor Tensor::full(Shape shape, real_t value, bool requires_grad) {
    auto s = std::make_shared<TensorStorage>();
    s->values.assign(shape_numel(shape), value);
    s->shape = std::move(shape);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
}

Tensor Tensor::from_values(Shape shape, std::vector<real_t> values,
                           bool requires_grad) {
    NAREX_CHECK(shape_numel(shape) == values.size(),
                "value count ", values.size(), " does not match shape ",
                shape_str(shape));
    auto s = std::make_shared<TensorStorage>();
    s->shape = std::move(shape);
    s->values = std::move(values);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
}

Tensor Tensor::randn(Shape shape, Rng& rng, real_t stddev, bool requires_grad) {
    auto t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

std::span<real_t> Tensor::grad() {
    if (storage_->grad.empty()) {
        storage_->grad.assign(storage_->values.size(), 0.0);
    }
    return storage_->grad;
}

void Tensor::zero_grad() {
    if (!storage_->grad.empty()) {
        storage_->grad.assign(storage_->values.size(), 0.0);
    }
}

bool Tensor::all_finite() const {
    for (real_t v : storage_->values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace narex
