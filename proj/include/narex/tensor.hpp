#pragma once

#include <memory>
#include <span>
#include <vector>

#include "narex/common.hpp"
#include "narex/rng.hpp"

namespace narex {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorStorage {
    Shape shape;
    std::vector<real_t> values;
    std::vector<real_t> grad;  // empty until first accumulation
    bool requires_grad = false;
};

// Value-semantics handle over shared storage. Values are immutable once an op
// has produced them; only grad accumulates afterwards.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, real_t value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<real_t> values,
                              bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, real_t stddev,
                        bool requires_grad = false);

    bool defined() const { return storage_ != nullptr; }
    const Shape& shape() const { return storage_->shape; }
    int ndim() const { return static_cast<int>(storage_->shape.size()); }
    int dim(int i) const { return storage_->shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return storage_->values.size(); }

    // 2-D conveniences.
    int rows() const { return dim(0); }
    int cols() const { return dim(ndim() - 1); }

    std::span<real_t> values() { return storage_->values; }
    std::span<const real_t> values() const { return storage_->values; }
    real_t value_at(int r, int c) const {
        return storage_->values[static_cast<std::size_t>(r) * cols() + c];
    }

    real_t item() const {
        NAREX_CHECK(numel() == 1, "item() on tensor of shape ", shape_str(shape()));
        return storage_->values[0];
    }

    bool requires_grad() const { return storage_->requires_grad; }
    void set_requires_grad(bool v) { storage_->requires_grad = v; }

    bool has_grad() const { return !storage_->grad.empty(); }
    // Allocates zeros on first touch.
    std::span<real_t> grad();
    std::span<const real_t> grad_view() const { return storage_->grad; }
    void zero_grad();
    void drop_grad() { storage_->grad.clear(); }

    std::shared_ptr<TensorStorage> storage() const { return storage_; }
    bool same_storage(const Tensor& other) const {
        return storage_ == other.storage_;
    }

    bool all_finite() const;

  private:
    explicit Tensor(std::shared_ptr<TensorStorage> s) : storage_(std::move(s)) {}
    std::shared_ptr<TensorStorage> storage_;
};

}  // namespace narex
