#pragma once

#include <functional>
#include <vector>

#include "narex/tensor.hpp"

namespace narex {

// Reverse-mode tape. Ops append nodes in execution order, so walking the tape
// backwards is a reverse topological traversal.
class Tape {
  public:
    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    void run_backward();
    void clear() { nodes_.clear(); }

  private:
    std::vector<std::function<void()>> nodes_;
};

Tape* active_tape();

// Installs a fresh tape for the lifetime of the scope (one training step).
class TapeScope {
  public:
    TapeScope();
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
    Tape& tape() { return tape_; }

  private:
    Tape tape_;
    Tape* prev_;
};

// Suspends recording; forwards inside the scope leave no tape nodes.
class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

  private:
    Tape* prev_;
};

// Seeds d(loss)/d(loss) = 1 and consumes the active tape. `loss` must be a
// scalar produced while the tape was recording.
void backward(const Tensor& loss);

}  // namespace narex
