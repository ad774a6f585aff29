#include "narex/autograd.hpp"

namespace narex {

namespace {
thread_local Tape* g_tape = nullptr;
}

Tape* active_tape() { return g_tape; }

void Tape::run_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
    }
    nodes_.clear();
}

TapeScope::TapeScope() : prev_(g_tape) { g_tape = &tape_; }
TapeScope::~TapeScope() { g_tape = prev_; }

NoGradScope::NoGradScope() : prev_(g_tape) { g_tape = nullptr; }
NoGradScope::~NoGradScope() { g_tape = prev_; }

void backward(const Tensor& loss) {
    NAREX_CHECK(loss.defined(), "backward: undefined loss tensor");
    NAREX_CHECK(loss.numel() == 1, "backward requires a scalar loss, got shape ",
                shape_str(loss.shape()));
    NAREX_CHECK(g_tape != nullptr && !g_tape->empty(),
                "backward: loss was not produced on an active tape");
    loss.storage()->grad.assign(1, 1.0);
    g_tape->run_backward();
}

}  // namespace narex
