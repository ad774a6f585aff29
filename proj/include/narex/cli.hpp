#pragma once

namespace narex {

// Full command-line front end: build-vocab, make-synthetic, pretrain,
// finetune, generate, evaluate, bench. Returns the process exit status:
// 0 on success, 1 on a contract/runtime failure, 2 on bad usage.
int run_cli(int argc, const char* const* argv);

}  // namespace narex
