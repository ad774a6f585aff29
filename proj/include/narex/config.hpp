#pragma once

#include <cstdint>
#include <string>

#include "narex/model.hpp"
#include "narex/pretrain.hpp"

namespace narex {

struct TrainingBlock {
    int steps = 0;
    real_t lr = 2e-4;
    int batch = 8;
    std::uint64_t seed = 0;
    int k = 10;  // exit assignments per sequence
};

struct DecodingBlock {
    std::string mode = "hard";  // ar | nar | hard | soft
    real_t delta = 0.5;
    int length = 16;
};

// File references; relative paths resolve against the config file's folder.
struct DataBlock {
    std::string vocab;
    std::string corpus;
    std::string src;
    std::string tgt;
};

struct RunConfig {
    ModelConfig model;  // V stays 0 until a vocabulary is loaded
    CorruptionConfig corruption;
    TrainingBlock training;
    DecodingBlock decoding;
    DataBlock data;
};

// Sectioned key-value text:
//
//   [model]
//   layers = 4
//   width = 64
//   ...
//
// '#' starts a comment. Unknown sections or keys, duplicate keys, a missing
// [training] seed, or a referenced file that does not exist all fail with the
// offending line.
RunConfig load_run_config(const std::string& path);

}  // namespace narex
