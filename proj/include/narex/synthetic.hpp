#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "narex/common.hpp"

namespace narex {

enum class SyntheticTask { Copy, Reverse, Template };

SyntheticTask parse_synthetic_task(const std::string& name);

struct SyntheticPair {
    std::string src;
    std::string tgt;
};

// Deterministic paired data. Copy echoes the source, reverse flips the word
// order, and the template task fills one of three output sentence shapes
// (lengths 8, 11 and 15 words) selected by the place word near the end of the
// source line, so getting the output right requires reading distant source
// positions. Copy and reverse lines are 5-24 words long.
std::vector<SyntheticPair> make_synthetic(SyntheticTask task, int size,
                                          std::uint64_t seed);

void write_parallel(const std::vector<SyntheticPair>& pairs,
                    const std::string& src_path, const std::string& tgt_path);

}  // namespace narex
