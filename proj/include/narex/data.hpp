#pragma once

#include <string>
#include <vector>

#include "narex/decode.hpp"
#include "narex/vocab.hpp"

namespace narex {

// Whole file as lines, newline stripped. Fails if the file cannot be read.
std::vector<std::string> read_lines(const std::string& path);

// Aligned source/target text files -> tokenized pairs. Line counts must
// match; blank lines are rejected with their line number.
std::vector<FinetunePair> load_parallel(const std::string& src_path,
                                        const std::string& tgt_path,
                                        const Vocabulary& vocab);

}  // namespace narex
