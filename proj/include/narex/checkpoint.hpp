#pragma once

#include <string>

#include "narex/model.hpp"

namespace narex {

// Self-describing binary container: magic, format version, the ModelConfig as
// key-value pairs, then named parameter blobs (name, dtype, shape, raw
// float64). Round trips are bitwise.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace narex
