#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ccr/diff/params.hpp"

namespace ccr::diff {

// Single-file container: one compact JSON header line (names, shapes, format
// version, caller metadata) terminated by '\n', then the tensors' values as
// little-endian 64-bit floats in header order.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& meta);

struct Checkpoint {
  ParamStore params;
  // Caller metadata as passed to save_checkpoint.
  std::string meta_json;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ccr::diff
