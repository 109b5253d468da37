#pragma once

#include <string>
#include <vector>

#include "stk/tensor.hpp"

namespace stk {

// Little-endian parameter container: magic "STKCKPT1", then per entry
// name, shape, and raw float64 values. Names must be unique.
void save_checkpoint(const std::vector<Parameter>& params, const std::string& path);

// Loads values into the given parameters, matching by name and shape.
// Throws validation_error on missing entries or shape drift.
void load_checkpoint(const std::vector<Parameter>& params, const std::string& path);

// Byte-level digest of parameter values, for frozen-weight assertions.
std::uint64_t parameter_digest(const std::vector<Parameter>& params);

}  // namespace stk
