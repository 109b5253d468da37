#pragma once

#include <cstdint>
#include <utility>

#include "stk/tkg.hpp"

namespace stk {

// Deterministic toy TKG: the object of every (s, r) pair is the fixed
// function (s + offset_r) mod |E|, so both query directions are functions of
// (subject, relation) and recur across timestamps. Split 8:1:1 by timestamp.
struct SyntheticConfig {
  int n_entities = 20;
  int n_relations = 5;
  int n_times = 48;
  int facts_per_time = 6;
  std::uint64_t seed = 0;
};

std::pair<TemporalKG, DatasetSplit> make_synthetic_dataset(const SyntheticConfig& config);

}  // namespace stk
