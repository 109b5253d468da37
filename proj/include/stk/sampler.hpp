#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "stk/tkg.hpp"

namespace stk {

struct SamplerConfig {
  int fanout = 10;
  int depth = 2;    // recursion depth m
  int window = 16;  // most recent snapshots with root activity retained
};

struct SampledSnapshot {
  int time = 0;
  std::vector<Quadruple> edges;
  std::vector<int> nodes;  // sampled node set, ascending
};

struct SubgraphSequence {
  int subject = 0;
  int relation = 0;
  int query_time = 0;
  SamplerConfig config;
  std::vector<SampledSnapshot> snapshots;  // chronological

  bool empty() const { return snapshots.empty(); }
};

// Recursive fixed-fan-out neighborhood sampling around the query subject over
// the `window` most recent snapshots preceding query_time in which the root
// has incident edges. Uniform without replacement, reproducible from `seed`.
// `history_end` bounds the visible facts (exclusive normalized time); pass
// query_time for the standard cutoff.
SubgraphSequence sample_history(const TemporalKG& kg, int subject, int relation,
                                int query_time, const SamplerConfig& config,
                                std::uint64_t seed, int history_end = -1);

// One block per snapshot, for human inspection.
void dump_subgraphs(const SubgraphSequence& seq, const TemporalKG& kg, std::ostream& os);

}  // namespace stk
