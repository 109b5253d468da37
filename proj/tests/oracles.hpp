#pragma once

// Independent brute-force oracles used by the tests. These deliberately share
// no code with the library implementations they check.

#include <map>
#include <set>
#include <vector>

#include "stk/tkg.hpp"

namespace oracles {

// All bodies reachable by a time-decreasing walk from the object entity of
// any head fact of `head`, converted to chronological form (reversed with
// inverted relations), lengths 1..max_len. Facts restricted to [0, fact_end).
std::set<std::vector<int>> enumerate_walk_bodies(const stk::TemporalKG& kg,
                                                 std::int64_t fact_end, int head, int max_len);

// Exhaustive grounding counts for a chronological body path, with the head
// holding when some fact (x0, head, xL) occurs after the body's last hop.
struct Counts {
  long long body_support = 0;
  long long support = 0;
};
Counts count_groundings_bruteforce(const stk::TemporalKG& kg, std::int64_t fact_end, int head,
                                   const std::vector<int>& body);

// Every [sequence, total log-probability] of exactly `len` tokens under a
// per-position log-probability table, sorted by (log-prob desc, tokens asc).
std::vector<std::pair<std::vector<int>, double>> enumerate_sequences(
    const std::vector<std::vector<double>>& step_log_probs, int len);

}  // namespace oracles
