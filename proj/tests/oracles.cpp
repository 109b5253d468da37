#include "oracles.hpp"

#include <algorithm>
#include <functional>

namespace oracles {

using stk::Quadruple;
using stk::TemporalKG;

std::set<std::vector<int>> enumerate_walk_bodies(const TemporalKG& kg, std::int64_t fact_end,
                                                 int head, int max_len) {
  std::set<std::vector<int>> bodies;
  const int nr = kg.num_relations();
  auto invert = [&](int r) { return r < nr ? r + nr : r - nr; };

  // Depth-first over every time-decreasing walk, by brute force over the
  // full fact list at each step.
  std::function<void(int, int, std::vector<int>&)> walk = [&](int node, int bound,
                                                              std::vector<int>& path) {
    if (static_cast<int>(path.size()) == max_len) return;
    for (std::int64_t i = 0; i < fact_end; ++i) {
      const auto& q = kg.facts[i];
      if (q.subject != node || q.time >= bound) continue;
      path.push_back(q.relation);
      std::vector<int> body(path.size());
      for (std::size_t j = 0; j < path.size(); ++j)
        body[j] = invert(path[path.size() - 1 - j]);
      bodies.insert(body);
      walk(q.object, q.time, path);
      path.pop_back();
    }
  };

  for (std::int64_t i = 0; i < fact_end; ++i) {
    if (kg.facts[i].relation != head) continue;
    std::vector<int> path;
    walk(kg.facts[i].object, kg.facts[i].time, path);
  }
  return bodies;
}

Counts count_groundings_bruteforce(const TemporalKG& kg, std::int64_t fact_end, int head,
                                   const std::vector<int>& body) {
  Counts counts;
  std::function<void(std::size_t, int, int, int)> extend = [&](std::size_t depth, int x0,
                                                               int node, int last_time) {
    if (depth == body.size()) {
      ++counts.body_support;
      for (std::int64_t i = 0; i < fact_end; ++i) {
        const auto& q = kg.facts[i];
        if (q.subject == x0 && q.relation == head && q.object == node && q.time > last_time) {
          ++counts.support;
          break;
        }
      }
      return;
    }
    for (std::int64_t i = 0; i < fact_end; ++i) {
      const auto& q = kg.facts[i];
      if (q.relation != body[depth] || q.subject != node) continue;
      if (depth > 0 && q.time <= last_time) continue;
      extend(depth + 1, x0, q.object, q.time);
    }
  };
  for (std::int64_t i = 0; i < fact_end; ++i) {
    const auto& q = kg.facts[i];
    if (q.relation != body[0]) continue;
    extend(1, q.subject, q.object, q.time);
  }
  return counts;
}

std::vector<std::pair<std::vector<int>, double>> enumerate_sequences(
    const std::vector<std::vector<double>>& step_log_probs, int len) {
  std::vector<std::pair<std::vector<int>, double>> out{{{}, 0.0}};
  for (int step = 0; step < len; ++step) {
    std::vector<std::pair<std::vector<int>, double>> next;
    for (const auto& [seq, lp] : out) {
      const auto& dist = step_log_probs[step];
      for (std::size_t tok = 0; tok < dist.size(); ++tok) {
        auto s = seq;
        s.push_back(static_cast<int>(tok));
        next.emplace_back(std::move(s), lp + dist[tok]);
      }
    }
    out = std::move(next);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace oracles
