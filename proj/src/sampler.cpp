#include "stk/sampler.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <unordered_set>

namespace stk {

namespace {

// Uniform sample of k items without replacement, preserving input order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, int k, Rng& rng) {
  const int n = static_cast<int>(pool.size());
  if (k >= n) return pool;
  // Partial Fisher-Yates, then restore stable order via index sort.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(k);
  for (int i : idx) out.push_back(pool[i]);
  return out;
}

}  // namespace

SubgraphSequence sample_history(const TemporalKG& kg, int subject, int relation,
                                int query_time, const SamplerConfig& config,
                                std::uint64_t seed, int history_end) {
  if (query_time < 1)
    throw empty_history_error("query at t=0 has no preceding history");
  if (config.fanout < 1 || config.depth < 1 || config.window < 1)
    throw config_error("sampler: fanout, depth, and window must be >= 1");
  if (history_end < 0 || history_end > query_time) history_end = query_time;

  SubgraphSequence seq;
  seq.subject = subject;
  seq.relation = relation;
  seq.query_time = query_time;
  seq.config = config;

  Rng rng(mix_seed(seed, (static_cast<std::uint64_t>(subject) << 32) ^
                             (static_cast<std::uint64_t>(relation) << 16) ^
                             static_cast<std::uint64_t>(query_time)));

  // Candidate timestamps where the root is active, most recent first.
  std::vector<int> times;
  for (std::int64_t fi : kg.edges_from(subject)) {
    const int t = kg.facts[fi].time;
    if (t >= history_end) break;
    if (times.empty() || times.back() != t) times.push_back(t);
  }
  std::reverse(times.begin(), times.end());
  if (static_cast<int>(times.size()) > config.window) times.resize(config.window);
  std::reverse(times.begin(), times.end());  // chronological

  for (int t : times) {
    SampledSnapshot snap;
    snap.time = t;
    std::set<int> nodes{subject};
    std::vector<int> frontier{subject};
    std::unordered_set<int> expanded;
    for (int d = 0; d < config.depth && !frontier.empty(); ++d) {
      std::vector<int> next;
      for (int u : frontier) {
        if (expanded.count(u)) continue;
        expanded.insert(u);
        std::vector<Quadruple> adjacent;
        for (std::int64_t fi : kg.edges_from(u)) {
          const auto& q = kg.facts[fi];
          if (q.time > t) break;
          if (q.time == t) adjacent.push_back(q);
        }
        auto chosen = sample_without_replacement(std::move(adjacent), config.fanout, rng);
        for (const auto& e : chosen) {
          snap.edges.push_back(e);
          if (!nodes.count(e.object)) {
            nodes.insert(e.object);
            next.push_back(e.object);
          }
        }
      }
      frontier = std::move(next);
    }
    if (snap.edges.empty()) continue;  // root row exists but all its facts start elsewhere
    // Drop exact duplicate edges (datasets may repeat a quadruple).
    std::sort(snap.edges.begin(), snap.edges.end(), [](const Quadruple& a, const Quadruple& b) {
      return std::tie(a.subject, a.relation, a.object, a.time) <
             std::tie(b.subject, b.relation, b.object, b.time);
    });
    snap.edges.erase(std::unique(snap.edges.begin(), snap.edges.end()), snap.edges.end());
    snap.nodes.assign(nodes.begin(), nodes.end());
    seq.snapshots.push_back(std::move(snap));
  }
  return seq;
}

void dump_subgraphs(const SubgraphSequence& seq, const TemporalKG& kg, std::ostream& os) {
  os << "query subject=" << kg.entities.name(seq.subject) << " t=" << seq.query_time << "\n";
  for (const auto& snap : seq.snapshots) {
    os << "snapshot t=" << snap.time << " (" << snap.edges.size() << " edges)\n";
    for (const auto& e : snap.edges) {
      const int nr = kg.num_relations();
      const std::string rel = e.relation < nr ? kg.relations.name(e.relation)
                                              : kg.relations.name(e.relation - nr) + "^-1";
      os << "  " << kg.entities.name(e.subject) << " -[" << rel << "]-> "
         << kg.entities.name(e.object) << "\n";
    }
  }
}

}  // namespace stk
