#include "stk/synthetic.hpp"

#include <algorithm>
#include <set>

namespace stk {

std::pair<TemporalKG, DatasetSplit> make_synthetic_dataset(const SyntheticConfig& config) {
  if (config.n_entities < 2 || config.n_relations < 1 || config.n_times < 10)
    throw config_error("synthetic: need >=2 entities, >=1 relations, >=10 timestamps");
  Rng rng(mix_seed(config.seed, 0x57A77C));

  Vocab entities, relations;
  for (int e = 0; e < config.n_entities; ++e) entities.intern("E" + std::to_string(e));
  for (int r = 0; r < config.n_relations; ++r) relations.intern("R" + std::to_string(r));

  // Distinct nonzero offsets keep (s, r) -> o bijective per relation.
  std::vector<int> offsets;
  {
    std::vector<int> pool;
    for (int i = 1; i < config.n_entities; ++i) pool.push_back(i);
    std::shuffle(pool.begin(), pool.end(), rng);
    offsets.assign(pool.begin(), pool.begin() + std::min<std::size_t>(pool.size(),
                                                                      config.n_relations));
    while (static_cast<int>(offsets.size()) < config.n_relations)
      offsets.push_back(1 + static_cast<int>(offsets.size()) % (config.n_entities - 1));
  }

  const int train_end = config.n_times * 8 / 10;
  const int valid_end = config.n_times * 9 / 10;
  std::vector<std::vector<ParsedLine>> groups(3);
  std::uniform_int_distribution<int> pick_s(0, config.n_entities - 1);
  std::uniform_int_distribution<int> pick_r(0, config.n_relations - 1);
  for (int t = 0; t < config.n_times; ++t) {
    std::set<std::pair<int, int>> used;
    auto& group = groups[t < train_end ? 0 : (t < valid_end ? 1 : 2)];
    while (static_cast<int>(used.size()) < config.facts_per_time) {
      const int s = pick_s(rng);
      const int r = pick_r(rng);
      if (!used.emplace(s, r).second) continue;
      const int o = (s + offsets[r]) % config.n_entities;
      group.push_back({s, r, o, t});
    }
  }
  return build_dataset(groups, std::move(entities), std::move(relations));
}

}  // namespace stk
