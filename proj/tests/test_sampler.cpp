#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "stk/sampler.hpp"
#include "test_util.hpp"

using namespace stk;

namespace {
bool same_sequence(const SubgraphSequence& a, const SubgraphSequence& b) {
  if (a.snapshots.size() != b.snapshots.size()) return false;
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    if (a.snapshots[i].time != b.snapshots[i].time) return false;
    if (!(a.snapshots[i].edges == b.snapshots[i].edges)) return false;
    if (a.snapshots[i].nodes != b.snapshots[i].nodes) return false;
  }
  return true;
}
}  // namespace

TEST_CASE("fanout exceeding degree keeps all neighbors") {
  auto kg = testutil::make_kg({{0, 0, 1, 0}, {0, 0, 2, 0}}, 3, 1, 2);
  SamplerConfig cfg{/*fanout=*/5, /*depth=*/1, /*window=*/4};
  auto seq = sample_history(kg, 0, 0, 1, cfg, 7);
  REQUIRE(seq.snapshots.size() == 1);
  CHECK(seq.snapshots[0].edges.size() == 2);
  CHECK(seq.snapshots[0].nodes == std::vector<int>{0, 1, 2});
}

TEST_CASE("fanout caps per-node degree: star with 10 neighbors, fanout 3") {
  std::vector<Quadruple> facts;
  for (int o = 1; o <= 10; ++o) facts.push_back({0, 0, o, 0});
  auto kg = testutil::make_kg(facts, 11, 1, 2);
  SamplerConfig cfg{3, 1, 4};
  auto seq = sample_history(kg, 0, 0, 1, cfg, 11);
  REQUIRE(seq.snapshots.size() == 1);
  CHECK(seq.snapshots[0].edges.size() == 3);
  for (const auto& e : seq.snapshots[0].edges) {
    CHECK(e.subject == 0);
    CHECK(e.object >= 1);
    CHECK(e.object <= 10);
  }
}

TEST_CASE("depth-2 chain forces the unique path") {
  // a -> b at t0, b -> c at t0 (one snapshot).
  auto kg = testutil::make_kg({{0, 0, 1, 0}, {1, 0, 2, 0}}, 3, 1, 2);
  SamplerConfig cfg{1, 2, 4};
  auto seq = sample_history(kg, 0, 0, 1, cfg, 3);
  REQUIRE(seq.snapshots.size() == 1);
  CHECK(seq.snapshots[0].nodes == std::vector<int>{0, 1, 2});
}

TEST_CASE("determinism, containment, and the size bound") {
  std::vector<Quadruple> facts;
  Rng rng(99);
  std::uniform_int_distribution<int> ent(0, 11), tt(0, 7);
  for (int i = 0; i < 60; ++i) {
    int s = ent(rng), o = ent(rng);
    if (s == o) o = (o + 1) % 12;
    facts.push_back({s, i % 3, o, tt(rng)});
  }
  auto kg = testutil::make_kg(facts, 12, 3, 9);
  SamplerConfig cfg{2, 2, 3};

  auto a = sample_history(kg, 3, 1, 8, cfg, 42);
  auto b = sample_history(kg, 3, 1, 8, cfg, 42);
  CHECK(same_sequence(a, b));

  // Containment: every sampled edge exists in the source snapshot.
  for (const auto& snap : a.snapshots) {
    CHECK(snap.time < 8);
    auto source = kg.snapshot_at(snap.time);
    for (const auto& e : snap.edges) {
      bool found = false;
      for (const auto& s : source) found = found || s == e;
      CHECK(found);
    }
    // Size bound: nodes <= sum_i fanout^i for depth m.
    double bound = 0.0;
    for (int d = 0; d <= cfg.depth; ++d) bound += std::pow(cfg.fanout, d);
    CHECK(static_cast<double>(snap.nodes.size()) <= bound);
  }
}

TEST_CASE("window keeps the most recent active snapshots") {
  std::vector<Quadruple> facts;
  for (int t = 0; t < 6; ++t) facts.push_back({0, 0, 1 + t % 2, t});
  auto kg = testutil::make_kg(facts, 3, 1, 7);
  SamplerConfig cfg{4, 1, 2};
  auto seq = sample_history(kg, 0, 0, 6, cfg, 1);
  REQUIRE(seq.snapshots.size() == 2);
  CHECK(seq.snapshots[0].time == 4);
  CHECK(seq.snapshots[1].time == 5);
}

TEST_CASE("query at t=0 raises the empty-history error") {
  auto kg = testutil::make_kg({{0, 0, 1, 0}}, 2, 1, 2);
  SamplerConfig cfg;
  CHECK_THROWS_AS(sample_history(kg, 0, 0, 0, cfg, 1), empty_history_error);
}

TEST_CASE("history_end hides later facts") {
  auto kg = testutil::make_kg({{0, 0, 1, 0}, {0, 0, 2, 1}}, 3, 1, 3);
  SamplerConfig cfg{4, 1, 8};
  auto full = sample_history(kg, 0, 0, 2, cfg, 1);
  CHECK(full.snapshots.size() == 2);
  auto cut = sample_history(kg, 0, 0, 2, cfg, 1, /*history_end=*/1);
  REQUIRE(cut.snapshots.size() == 1);
  CHECK(cut.snapshots[0].time == 0);
}

TEST_CASE("debug dump renders one block per snapshot") {
  auto kg = testutil::make_kg({{0, 0, 1, 0}}, 2, 1, 2);
  auto seq = sample_history(kg, 0, 0, 1, SamplerConfig{2, 1, 2}, 5);
  std::ostringstream os;
  dump_subgraphs(seq, kg, os);
  CHECK(os.str().find("snapshot t=0") != std::string::npos);
  CHECK(os.str().find("E0") != std::string::npos);
}
