// Acceptance suite: runs each criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit status 0 iff nothing failed
// (skipped criteria report their reason and do not fail the run).
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "stk/config.hpp"
#include "stk/inference.hpp"
#include "stk/pipeline.hpp"
#include "stk/synthetic.hpp"
#include "test_util.hpp"

using namespace stk;

namespace {

struct Outcome {
  bool ok = true;
  bool skipped = false;
  std::string detail;
};

// ---- shared fixtures ----

PipelineConfig synthetic_pipeline_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.sampler = SamplerConfig{8, 1, 4};
  cfg.rules.walks_per_relation = 60;
  cfg.rules.max_body_len = 1;
  cfg.rules.min_confidence = 0.1;
  cfg.rules.top_n_per_head = 5;
  cfg.rules.max_events = 6;
  cfg.encoder.d_g = 8;
  cfg.encoder.epochs = 10;
  cfg.encoder.lr = 0.05;
  cfg.encoder.window = 3;
  cfg.backbone.d_t = 48;
  cfg.backbone.n_layers = 3;
  cfg.backbone.n_heads = 4;
  cfg.backbone.d_ffn = 96;
  cfg.backbone.max_seq_len = 192;
  cfg.backbone.pretrain_epochs = 3;
  cfg.backbone.pretrain_lr = 3e-3;
  cfg.adapter.n_experts = 4;
  cfg.adapter.top_k = 1;
  cfg.adapter.d_k = 8;
  cfg.adapter.alpha = 0.01;
  cfg.training.epochs = 2;
  cfg.training.lr = 1e-3;
  cfg.inference.beam_width = 20;
  cfg.inference.lambda = 0.1;
  cfg.inference.max_len = 6;
  cfg.seed = seed;
  return cfg;
}

SyntheticConfig copy_task_config(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.n_entities = 20;
  sc.n_relations = 5;
  sc.n_times = 48;
  sc.facts_per_time = 6;
  sc.seed = seed;
  return sc;
}

// Instructions built from a small synthetic dataset, for criteria 1 and 3.
struct InstructionFixture {
  TemporalKG kg;
  DatasetSplit split;
  SymbolVocab vocab;
  std::vector<InstructionSequence> instructions;

  InstructionFixture(int count, std::uint64_t seed)
      : kg(), split(), vocab(make(seed)), instructions() {
    RuleSet no_rules;
    no_rules.rules_by_head.resize(kg.num_relations_with_inverse());
    RetrievalConfig rc;
    rc.max_events = 6;
    for (std::int64_t i = split.train.second - 1;
         i >= split.train.first && static_cast<int>(instructions.size()) < count; --i) {
      const auto& q = kg.facts[i];
      if (q.time < 1) continue;
      EventChain chain = retrieve_chain(kg, q.subject, q.relation, q.time, no_rules, rc);
      instructions.push_back(
          build_instruction(vocab, q.subject, q.relation, q.time, chain, q.object));
    }
  }

 private:
  SymbolVocab make(std::uint64_t seed) {
    SyntheticConfig sc;
    sc.n_entities = 16;
    sc.n_relations = 4;
    sc.n_times = 24;
    sc.facts_per_time = 5;
    sc.seed = seed;
    std::tie(kg, split) = make_synthetic_dataset(sc);
    return SymbolVocab(kg, 8);
  }
};

void randomize_adapter_outputs(ModelState& state, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  for (auto& ad : state.adapters) {
    for (auto& e : ad.st_experts)
      for (auto& v : e.w_up.values()) v = dist(rng);
    for (auto& e : ad.ea_experts)
      for (auto& v : e.w_up.values()) v = dist(rng);
    for (auto& e : ad.cma_experts)
      for (auto& v : e.w_o.values()) v = dist(rng);
  }
}

// ---- criteria ----

Outcome criterion_identity_at_init() {
  InstructionFixture fix(20, 11);
  BackboneConfig bc;
  bc.vocab_size = fix.vocab.size();
  bc.d_t = 64;
  bc.n_layers = 4;
  bc.n_heads = 4;
  bc.d_ffn = 128;
  bc.max_seq_len = 256;
  bc.n_experts = 4;
  bc.top_k = 1;
  bc.d_k = 8;
  bc.d_g = 16;
  bc.seed = 21;
  auto model = ModelState::init(bc);
  Rng rng(22);
  NoGradGuard ng;
  double max_diff = 0.0;
  int checked = 0;
  for (const auto& instr : fix.instructions) {
    std::vector<int> tokens = instr.tokens;
    tokens.insert(tokens.end(), instr.target.begin(), instr.target.end());
    const auto route = route_positions(instr, static_cast<int>(tokens.size()));
    Tensor h_g0 = Tensor::uniform({1, 2 * bc.d_g}, -1.0, 1.0, rng);
    ForwardOptions with, without;
    with.adapters_enabled = true;
    without.adapters_enabled = false;
    const Tensor a = model_forward(model, tokens, route, h_g0, with);
    const Tensor b = model_forward(model, tokens, route, h_g0, without);
    for (std::size_t i = 0; i < a.values().size(); ++i)
      max_diff = std::max(max_diff, std::fabs(a.values()[i] - b.values()[i]));
    ++checked;
  }
  Outcome out;
  out.ok = checked == 20 && max_diff < 1e-9;
  std::ostringstream os;
  os << checked << " instructions, max |logit difference| = " << max_diff << " (< 1e-9)";
  out.detail = os.str();
  return out;
}

Outcome criterion_gradient_suite() {
  double worst = 0.0;
  // Per-op checks over 5 seeds.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> dim(2, 8);
    const int r = dim(rng), c = dim(rng), k = dim(rng);
    Tensor a = Tensor::uniform({r, c}, -1, 1, rng, true);
    Tensor b = Tensor::uniform({r, c}, -1, 1, rng, true);
    Tensor m = Tensor::uniform({c, k}, -1, 1, rng, true);
    Tensor mbias = Tensor::uniform({k}, -1, 1, rng, true);
    Tensor colv = Tensor::uniform({r}, -1, 1, rng, true);
    Tensor gain = Tensor::uniform({c}, 0.5, 1.5, rng, true);
    Tensor bias = Tensor::uniform({c}, -0.5, 0.5, rng, true);
    std::vector<int> cols(r);
    std::uniform_int_distribution<int> pick_col(0, c - 1);
    for (auto& v : cols) v = pick_col(rng);

    const std::vector<std::pair<std::function<Tensor()>, std::vector<Tensor>>> cases = {
        {[&] { return sum_all(tanh_t(linear(a, m, &mbias))); }, {a, m, mbias}},
        {[&] { return sum_all(relu(a)); }, {a}},
        {[&] { return sum_all(sigmoid(a)); }, {a}},
        {[&] { return sum_all(hadamard(softmax(a, -1), b)); }, {a}},
        {[&] { return sum_all(hadamard(log_softmax_rows(a), b)); }, {a}},
        {[&] { return sum_all(hadamard(layer_norm(a, gain, bias), b)); }, {a, gain, bias}},
        {[&] {
           Tensor mask = causal_mask(r);
           return sum_all(tanh_t(scaled_dot_attention(matmul(a, m), matmul(b, m), matmul(a, m), &mask)));
         },
         {a, b, m}},
        {[&] { return sum_all(hadamard(topk_renorm(softmax(a, -1), 2), b)); }, {a}},
        {[&] { return sum_all(tanh_t(pick_elems(a, cols))); }, {a}},
    };
    for (const auto& [f, params] : cases) {
      auto scaled = [&] { return scale(f(), 1.0 / 256.0); };
      worst = std::max(worst, grad_check(scaled, params, 1e-4, 1e-4));
    }
  }

  // Full toy model: 2 layers, d_t=8, d_g=4, n=2, k=1.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BackboneConfig bc;
    bc.vocab_size = 30;
    bc.d_t = 8;
    bc.n_layers = 2;
    bc.n_heads = 2;
    bc.d_ffn = 12;
    bc.max_seq_len = 32;
    bc.n_experts = 2;
    bc.top_k = 1;
    bc.d_k = 4;
    bc.d_g = 4;
    bc.seed = seed;
    auto model = ModelState::init(bc);
    randomize_adapter_outputs(model, seed + 100);
    Rng rng(seed + 7);
    Tensor h_g0 = Tensor::uniform({1, 8}, -1, 1, rng);
    std::vector<int> tokens(9), route(9);
    std::uniform_int_distribution<int> tok(0, bc.vocab_size - 1);
    for (int i = 0; i < 9; ++i) {
      tokens[i] = tok(rng);
      route[i] = i;
    }
    ForwardOptions opts;
    auto f = [&] {
      RoutingStatsCollector stats;
      Tensor logits = model_forward(model, tokens, route, h_g0, opts, &stats);
      // Keep |f| small so the stencil's cancellation noise stays below the
      // relative-error floor; gradients scale uniformly.
      return scale(compute_loss(logits, tokens, 5, 4, &stats, 0.05).total, 1.0 / 16384.0);
    };
    std::vector<Tensor> params;
    for (auto& p : model.all_parameters()) params.push_back(p.tensor);
    worst = std::max(worst, grad_check(f, params, 1e-6, 1e-4));
  }

  Outcome out;
  out.ok = worst < 1e-4;
  std::ostringstream os;
  os << "max relative gradient error = " << worst << " (< 1e-4, 5 seeds)";
  out.detail = os.str();
  return out;
}

Outcome criterion_event_share() {
  InstructionFixture fix(100, 33);
  BackboneConfig bc;
  bc.vocab_size = fix.vocab.size();
  bc.d_t = 32;
  bc.n_layers = 2;
  bc.n_heads = 4;
  bc.d_ffn = 48;
  bc.max_seq_len = 256;
  bc.n_experts = 4;
  bc.top_k = 1;
  bc.d_k = 8;
  bc.d_g = 8;
  bc.seed = 44;
  auto model = ModelState::init(bc);
  randomize_adapter_outputs(model, 45);
  Rng rng(46);
  NoGradGuard ng;

  int checked = 0;
  bool all_equal = true, all_at_tau = true;
  for (const auto& instr : fix.instructions) {
    const auto route = route_positions(instr);
    Tensor h_g0 = Tensor::uniform({1, 2 * bc.d_g}, -1, 1, rng);
    ForwardOptions opts;
    RoutingStatsCollector stats;
    model_forward(model, instr.tokens, route, h_g0, opts, &stats);
    for (const auto& rec : stats.records) {
      if (rec.module != MoeModule::EA) continue;
      const auto& gate = rec.gate_full;
      for (const auto& [b, e] : instr.event_spans) {
        const int tau = instr.time_token_map[b] >= 0 ? instr.time_token_map[b] : b;
        for (int j = b; j < e; ++j) {
          for (int c = 0; c < gate.cols(); ++c)
            all_equal = all_equal && gate.at(j, c) == gate.at(tau, c);
          all_at_tau = all_at_tau && route[j] == tau;
        }
      }
    }
    ++checked;
  }
  Outcome out;
  out.ok = checked == 100 && all_equal && all_at_tau;
  std::ostringstream os;
  os << checked << " instructions, per-span routing decisions "
     << (all_equal ? "exactly equal" : "DIFFER") << ", computed at the time token: "
     << (all_at_tau ? "yes" : "NO");
  out.detail = os.str();
  return out;
}

Outcome criterion_time_decay() {
  const double analytic = std::exp(-1.0) / (std::exp(-1.0) + std::exp(-2.0));
  const auto p = time_decay_probs({9, 8}, 10);
  const double case_err = std::fabs(p[0] - analytic);
  bool ok = case_err < 1e-9 && std::fabs(analytic - 0.7310585786300049) < 1e-9;

  Rng rng(4021);
  double max_tv = 0.0;
  for (int set = 0; set < 10; ++set) {
    std::uniform_int_distribution<int> nt(2, 8), tv(0, 12);
    std::vector<int> times(nt(rng));
    for (auto& t : times) t = tv(rng);
    const auto probs = time_decay_probs(times, 13);
    std::vector<std::int64_t> counts(times.size(), 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_time_decay(times, 13, rng)];
    double tvd = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
      tvd += 0.5 * std::fabs(static_cast<double>(counts[i]) / n - probs[i]);
    max_tv = std::max(max_tv, tvd);
  }
  ok = ok && max_tv < 0.01;
  Outcome out;
  out.ok = ok;
  std::ostringstream os;
  os << "analytic case error " << case_err << " (< 1e-9), max TV over 10 sets of 1e5 steps "
     << max_tv << " (< 0.01)";
  out.detail = os.str();
  return out;
}

Outcome criterion_rule_mining_oracle() {
  bool ok = true;
  std::int64_t rules_checked = 0;
  for (std::uint64_t seed = 1; seed <= 10 && ok; ++seed) {
    Rng rng(seed * 77);
    std::uniform_int_distribution<int> ent(0, 5), rel(0, 2), tim(0, 3), cnt(8, 20);
    std::vector<Quadruple> facts;
    std::set<std::tuple<int, int, int, int>> uniq;
    const int n = cnt(rng);
    while (static_cast<int>(facts.size()) < n) {
      int s = ent(rng), o = ent(rng);
      if (s == o) continue;
      Quadruple q{s, rel(rng), o, tim(rng)};
      if (!uniq.emplace(q.subject, q.relation, q.object, q.time).second) continue;
      facts.push_back(q);
    }
    auto kg = testutil::make_kg(facts, 6, 3);
    const auto fact_end = static_cast<std::int64_t>(kg.facts.size());
    MiningConfig mc;
    mc.walks_per_relation = 4000;
    mc.max_body_len = 2;
    mc.seed = seed;
    const auto mined = mine_rules(kg, fact_end, mc);
    for (int head = 0; head < kg.num_relations_with_inverse() && ok; ++head) {
      const auto expected = oracles::enumerate_walk_bodies(kg, fact_end, head, 2);
      std::set<std::vector<int>> got;
      for (const auto& r : mined.rules_by_head[head]) {
        got.insert(r.body_relations);
        const auto oracle = oracles::count_groundings_bruteforce(kg, fact_end, head, r.body_relations);
        ok = ok && r.body_support == oracle.body_support && r.support == oracle.support;
        ++rules_checked;
      }
      ok = ok && got == expected;
    }
  }
  Outcome out;
  out.ok = ok;
  std::ostringstream os;
  os << rules_checked << " mined rules over 10 random graphs match brute-force counts exactly";
  out.detail = os.str();
  return out;
}

Outcome criterion_beam_oracle() {
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
    BackboneConfig bc;
    bc.vocab_size = 5;
    bc.d_t = 16;
    bc.n_layers = 2;
    bc.n_heads = 2;
    bc.d_ffn = 24;
    bc.max_seq_len = 16;
    bc.n_experts = 2;
    bc.top_k = 1;
    bc.d_k = 4;
    bc.d_g = 4;
    bc.seed = seed;
    auto model = ModelState::init(bc);
    randomize_adapter_outputs(model, seed + 9);
    Rng rng(seed);
    Tensor h_g0 = Tensor::uniform({1, 8}, -1, 1, rng);
    std::vector<int> prompt{static_cast<int>(seed % 5), static_cast<int>((seed + 2) % 5)};
    std::vector<int> route{0, 1};
    IncrementalDecoder decoder(model, prompt, route, h_g0, AdapterOptions{});

    const auto beams = beam_search(decoder, 25, 2);
    // Exhaustive enumeration over all 25 sequences via the same scorer.
    std::vector<std::pair<std::vector<int>, double>> all;
    const auto first = decoder.next_log_probs({});
    for (int t0 = 0; t0 < 5; ++t0) {
      const auto second = decoder.next_log_probs({t0});
      for (int t1 = 0; t1 < 5; ++t1)
        all.push_back({{t0, t1}, first[t0] + second[t1]});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    ok = ok && beams.size() == all.size();
    for (std::size_t i = 0; i < all.size() && ok; ++i)
      ok = beams[i].tokens == all[i].first &&
           std::fabs(beams[i].log_prob - all[i].second) < 1e-12;
  }
  Outcome out;
  out.ok = ok;
  out.detail = "beam ordering equals exhaustive enumeration for 5 random models (vocab 5, len 2, B=25)";
  return out;
}

Outcome criterion_hybrid_endpoints() {
  std::vector<BeamCandidate> beams;
  beams.push_back({{0}, std::log(0.5), 7});
  beams.push_back({{1}, std::log(0.3), 2});
  beams.push_back({{2}, std::log(0.2), 5});
  std::vector<double> tkg(10, 0.02);
  tkg[4] = 0.84;  // argmax entity 4

  const auto at0 = hybrid_rank(beams, tkg, 0.0);
  const auto at1 = hybrid_rank(beams, tkg, 1.0);
  bool ok = at0[0] == 7 && at0[1] == 2 && at0[2] == 5 && at1[0] == 4;

  const double s = (1.0 - 0.1) * 0.8 + 0.1 * 0.5;
  ok = ok && std::fabs(s - 0.77) < 1e-12;

  Outcome out;
  out.ok = ok;
  std::ostringstream os;
  os << "lambda endpoints match beam/graph rankings; S = " << s << " for (0.8, 0.5, 0.1)";
  out.detail = os.str();
  return out;
}

Outcome criterion_load_balance() {
  RoutingStatsCollector::Record rec;
  rec.layer = 0;
  rec.module = MoeModule::EA;
  rec.gate_full = Tensor::full({12, 4}, 0.25);
  rec.assignment_counts = {3, 3, 3, 3};
  rec.rows = 12;
  const double uniform_term = balance_term(rec);
  bool ok = std::fabs(uniform_term - 0.25) < 1e-12;

  Rng rng(88);
  const int n = 4;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    std::vector<double> f(n);
    double sum = 0.0;
    for (auto& v : f) {
      std::uniform_real_distribution<double> u(1e-3, 1.0);
      v = u(rng);
      sum += v;
    }
    for (auto& v : f) v /= sum;
    double dot = 0.0, dev = 0.0;
    for (double v : f) {
      dot += v * v;
      dev = std::max(dev, std::fabs(v - 1.0 / n));
    }
    ok = dot >= 1.0 / n - 1e-9;
    if (dev > 1e-6) ok = ok && dot > 1.0 / n;  // equality only at uniform
  }
  Outcome out;
  out.ok = ok;
  std::ostringstream os;
  os << "uniform n=4 term = " << uniform_term
     << "; 1000 random f=p distributions respect sum f_j p_j >= 1/n";
  out.detail = os.str();
  return out;
}

Outcome criterion_end_to_end() {
  double sum_hit1 = 0.0;
  std::ostringstream os;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto [kg, split] = make_synthetic_dataset(copy_task_config(seed));
    const auto cfg = synthetic_pipeline_config(seed);
    const auto result = pipeline::run_end_to_end(kg, split, cfg);
    sum_hit1 += result.report.hit1;
    monotone = monotone && result.report.hit1 <= result.report.hit3 + 1e-12 &&
               result.report.hit3 <= result.report.hit10 + 1e-12;
    os << "seed " << seed << ": hit@1=" << result.report.hit1 << " (" << result.report.n_queries
       << " queries)  ";
  }
  const double mean = sum_hit1 / 3.0;
  Outcome out;
  out.ok = mean >= 0.8 && monotone;
  os << "mean hit@1 = " << mean << " (>= 0.8 over 3 seeds)";
  out.detail = os.str();
  return out;
}

Outcome criterion_ablation_direction() {
  double full = 0.0, no_ea = 0.0, no_graph = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto [kg, split] = make_synthetic_dataset(copy_task_config(seed));

    auto cfg = synthetic_pipeline_config(seed);
    full += pipeline::run_end_to_end(kg, split, cfg).report.hit1;

    auto cfg_ea = synthetic_pipeline_config(seed);
    cfg_ea.ablation.disable_ea_moe = true;
    no_ea += pipeline::run_end_to_end(kg, split, cfg_ea).report.hit1;

    auto cfg_graph = synthetic_pipeline_config(seed);
    cfg_graph.ablation.disable_st_moe = true;
    cfg_graph.ablation.disable_cma_moe = true;
    no_graph += pipeline::run_end_to_end(kg, split, cfg_graph).report.hit1;
  }
  full /= 3.0;
  no_ea /= 3.0;
  no_graph /= 3.0;
  Outcome out;
  out.ok = no_ea <= full + 1e-9 && no_graph <= full + 1e-9;
  std::ostringstream os;
  os << "mean hit@1: full=" << full << " no-EA=" << no_ea << " no-graph(ST+CMA)=" << no_graph
     << " (variants do not improve on the full model)";
  out.detail = os.str();
  return out;
}

Outcome criterion_ice14() {
  std::string dir = "data/ICE14";
  if (const char* env = std::getenv("STK_ICE14_DIR")) dir = env;
  const std::string train = dir + "/train.txt", valid = dir + "/valid.txt",
                    test = dir + "/test.txt";
  Outcome out;
  if (!std::filesystem::exists(train) || !std::filesystem::exists(valid) ||
      !std::filesystem::exists(test)) {
    out.skipped = true;
    out.detail = "ICE14 files not present under " + dir +
                 " (set STK_ICE14_DIR to run); expected counts |E|=7128 |R|=230 train=74845";
    return out;
  }
  auto [kg, split] = load_dataset(train, valid, test);
  out.ok = kg.num_entities() == 7128 && kg.num_relations() == 230 && split.raw_train_facts == 74845;
  std::ostringstream os;
  os << "|E|=" << kg.num_entities() << " |R|=" << kg.num_relations()
     << " train=" << split.raw_train_facts << " (expected 7128 / 230 / 74845)";
  out.detail = os.str();
  return out;
}

Outcome criterion_scale_statement() {
  Outcome out;
  out.ok = true;
  out.detail =
      "full-scale benchmark numbers require fine-tuning an 8B-parameter backbone and are NOT "
      "reproducible at desk scale; criteria 1-10 substitute property-based acceptance";
  return out;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "identity at initialization", criterion_identity_at_init},
    {2, "finite-difference gradient suite", criterion_gradient_suite},
    {3, "event-share routing invariant", criterion_event_share},
    {4, "time-decayed walk distribution", criterion_time_decay},
    {5, "rule-mining brute-force oracle", criterion_rule_mining_oracle},
    {6, "beam-search exhaustive oracle", criterion_beam_oracle},
    {7, "hybrid-score endpoints", criterion_hybrid_endpoints},
    {8, "load-balance arithmetic", criterion_load_balance},
    {9, "synthetic end-to-end learnability", criterion_end_to_end},
    {10, "ablation direction check", criterion_ablation_direction},
    {11, "ICE14 ingestion counts", criterion_ice14},
    {12, "desk-scale scope statement", criterion_scale_statement},
};

}  // namespace

int main(int argc, char** argv) {
  int only = -1;
  if (argc > 1) only = std::atoi(argv[1]);
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (only > 0 && c.id != only) continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const char* tag = out.skipped ? "SKIP" : (out.ok ? "PASS" : "FAIL");
    std::printf("[%s] criterion %2d (%s): %s\n", tag, c.id, c.name, out.detail.c_str());
    std::fflush(stdout);
    if (!out.ok && !out.skipped) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
