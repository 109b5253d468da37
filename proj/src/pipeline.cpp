#include "stk/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "stk/checkpoint.hpp"

namespace stk::pipeline {

RunLock::RunLock(const RunPaths& paths) : path_(paths.lock()) {
  std::filesystem::create_directories(paths.dir);
  if (std::filesystem::exists(path_))
    throw config_error("run directory is locked by another process: " + path_ +
                       " (remove the stale lock if no run is active)");
  std::ofstream lock(path_);
  lock << "locked\n";
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

SymbolVocab make_vocab(const TemporalKG& kg, const PipelineConfig& cfg) {
  return SymbolVocab(kg, cfg.rules.max_events + 2);
}

BackboneConfig make_backbone_config(const TemporalKG& kg, const SymbolVocab& vocab,
                                    const PipelineConfig& cfg) {
  (void)kg;
  BackboneConfig bc;
  bc.vocab_size = vocab.size();
  bc.d_t = cfg.backbone.d_t;
  bc.n_layers = cfg.backbone.n_layers;
  bc.n_heads = cfg.backbone.n_heads;
  bc.d_ffn = cfg.backbone.d_ffn;
  bc.max_seq_len = cfg.backbone.max_seq_len;
  if (cfg.ablation.single_adapter_mode) {
    bc.n_experts = 1;
    bc.top_k = 1;
  } else {
    bc.n_experts = cfg.adapter.n_experts;
    bc.top_k = cfg.adapter.top_k;
  }
  bc.d_k = cfg.adapter.d_k;
  bc.d_g = cfg.encoder.d_g;
  bc.seed = cfg.seed;
  return bc;
}

MiningConfig make_mining_config(const PipelineConfig& cfg) {
  MiningConfig mc;
  mc.walks_per_relation = cfg.rules.walks_per_relation;
  mc.max_body_len = cfg.rules.max_body_len;
  mc.seed = cfg.seed;
  mc.max_groundings = cfg.rules.max_groundings;
  return mc;
}

EvalConfig make_eval_config(const PipelineConfig& cfg) {
  EvalConfig ec;
  ec.sampler = cfg.sampler;
  ec.retrieval.max_events = cfg.rules.max_events;
  ec.beam_width = cfg.inference.beam_width;
  ec.lambda = cfg.inference.lambda;
  ec.max_len = cfg.inference.max_len;
  ec.disable_hybrid_score = cfg.ablation.disable_hybrid_score;
  ec.ablation = cfg.adapter_options();
  ec.seed = cfg.seed;
  return ec;
}

std::vector<TrainExample> build_training_examples(const TemporalKG& kg, const DatasetSplit& split,
                                                  const SymbolVocab& vocab, const RuleSet& rules,
                                                  const EncoderParams& encoder,
                                                  const PipelineConfig& cfg) {
  NoGradGuard ng;
  RetrievalConfig retrieval;
  retrieval.max_events = cfg.rules.max_events;
  std::vector<TrainExample> out;
  for (std::int64_t i = split.train.first; i < split.train.second; ++i) {
    const auto& q = kg.facts[i];
    EventChain chain = retrieve_chain(kg, q.subject, q.relation, q.time, rules, retrieval);
    InstructionSequence instr =
        build_instruction(vocab, q.subject, q.relation, q.time, chain, q.object);

    SubgraphSequence subgraphs;
    try {
      subgraphs = sample_history(kg, q.subject, q.relation, q.time, cfg.sampler, cfg.seed);
    } catch (const empty_history_error&) {
    }
    EncoderState enc = encode_history(subgraphs, encoder);
    GraphState graph = initial_graph_repr(enc, q.subject, q.relation);

    TrainExample ex;
    ex.target_start = static_cast<int>(instr.tokens.size());
    ex.target_len = static_cast<int>(instr.target.size());
    ex.tokens = instr.tokens;
    ex.tokens.insert(ex.tokens.end(), instr.target.begin(), instr.target.end());
    ex.route_pos = route_positions(instr, static_cast<int>(ex.tokens.size()));
    ex.h_g0 = graph.h0.detach();
    out.push_back(std::move(ex));
  }
  return out;
}

RoutingHistogram::RoutingHistogram(int layers, int experts) : n_layers(layers), n_experts(experts) {
  counts.assign(layers, std::vector<std::vector<std::int64_t>>(3, std::vector<std::int64_t>(experts, 0)));
  rows.assign(layers, std::vector<std::int64_t>(3, 0));
}

void RoutingHistogram::add(const RoutingStatsCollector& stats) {
  for (const auto& rec : stats.records) {
    const int m = static_cast<int>(rec.module);
    for (int j = 0; j < n_experts && j < static_cast<int>(rec.assignment_counts.size()); ++j)
      counts[rec.layer][m][j] += rec.assignment_counts[j];
    rows[rec.layer][m] += rec.rows;
  }
}

void RoutingHistogram::write(std::ostream& os) const {
  os << "# stk-routing-stats v1\n";
  os << "# layer module expert activation_ratio\n";
  for (int l = 0; l < n_layers; ++l)
    for (int m = 0; m < 3; ++m)
      for (int j = 0; j < n_experts; ++j) {
        const double ratio =
            rows[l][m] > 0 ? static_cast<double>(counts[l][m][j]) / rows[l][m] : 0.0;
        os << l << " " << moe_module_name(static_cast<MoeModule>(m)) << " " << j << " " << ratio
           << "\n";
      }
}

RoutingHistogram collect_routing_stats(const ModelState& model,
                                       const std::vector<TrainExample>& examples,
                                       const AdapterOptions& ablation, int max_examples) {
  NoGradGuard ng;
  RoutingHistogram hist(model.cfg.n_layers, model.cfg.n_experts);
  ForwardOptions opts;
  opts.adapters_enabled = true;
  opts.ablation = ablation;
  int n = 0;
  for (const auto& ex : examples) {
    if (n++ >= max_examples) break;
    RoutingStatsCollector stats;
    model_forward(model, ex.tokens, ex.route_pos, ex.h_g0, opts, &stats);
    hist.add(stats);
  }
  return hist;
}

void save_model(const ModelState& model, const std::string& ckpt_path,
                const std::string& meta_path) {
  save_checkpoint(model.all_parameters(), ckpt_path);
  nlohmann::json j;
  const auto& c = model.cfg;
  j["vocab_size"] = c.vocab_size;
  j["d_t"] = c.d_t;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ffn"] = c.d_ffn;
  j["max_seq_len"] = c.max_seq_len;
  j["n_experts"] = c.n_experts;
  j["top_k"] = c.top_k;
  j["d_k"] = c.d_k;
  j["d_g"] = c.d_g;
  j["seed"] = c.seed;
  std::ofstream os(meta_path);
  if (!os) throw missing_artifact_error("cannot write model meta: " + meta_path);
  os << j.dump(2) << "\n";
}

ModelState load_model(const std::string& ckpt_path, const std::string& meta_path) {
  std::ifstream is(meta_path);
  if (!is) throw missing_artifact_error("cannot open model meta: " + meta_path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("model meta parse failure: ") + e.what());
  }
  BackboneConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_t = j.at("d_t").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ffn = j.at("d_ffn").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.n_experts = j.at("n_experts").get<int>();
  c.top_k = j.at("top_k").get<int>();
  c.d_k = j.at("d_k").get<int>();
  c.d_g = j.at("d_g").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  ModelState model = ModelState::init(c);
  load_checkpoint(model.all_parameters(), ckpt_path);
  return model;
}

EndToEndResult run_end_to_end(const TemporalKG& kg, const DatasetSplit& split,
                              const PipelineConfig& cfg, std::ostream* log) {
  cfg.validate();
  const SymbolVocab vocab = make_vocab(kg, cfg);

  EncoderParams encoder = EncoderParams::init(kg, cfg.encoder.d_g, cfg.seed);
  EncoderTrainConfig etc;
  etc.epochs = cfg.encoder.epochs;
  etc.learning_rate = cfg.encoder.lr;
  etc.window = cfg.encoder.window;
  etc.seed = cfg.seed;
  pretrain_encoder(kg, split.train.second, encoder, etc);
  if (log) (*log) << "encoder pretrained (d_g=" << cfg.encoder.d_g << ")\n";

  RuleSet rules = filter_rules(mine_rules(kg, split.train.second, make_mining_config(cfg)),
                               cfg.rules.min_confidence, cfg.rules.top_n_per_head);
  if (log) (*log) << "rules mined: " << rules.total_rules() << "\n";

  auto examples = build_training_examples(kg, split, vocab, rules, encoder, cfg);
  if (log) (*log) << "training examples: " << examples.size() << "\n";

  ModelState model = ModelState::init(make_backbone_config(kg, vocab, cfg));
  PretrainConfig pc;
  pc.epochs = cfg.backbone.pretrain_epochs;
  pc.learning_rate = cfg.backbone.pretrain_lr;
  pc.seed = cfg.seed;
  pretrain_backbone(model, examples, pc);
  if (log) (*log) << "backbone pretrained\n";

  TrainConfig tc;
  tc.epochs = cfg.training.epochs;
  tc.learning_rate = cfg.training.lr;
  tc.clip_norm = cfg.training.clip;
  tc.alpha = cfg.adapter.alpha;
  tc.balance_average = cfg.adapter.balance_average;
  tc.seed = cfg.seed;
  tc.ablation = cfg.adapter_options();
  train_adapters(model, examples, tc);
  if (log) (*log) << "adapters trained\n";

  EndToEndResult result;
  result.report = evaluate(model, encoder, rules, kg, split, vocab, make_eval_config(cfg));
  result.n_rules = rules.total_rules();
  result.n_examples = static_cast<std::int64_t>(examples.size());
  return result;
}

}  // namespace stk::pipeline
