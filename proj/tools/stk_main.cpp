#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stk/checkpoint.hpp"
#include "stk/config.hpp"
#include "stk/pipeline.hpp"
#include "stk/synthetic.hpp"

namespace {

using namespace stk;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitNumerical = 4;

struct CommonArgs {
  std::string config_path;
  std::string run_dir = "runs/default";
  std::string encoder_ckpt;  // optional override of <run>/encoder.ckpt
  std::vector<std::string> overrides;
};

PipelineConfig effective_config(const CommonArgs& args) {
  PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = PipelineConfig::from_json_file(args.config_path);
  for (const auto& o : args.overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

void echo_config(const PipelineConfig& cfg, const pipeline::RunPaths& paths) {
  fs::create_directories(paths.dir);
  std::ofstream os(paths.config_echo());
  os << cfg.to_json() << "\n";
}

std::pair<TemporalKG, DatasetSplit> load_bundle_or_fail(const pipeline::RunPaths& paths) {
  if (!fs::exists(paths.dataset()))
    throw missing_artifact_error("dataset bundle not found, run `ingest` first: " +
                                 paths.dataset());
  return load_dataset_bundle(paths.dataset());
}

EncoderParams load_encoder_or_fail(const TemporalKG& kg, const PipelineConfig& cfg,
                                   const pipeline::RunPaths& paths,
                                   const std::string& override_path) {
  const std::string path = override_path.empty() ? paths.encoder() : override_path;
  if (!fs::exists(path))
    throw missing_artifact_error("encoder checkpoint not found, run `pretrain-encoder` first: " +
                                 path);
  EncoderParams enc = EncoderParams::init(kg, cfg.encoder.d_g, cfg.seed);
  load_checkpoint(enc.parameters(), path);
  enc.set_trainable(false);
  return enc;
}

RuleSet load_rules_or_fail(const TemporalKG& kg, const pipeline::RunPaths& paths) {
  if (!fs::exists(paths.rules()))
    throw missing_artifact_error("rules file not found, run `mine-rules` first: " + paths.rules());
  return load_rules(paths.rules(), kg);
}

ModelState load_model_or_fail(const pipeline::RunPaths& paths) {
  if (!fs::exists(paths.model()) || !fs::exists(paths.model_meta()))
    throw missing_artifact_error("model checkpoint not found, run `train` first: " + paths.model());
  return pipeline::load_model(paths.model(), paths.model_meta());
}

int cmd_ingest(const CommonArgs& args, const PipelineConfig& cfg, bool synthetic,
               const SyntheticConfig& syn) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  TemporalKG kg;
  DatasetSplit split;
  if (synthetic) {
    std::tie(kg, split) = make_synthetic_dataset(syn);
  } else {
    if (cfg.dataset.train.empty() || cfg.dataset.valid.empty() || cfg.dataset.test.empty())
      throw config_error("ingest: dataset.train/valid/test paths are required (or --synthetic)");
    std::tie(kg, split) = load_dataset(cfg.dataset.train, cfg.dataset.valid, cfg.dataset.test);
  }
  kg.validate();
  save_dataset(kg, split, paths.dataset());
  std::cout << "ingest: |E|=" << kg.num_entities() << " |R|=" << kg.num_relations()
            << " |T|=" << kg.num_times() << " train=" << split.raw_train_facts
            << " valid=" << split.raw_valid_facts << " test=" << split.raw_test_facts << " -> "
            << paths.dataset() << "\n";
  return kExitOk;
}

int cmd_pretrain_encoder(const CommonArgs& args, const PipelineConfig& cfg) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  EncoderParams enc = EncoderParams::init(kg, cfg.encoder.d_g, cfg.seed);
  EncoderTrainConfig etc;
  etc.epochs = cfg.encoder.epochs;
  etc.learning_rate = cfg.encoder.lr;
  etc.window = cfg.encoder.window;
  etc.seed = cfg.seed;
  pretrain_encoder(kg, split.train.second, enc, etc);
  save_checkpoint(enc.parameters(), paths.encoder());
  std::cout << "pretrain-encoder: d_g=" << cfg.encoder.d_g << " epochs=" << cfg.encoder.epochs
            << " -> " << paths.encoder() << "\n";
  return kExitOk;
}

int cmd_mine_rules(const CommonArgs& args, const PipelineConfig& cfg) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  RuleSet rules = filter_rules(mine_rules(kg, split.train.second, pipeline::make_mining_config(cfg)),
                               cfg.rules.min_confidence, cfg.rules.top_n_per_head);
  save_rules(rules, kg, paths.rules());
  std::cout << "mine-rules: " << rules.total_rules() << " rules kept (min_confidence="
            << cfg.rules.min_confidence << ", top_n=" << cfg.rules.top_n_per_head << ") -> "
            << paths.rules() << "\n";
  return kExitOk;
}

int cmd_build_instructions(const CommonArgs& args, const PipelineConfig& cfg, int limit) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  RuleSet rules = load_rules_or_fail(kg, paths);
  const SymbolVocab vocab = pipeline::make_vocab(kg, cfg);
  RetrievalConfig retrieval;
  retrieval.max_events = cfg.rules.max_events;
  fs::create_directories(paths.instructions_dir());
  std::ofstream os(paths.instructions_dir() + "/train.txt");
  std::int64_t written = 0;
  for (std::int64_t i = split.train.first; i < split.train.second && written < limit; ++i) {
    const auto& q = kg.facts[i];
    EventChain chain = retrieve_chain(kg, q.subject, q.relation, q.time, rules, retrieval);
    InstructionSequence instr =
        build_instruction(vocab, q.subject, q.relation, q.time, chain, q.object);
    os << "# query " << i << "\n" << render_instruction(instr, vocab) << "\n";
    ++written;
  }
  std::cout << "build-instructions: wrote " << written << " instructions -> "
            << paths.instructions_dir() << "/train.txt\n";
  return kExitOk;
}

int cmd_train(const CommonArgs& args, const PipelineConfig& cfg) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  RuleSet rules = load_rules_or_fail(kg, paths);
  EncoderParams enc = load_encoder_or_fail(kg, cfg, paths, args.encoder_ckpt);
  const SymbolVocab vocab = pipeline::make_vocab(kg, cfg);
  auto examples = pipeline::build_training_examples(kg, split, vocab, rules, enc, cfg);
  if (examples.empty()) throw config_error("train: no training examples");

  ModelState model = ModelState::init(pipeline::make_backbone_config(kg, vocab, cfg));
  std::ofstream log(paths.train_log());
  PretrainConfig pc;
  pc.epochs = cfg.backbone.pretrain_epochs;
  pc.learning_rate = cfg.backbone.pretrain_lr;
  pc.seed = cfg.seed;
  pretrain_backbone(model, examples, pc, &log);

  TrainConfig tc;
  tc.epochs = cfg.training.epochs;
  tc.learning_rate = cfg.training.lr;
  tc.clip_norm = cfg.training.clip;
  tc.alpha = cfg.adapter.alpha;
  tc.balance_average = cfg.adapter.balance_average;
  tc.seed = cfg.seed;
  tc.ablation = cfg.adapter_options();
  train_adapters(model, examples, tc, &log);

  pipeline::save_model(model, paths.model(), paths.model_meta());
  std::cout << "train: " << examples.size() << " examples, backbone "
            << cfg.backbone.pretrain_epochs << "+adapter " << cfg.training.epochs
            << " epochs -> " << paths.model() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const PipelineConfig& cfg, bool per_query) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  RuleSet rules = load_rules_or_fail(kg, paths);
  EncoderParams enc = load_encoder_or_fail(kg, cfg, paths, args.encoder_ckpt);
  ModelState model = load_model_or_fail(paths);
  const SymbolVocab vocab = pipeline::make_vocab(kg, cfg);
  EvalReport report = evaluate(model, enc, rules, kg, split, vocab, pipeline::make_eval_config(cfg));
  std::ofstream os(paths.eval());
  write_report(report, os, per_query);
  std::cout << "eval: queries=" << report.n_queries << " hit@1=" << report.hit1
            << " hit@3=" << report.hit3 << " hit@10=" << report.hit10 << " -> " << paths.eval()
            << "\n";
  return kExitOk;
}

int cmd_routing_stats(const CommonArgs& args, const PipelineConfig& cfg, int max_examples) {
  pipeline::RunPaths paths{args.run_dir};
  pipeline::RunLock lock(paths);
  echo_config(cfg, paths);
  auto [kg, split] = load_bundle_or_fail(paths);
  RuleSet rules = load_rules_or_fail(kg, paths);
  EncoderParams enc = load_encoder_or_fail(kg, cfg, paths, args.encoder_ckpt);
  ModelState model = load_model_or_fail(paths);
  const SymbolVocab vocab = pipeline::make_vocab(kg, cfg);
  auto examples = pipeline::build_training_examples(kg, split, vocab, rules, enc, cfg);
  auto hist = pipeline::collect_routing_stats(model, examples, cfg.adapter_options(), max_examples);
  std::ofstream os(paths.routing_stats());
  hist.write(os);
  std::cout << "routing-stats: " << std::min<std::size_t>(examples.size(), max_examples)
            << " examples -> " << paths.routing_stats() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STK-Adapter: temporal knowledge graph extrapolation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CommonArgs common;
  app.add_option("--config", common.config_path, "JSON pipeline config");
  app.add_option("--run", common.run_dir, "artifact directory (default runs/default)");
  app.add_option("--set", common.overrides, "config override, dot path: section.key=value");
  app.add_option("--encoder-ckpt", common.encoder_ckpt,
                 "path to a graph-encoder checkpoint (default <run>/encoder.ckpt)");

  auto* ingest = app.add_subcommand("ingest", "load TSV quadruple files into a dataset bundle");
  bool synthetic = false;
  SyntheticConfig syn;
  ingest->add_flag("--synthetic", synthetic, "generate the deterministic toy dataset instead");
  ingest->add_option("--synthetic-entities", syn.n_entities);
  ingest->add_option("--synthetic-relations", syn.n_relations);
  ingest->add_option("--synthetic-times", syn.n_times);
  ingest->add_option("--synthetic-facts-per-time", syn.facts_per_time);
  std::string train_path, valid_path, test_path;
  ingest->add_option("--train", train_path, "train TSV path");
  ingest->add_option("--valid", valid_path, "valid TSV path");
  ingest->add_option("--test", test_path, "test TSV path");

  auto* pretrain_enc = app.add_subcommand("pretrain-encoder", "pre-train the evolving graph encoder");
  auto* mine = app.add_subcommand("mine-rules", "mine temporal logic rules from the train split");
  auto* build_instr = app.add_subcommand("build-instructions", "dump instruction text for inspection");
  int instr_limit = 100;
  build_instr->add_option("--limit", instr_limit, "number of instructions to dump");
  auto* train = app.add_subcommand("train", "pre-train backbone and fine-tune adapters");
  bool t_no_st = false, t_no_ea = false, t_no_cma = false, t_single = false;
  train->add_flag("--disable-st-moe", t_no_st);
  train->add_flag("--disable-ea-moe", t_no_ea);
  train->add_flag("--disable-cma-moe", t_no_cma);
  train->add_flag("--single-adapter", t_single);
  auto* eval_cmd = app.add_subcommand("eval", "single-step Hit@K evaluation on the test split");
  double lambda = -1.0;
  int beam_width = -1;
  bool no_hybrid = false, per_query = false;
  bool e_no_st = false, e_no_ea = false, e_no_cma = false;
  eval_cmd->add_option("--lambda", lambda, "hybrid score weight in [0,1]");
  eval_cmd->add_option("--beam-width", beam_width);
  eval_cmd->add_flag("--disable-hybrid-score", no_hybrid);
  eval_cmd->add_flag("--disable-st-moe", e_no_st);
  eval_cmd->add_flag("--disable-ea-moe", e_no_ea);
  eval_cmd->add_flag("--disable-cma-moe", e_no_cma);
  eval_cmd->add_flag("--per-query", per_query, "dump per-query rankings into eval.txt");
  auto* stats_cmd = app.add_subcommand("routing-stats", "export per-expert activation ratios");
  int stats_examples = 200;
  stats_cmd->add_option("--max-examples", stats_examples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    PipelineConfig cfg = effective_config(common);
    if (*ingest) {
      if (!train_path.empty()) cfg.dataset.train = train_path;
      if (!valid_path.empty()) cfg.dataset.valid = valid_path;
      if (!test_path.empty()) cfg.dataset.test = test_path;
      return cmd_ingest(common, cfg, synthetic, syn);
    }
    if (*pretrain_enc) return cmd_pretrain_encoder(common, cfg);
    if (*mine) return cmd_mine_rules(common, cfg);
    if (*build_instr) return cmd_build_instructions(common, cfg, instr_limit);
    if (*train) {
      cfg.ablation.disable_st_moe |= t_no_st;
      cfg.ablation.disable_ea_moe |= t_no_ea;
      cfg.ablation.disable_cma_moe |= t_no_cma;
      cfg.ablation.single_adapter_mode |= t_single;
      return cmd_train(common, cfg);
    }
    if (*eval_cmd) {
      if (lambda >= 0.0) cfg.inference.lambda = lambda;
      if (beam_width > 0) cfg.inference.beam_width = beam_width;
      cfg.ablation.disable_hybrid_score |= no_hybrid;
      cfg.ablation.disable_st_moe |= e_no_st;
      cfg.ablation.disable_ea_moe |= e_no_ea;
      cfg.ablation.disable_cma_moe |= e_no_cma;
      cfg.validate();
      return cmd_eval(common, cfg, per_query);
    }
    if (*stats_cmd) return cmd_routing_stats(common, cfg, stats_examples);
    std::cerr << "error: unknown subcommand\n";
    return kExitConfig;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const missing_artifact_error& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
