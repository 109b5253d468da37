#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stk/config.hpp"
#include "stk/encoder.hpp"
#include "stk/inference.hpp"
#include "stk/model.hpp"
#include "stk/rules.hpp"
#include "stk/tkg.hpp"

namespace stk::pipeline {

// Artifact layout inside one run directory.
struct RunPaths {
  std::string dir;
  std::string dataset() const { return dir + "/dataset.bin"; }
  std::string encoder() const { return dir + "/encoder.ckpt"; }
  std::string rules() const { return dir + "/rules.txt"; }
  std::string instructions_dir() const { return dir + "/instructions"; }
  std::string model() const { return dir + "/model.ckpt"; }
  std::string model_meta() const { return dir + "/model.json"; }
  std::string eval() const { return dir + "/eval.txt"; }
  std::string routing_stats() const { return dir + "/routing_stats.txt"; }
  std::string config_echo() const { return dir + "/config.json"; }
  std::string train_log() const { return dir + "/train_log.txt"; }
  std::string lock() const { return dir + "/.lock"; }
};

// Exclusive run-directory lock, released on destruction.
class RunLock {
 public:
  explicit RunLock(const RunPaths& paths);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

SymbolVocab make_vocab(const TemporalKG& kg, const PipelineConfig& cfg);
BackboneConfig make_backbone_config(const TemporalKG& kg, const SymbolVocab& vocab,
                                    const PipelineConfig& cfg);
MiningConfig make_mining_config(const PipelineConfig& cfg);
EvalConfig make_eval_config(const PipelineConfig& cfg);

// One training example per train fact (inverse facts included): retrieved
// chain, rendered instruction with gold target, frozen graph representation.
std::vector<TrainExample> build_training_examples(const TemporalKG& kg, const DatasetSplit& split,
                                                  const SymbolVocab& vocab, const RuleSet& rules,
                                                  const EncoderParams& encoder,
                                                  const PipelineConfig& cfg);

// Per layer x module x expert top-choice activation ratios over a set of
// forward passes.
struct RoutingHistogram {
  int n_layers = 0, n_experts = 0;
  // counts[layer][module][expert], rows[layer][module]
  std::vector<std::vector<std::vector<std::int64_t>>> counts;
  std::vector<std::vector<std::int64_t>> rows;

  RoutingHistogram(int layers, int experts);
  void add(const RoutingStatsCollector& stats);
  void write(std::ostream& os) const;
};

RoutingHistogram collect_routing_stats(const ModelState& model, const std::vector<TrainExample>& examples,
                                       const AdapterOptions& ablation, int max_examples = 200);

// Model persistence: the checkpoint holds parameter values, the meta file
// the BackboneConfig needed to rebuild the module structure.
void save_model(const ModelState& model, const std::string& ckpt_path,
                const std::string& meta_path);
ModelState load_model(const std::string& ckpt_path, const std::string& meta_path);

// Full in-memory pipeline: pretrain encoder, mine rules, build instructions,
// pretrain backbone, fine-tune adapters, evaluate. Used by tests and the
// acceptance suite.
struct EndToEndResult {
  EvalReport report;
  std::int64_t n_rules = 0;
  std::int64_t n_examples = 0;
};
EndToEndResult run_end_to_end(const TemporalKG& kg, const DatasetSplit& split,
                              const PipelineConfig& cfg, std::ostream* log = nullptr);

}  // namespace stk::pipeline
