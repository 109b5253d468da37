#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stk/inference.hpp"
#include "stk/model.hpp"
#include "stk/rules.hpp"
#include "stk/sampler.hpp"

namespace stk {

// Whole-pipeline configuration. Loadable from a JSON file with dot-path
// command-line overrides ("--set training.epochs=4").
struct PipelineConfig {
  struct Dataset {
    std::string train, valid, test;
  } dataset;

  SamplerConfig sampler;

  struct Rules {
    int walks_per_relation = 100;
    int max_body_len = 3;
    double min_confidence = 0.01;
    int top_n_per_head = 20;
    int max_events = 8;
    std::int64_t max_groundings = 1'000'000;
  } rules;

  struct Encoder {
    int d_g = 16;
    int epochs = 20;
    double lr = 0.05;
    int window = 4;
  } encoder;

  struct Backbone {
    int d_t = 64;
    int n_layers = 4;
    int n_heads = 4;
    int d_ffn = 128;
    int max_seq_len = 512;
    int pretrain_epochs = 3;
    double pretrain_lr = 3e-3;
  } backbone;

  struct Adapter {
    int n_experts = 4;
    int top_k = 1;
    int d_k = 8;
    double alpha = 0.01;
    bool balance_average = false;  // average the balance term across modules
  } adapter;

  struct Training {
    int epochs = 2;
    double lr = 1e-3;
    double clip = 1.0;
  } training;

  struct Inference {
    int beam_width = 20;
    double lambda = 0.1;
    int max_len = 8;
  } inference;

  struct Ablation {
    bool disable_st_moe = false;
    bool disable_ea_moe = false;
    bool disable_cma_moe = false;
    bool disable_hybrid_score = false;
    bool single_adapter_mode = false;
  } ablation;

  std::uint64_t seed = 0;

  void validate() const;
  AdapterOptions adapter_options() const;
  std::string to_json() const;

  static PipelineConfig from_json_file(const std::string& path);
  static PipelineConfig from_json_text(const std::string& text);
  // "a.b.c=value" override; throws config_error on unknown keys.
  void apply_override(const std::string& assignment);
};

}  // namespace stk
