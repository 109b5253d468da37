#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "stk/adapter.hpp"
#include "stk/tensor.hpp"

namespace stk {

struct BackboneConfig {
  int vocab_size = 0;
  int d_t = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ffn = 128;
  int max_seq_len = 512;
  int n_experts = 4;
  int top_k = 1;
  int d_k = 8;
  int d_g = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LayerNormWeights {
  Tensor gain, bias;
};
struct AttentionWeights {
  Tensor wq, wk, wv, wo;  // [d_t, d_t] each
};
struct FfnWeights {
  Tensor w1, b1, w2, b2;  // [d_t,d_ffn],[d_ffn],[d_ffn,d_t],[d_t]
};
struct BackboneLayer {
  LayerNormWeights ln1, ln2;
  AttentionWeights attn;
  FfnWeights ffn;
};

// Miniature decoder-only transformer with one STK adapter per layer. The
// output head is weight-tied to the token embedding.
struct ModelState {
  BackboneConfig cfg;
  Tensor token_embedding;  // [vocab, d_t]
  std::vector<BackboneLayer> layers;
  LayerNormWeights ln_final;
  std::vector<AdapterLayer> adapters;

  static ModelState init(const BackboneConfig& cfg);
  std::vector<Parameter> backbone_parameters() const;
  std::vector<Parameter> adapter_parameters() const;
  std::vector<Parameter> all_parameters() const;
  void set_backbone_trainable(bool trainable);
  void set_adapters_trainable(bool trainable);
};

// Fixed sinusoidal position encoding row for `pos`.
std::vector<double> position_encoding_row(int pos, int d_t);

struct ForwardOptions {
  bool adapters_enabled = true;
  AdapterOptions ablation;
};

// Records the text-independent per-layer state needed for incremental
// decoding: attention K/V caches for the prompt and the CMA output row.
struct ForwardTrace {
  struct LayerTrace {
    std::vector<double> k_cache;   // [T, d_t]
    std::vector<double> v_cache;   // [T, d_t]
    std::vector<double> cma_row;   // [d_t]
  };
  std::vector<LayerTrace> layers;
  int prompt_len = 0;
};

// Causal transformer forward over `tokens`; `h_g0` is the query's initial
// graph representation [1, 2*d_g]; `route_pos` carries the event-aware
// routing positions (see ea_moe_forward). Returns logits [T, vocab].
Tensor model_forward(const ModelState& state, const std::vector<int>& tokens,
                     const std::vector<int>& route_pos, const Tensor& h_g0,
                     const ForwardOptions& opts, RoutingStatsCollector* stats = nullptr,
                     ForwardTrace* trace = nullptr);

// Composite objective: teacher-forced cross-entropy over the target span
// plus alpha * sum_j f_j p_j accumulated across layers and MoE modules.
struct LossParts {
  Tensor total;
  double cross_entropy = 0.0;
  double balance = 0.0;
};
LossParts compute_loss(const Tensor& logits, const std::vector<int>& tokens, int target_start,
                       int target_len, const RoutingStatsCollector* stats, double alpha,
                       bool balance_average = false);

// Per-expert balance statistics of one record: sum_j f_j p_j.
double balance_term(const RoutingStatsCollector::Record& record);

struct TrainExample {
  std::vector<int> tokens;     // instruction followed by the target answer
  std::vector<int> route_pos;  // per token
  Tensor h_g0;                 // frozen graph representation
  int target_start = 0;        // first target token position
  int target_len = 0;
};

struct TrainConfig {
  int epochs = 2;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double alpha = 0.01;  // balance coefficient
  bool balance_average = false;  // average instead of summing across modules
  double warmup_ratio = 0.01;
  std::uint64_t seed = 0;
  AdapterOptions ablation;
};

// Fine-tunes adapter parameters only; backbone and graph inputs stay frozen.
// Logs "step ce balance grad_norm" lines when `log` is given.
void train_adapters(ModelState& state, const std::vector<TrainExample>& dataset,
                    const TrainConfig& config, std::ostream* log = nullptr);

// Next-token pre-training of the frozen-to-be backbone over plain
// instruction sequences (adapters detached, no graph input).
struct PretrainConfig {
  int epochs = 3;
  double learning_rate = 3e-3;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};
void pretrain_backbone(ModelState& state, const std::vector<TrainExample>& dataset,
                       const PretrainConfig& config, std::ostream* log = nullptr);

}  // namespace stk
