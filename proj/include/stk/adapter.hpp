#pragma once

#include <cstdint>
#include <vector>

#include "stk/tensor.hpp"

namespace stk {

// One bottleneck expert: up(relu(down(x))), operating in a d_k subspace.
struct BottleneckExpert {
  Tensor w_down, b_down;  // [d_in, d_k], [d_k]
  Tensor w_up, b_up;      // [d_k, d_in], [d_in]  (zero-initialized)
};

// One TKG-guided attention expert (text queries, graph keys/values).
struct AttentionExpert {
  Tensor w_q;  // [d_t, d_k]
  Tensor w_k;  // [2*d_g, d_k]
  Tensor w_v;  // [2*d_g, d_k]
  Tensor w_o;  // [d_k, d_t]  (zero-initialized)
};

// Parameter bundle for the three MoE modules and the fusion gate at one
// backbone layer.
struct AdapterLayer {
  int n_experts = 4;
  int top_k = 1;
  int d_k = 8;

  Tensor st_router_w, st_router_b;  // [2*d_g, n], [n]
  std::vector<BottleneckExpert> st_experts;
  Tensor ea_router_w, ea_router_b;  // [d_t, n], [n]
  std::vector<BottleneckExpert> ea_experts;
  Tensor cma_router_w, cma_router_b;  // [2*d_g, n], [n]
  std::vector<AttentionExpert> cma_experts;
  Tensor fusion_w, fusion_b;  // [2*d_t, d_t], [d_t]

  static AdapterLayer init(int d_t, int d_g, int d_k, int n_experts, int top_k, Rng& rng);
  std::vector<Parameter> parameters(const std::string& prefix) const;
};

// Which MoE modules produce the row's output; outputs of disabled modules
// are forced to zero.
struct AdapterOptions {
  bool disable_st_moe = false;
  bool disable_ea_moe = false;
  bool disable_cma_moe = false;
};

// Per-row routing outcome.
struct RoutingDecision {
  std::vector<double> gate_full;    // softmax over all n experts
  std::vector<int> active;          // top-k expert indices, ascending
  std::vector<double> gate_active;  // renormalized weights, aligned with active
  int top_choice = 0;               // argmax of gate_full (ties: lower index)
};

struct RouteResult {
  Tensor gate_full;  // [rows, n]
  Tensor gate_topk;  // [rows, n], zero outside the active set
  std::vector<RoutingDecision> rows;
  std::vector<std::int64_t> assignment_counts;  // top-choice counts per expert
  std::vector<double> mean_weights;             // mean gate_full per expert
};

RouteResult route(const Tensor& router_w, const Tensor& router_b, const Tensor& input, int k);

enum class MoeModule { ST = 0, EA = 1, CMA = 2 };
const char* moe_module_name(MoeModule m);

// Gate tensors and counts gathered during one forward pass; feeds the
// load-balancing loss and the routing-statistics export.
struct RoutingStatsCollector {
  struct Record {
    int layer;
    MoeModule module;
    Tensor gate_full;
    std::vector<std::int64_t> assignment_counts;
    std::int64_t rows;
  };
  std::vector<Record> records;

  void add(int layer, MoeModule module, const RouteResult& r);
  void clear() { records.clear(); }
};

Tensor expert_forward(const BottleneckExpert& expert, const Tensor& x);

// ST-MoE: refine the evolving graph representation. h_g: [1, 2*d_g].
Tensor st_moe_forward(const AdapterLayer& layer, const Tensor& h_g, int layer_idx,
                      RoutingStatsCollector* stats);

// EA-MoE: event-aware routing. route_pos[j] is the position whose hidden
// state drives token j's routing (its event's time token inside a span,
// j itself outside).
Tensor ea_moe_forward(const AdapterLayer& layer, const Tensor& h_text,
                      const std::vector<int>& route_pos, int layer_idx,
                      RoutingStatsCollector* stats);

// CMA-MoE: TKG-guided attention experts; the router is driven by h_g and is
// shared across all text tokens.
Tensor cma_moe_forward(const AdapterLayer& layer, const Tensor& h_text, const Tensor& h_g,
                       int layer_idx, RoutingStatsCollector* stats);

// Sigmoid-gated elementwise convex combination of the two text pathways.
Tensor adaptive_fusion(const AdapterLayer& layer, const Tensor& h_cma, const Tensor& h_text_moe);

// Full per-layer update (text residual and graph residual):
//   h_text_next = h_text_attn + fusion(cma, ea) + h_ffn
//   h_g_next    = st_moe(h_g_prev) + h_g0
struct AdapterForwardOut {
  Tensor h_text_next;
  Tensor h_g_next;
};
AdapterForwardOut adapter_layer_forward(const AdapterLayer& layer, const Tensor& h_text_attn,
                                        const Tensor& h_ffn, const Tensor& h_g_prev,
                                        const Tensor& h_g0, const std::vector<int>& route_pos,
                                        const AdapterOptions& opts, int layer_idx,
                                        RoutingStatsCollector* stats);

}  // namespace stk
