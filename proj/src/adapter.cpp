#include "stk/adapter.hpp"

#include <algorithm>
#include <numeric>

namespace stk {

namespace {
constexpr double kRouterInit = 0.02;
}

AdapterLayer AdapterLayer::init(int d_t, int d_g, int d_k, int n_experts, int top_k, Rng& rng) {
  if (n_experts < 1 || top_k < 1 || top_k > n_experts)
    throw config_error("adapter: need n >= k >= 1");
  if (d_k < 1) throw config_error("adapter: d_k must be >= 1");
  AdapterLayer layer;
  layer.n_experts = n_experts;
  layer.top_k = top_k;
  layer.d_k = d_k;
  const int dg2 = 2 * d_g;

  auto u = [&](std::vector<int> shape) {
    return Tensor::uniform(std::move(shape), -kRouterInit, kRouterInit, rng, true);
  };
  auto bottleneck = [&](int d_in) {
    BottleneckExpert e;
    e.w_down = u({d_in, d_k});
    e.b_down = Tensor::zeros({d_k}, true);
    e.w_up = Tensor::zeros({d_k, d_in}, true);  // identity at init
    e.b_up = Tensor::zeros({d_in}, true);
    return e;
  };

  layer.st_router_w = u({dg2, n_experts});
  layer.st_router_b = Tensor::zeros({n_experts}, true);
  layer.ea_router_w = u({d_t, n_experts});
  layer.ea_router_b = Tensor::zeros({n_experts}, true);
  layer.cma_router_w = u({dg2, n_experts});
  layer.cma_router_b = Tensor::zeros({n_experts}, true);
  for (int i = 0; i < n_experts; ++i) {
    layer.st_experts.push_back(bottleneck(dg2));
    layer.ea_experts.push_back(bottleneck(d_t));
    AttentionExpert a;
    a.w_q = u({d_t, d_k});
    a.w_k = u({dg2, d_k});
    a.w_v = u({dg2, d_k});
    a.w_o = Tensor::zeros({d_k, d_t}, true);  // identity at init
    layer.cma_experts.push_back(std::move(a));
  }
  layer.fusion_w = u({2 * d_t, d_t});
  layer.fusion_b = Tensor::zeros({d_t}, true);
  return layer;
}

std::vector<Parameter> AdapterLayer::parameters(const std::string& prefix) const {
  std::vector<Parameter> out;
  auto add = [&](const std::string& name, const Tensor& t) { out.push_back({prefix + name, t}); };
  add("st.router.w", st_router_w);
  add("st.router.b", st_router_b);
  add("ea.router.w", ea_router_w);
  add("ea.router.b", ea_router_b);
  add("cma.router.w", cma_router_w);
  add("cma.router.b", cma_router_b);
  for (int i = 0; i < n_experts; ++i) {
    const std::string si = std::to_string(i);
    add("st.expert" + si + ".w_down", st_experts[i].w_down);
    add("st.expert" + si + ".b_down", st_experts[i].b_down);
    add("st.expert" + si + ".w_up", st_experts[i].w_up);
    add("st.expert" + si + ".b_up", st_experts[i].b_up);
    add("ea.expert" + si + ".w_down", ea_experts[i].w_down);
    add("ea.expert" + si + ".b_down", ea_experts[i].b_down);
    add("ea.expert" + si + ".w_up", ea_experts[i].w_up);
    add("ea.expert" + si + ".b_up", ea_experts[i].b_up);
    add("cma.expert" + si + ".w_q", cma_experts[i].w_q);
    add("cma.expert" + si + ".w_k", cma_experts[i].w_k);
    add("cma.expert" + si + ".w_v", cma_experts[i].w_v);
    add("cma.expert" + si + ".w_o", cma_experts[i].w_o);
  }
  add("fusion.w", fusion_w);
  add("fusion.b", fusion_b);
  return out;
}

const char* moe_module_name(MoeModule m) {
  switch (m) {
    case MoeModule::ST:
      return "st";
    case MoeModule::EA:
      return "ea";
    case MoeModule::CMA:
      return "cma";
  }
  return "?";
}

RouteResult route(const Tensor& router_w, const Tensor& router_b, const Tensor& input, int k) {
  const int n = router_w.cols();
  if (k > n)
    throw config_error("route: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  RouteResult res;
  res.gate_full = softmax(linear(input, router_w, &router_b), -1);
  res.gate_topk = topk_renorm(res.gate_full, k);
  const int rows = res.gate_full.rows();
  res.assignment_counts.assign(n, 0);
  res.mean_weights.assign(n, 0.0);
  res.rows.resize(rows);
  for (int i = 0; i < rows; ++i) {
    RoutingDecision& d = res.rows[i];
    d.gate_full.resize(n);
    for (int j = 0; j < n; ++j) {
      d.gate_full[j] = res.gate_full.at(i, j);
      res.mean_weights[j] += d.gate_full[j] / rows;
    }
    for (int j = 0; j < n; ++j)
      if (res.gate_topk.at(i, j) > 0.0) d.active.push_back(j);
    // topk_renorm keeps ties to the lower index, so active is the exact
    // top-k set; renormalized weights are read back from the tensor.
    for (int j : d.active) d.gate_active.push_back(res.gate_topk.at(i, j));
    d.top_choice = static_cast<int>(
        std::max_element(d.gate_full.begin(), d.gate_full.end()) - d.gate_full.begin());
    ++res.assignment_counts[d.top_choice];
  }
  return res;
}

void RoutingStatsCollector::add(int layer, MoeModule module, const RouteResult& r) {
  records.push_back({layer, module, r.gate_full, r.assignment_counts,
                     static_cast<std::int64_t>(r.gate_full.rows())});
}

Tensor expert_forward(const BottleneckExpert& expert, const Tensor& x) {
  return linear(relu(linear(x, expert.w_down, &expert.b_down)), expert.w_up, &expert.b_up);
}

Tensor st_moe_forward(const AdapterLayer& layer, const Tensor& h_g, int layer_idx,
                      RoutingStatsCollector* stats) {
  RouteResult r = route(layer.st_router_w, layer.st_router_b, h_g, layer.top_k);
  if (stats) stats->add(layer_idx, MoeModule::ST, r);
  Tensor out = Tensor::zeros(h_g.shape());
  for (int j = 0; j < layer.n_experts; ++j) {
    if (r.gate_topk.at(0, j) == 0.0) continue;
    Tensor w = pick_elems(r.gate_topk, {j});  // [1]
    out = add(out, mul_scalar_t(expert_forward(layer.st_experts[j], h_g), w));
  }
  return out;
}

Tensor ea_moe_forward(const AdapterLayer& layer, const Tensor& h_text,
                      const std::vector<int>& route_pos, int layer_idx,
                      RoutingStatsCollector* stats) {
  const int rows = h_text.rows();
  if (static_cast<int>(route_pos.size()) != rows)
    throw validation_error("ea_moe: route_pos must cover every token");
  for (int p : route_pos)
    if (p < 0 || p >= rows)
      throw validation_error("ea_moe: time-token position " + std::to_string(p) +
                             " outside the sequence");
  // All tokens of one event route on their event's time-token hidden state.
  Tensor router_input = gather_rows(h_text, route_pos);
  RouteResult r = route(layer.ea_router_w, layer.ea_router_b, router_input, layer.top_k);
  if (stats) stats->add(layer_idx, MoeModule::EA, r);
  Tensor out = Tensor::zeros(h_text.shape());
  for (int j = 0; j < layer.n_experts; ++j) {
    bool used = false;
    for (int i = 0; i < rows && !used; ++i) used = r.gate_topk.at(i, j) > 0.0;
    if (!used) continue;
    Tensor w = slice_cols(r.gate_topk, j, j + 1);  // [rows, 1]
    out = add(out, scale_rows(expert_forward(layer.ea_experts[j], h_text), w));
  }
  return out;
}

Tensor cma_moe_forward(const AdapterLayer& layer, const Tensor& h_text, const Tensor& h_g,
                       int layer_idx, RoutingStatsCollector* stats) {
  RouteResult r = route(layer.cma_router_w, layer.cma_router_b, h_g, layer.top_k);
  if (stats) stats->add(layer_idx, MoeModule::CMA, r);
  Tensor out = Tensor::zeros(h_text.shape());
  for (int j = 0; j < layer.n_experts; ++j) {
    if (r.gate_topk.at(0, j) == 0.0) continue;
    const auto& e = layer.cma_experts[j];
    Tensor q = matmul(h_text, e.w_q);
    Tensor k = matmul(h_g, e.w_k);
    Tensor v = matmul(h_g, e.w_v);
    Tensor attn = scaled_dot_attention(q, k, v);
    Tensor w = pick_elems(r.gate_topk, {j});
    out = add(out, mul_scalar_t(matmul(attn, e.w_o), w));
  }
  return out;
}

Tensor adaptive_fusion(const AdapterLayer& layer, const Tensor& h_cma, const Tensor& h_text_moe) {
  if (h_cma.shape() != h_text_moe.shape())
    throw dim_error("adaptive_fusion: pathway shapes differ");
  Tensor g = sigmoid(linear(concat_cols(h_cma, h_text_moe), layer.fusion_w, &layer.fusion_b));
  Tensor one_minus_g = add_scalar(scale(g, -1.0), 1.0);
  return add(hadamard(g, h_cma), hadamard(one_minus_g, h_text_moe));
}

AdapterForwardOut adapter_layer_forward(const AdapterLayer& layer, const Tensor& h_text_attn,
                                        const Tensor& h_ffn, const Tensor& h_g_prev,
                                        const Tensor& h_g0, const std::vector<int>& route_pos,
                                        const AdapterOptions& opts, int layer_idx,
                                        RoutingStatsCollector* stats) {
  Tensor h_ea = opts.disable_ea_moe
                    ? Tensor::zeros(h_text_attn.shape())
                    : ea_moe_forward(layer, h_text_attn, route_pos, layer_idx, stats);
  Tensor h_cma = opts.disable_cma_moe
                     ? Tensor::zeros(h_text_attn.shape())
                     : cma_moe_forward(layer, h_text_attn, h_g_prev, layer_idx, stats);
  Tensor h_enhanced = adaptive_fusion(layer, h_cma, h_ea);

  AdapterForwardOut out;
  out.h_text_next = add(add(h_text_attn, h_enhanced), h_ffn);
  Tensor st = opts.disable_st_moe ? Tensor::zeros(h_g_prev.shape())
                                  : st_moe_forward(layer, h_g_prev, layer_idx, stats);
  out.h_g_next = add(st, h_g0);
  return out;
}

}  // namespace stk
