#include "stk/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace stk {

void BackboneConfig::validate() const {
  if (vocab_size < 1) throw config_error("backbone: vocab_size must be set");
  if (d_t % n_heads != 0) throw config_error("backbone: d_t must be divisible by n_heads");
  if (n_layers < 1 || d_ffn < 1 || max_seq_len < 1)
    throw config_error("backbone: invalid dimensions");
  if (top_k > n_experts) throw config_error("backbone: top_k exceeds n_experts");
}

ModelState ModelState::init(const BackboneConfig& cfg) {
  cfg.validate();
  ModelState state;
  state.cfg = cfg;
  Rng rng(mix_seed(cfg.seed, 0xBACB0E));
  const double se = 0.08;
  const double sw = 1.0 / std::sqrt(static_cast<double>(cfg.d_t));
  state.token_embedding = Tensor::uniform({cfg.vocab_size, cfg.d_t}, -se, se, rng, true);
  for (int l = 0; l < cfg.n_layers; ++l) {
    BackboneLayer layer;
    layer.ln1 = {Tensor::full({cfg.d_t}, 1.0, true), Tensor::zeros({cfg.d_t}, true)};
    layer.ln2 = {Tensor::full({cfg.d_t}, 1.0, true), Tensor::zeros({cfg.d_t}, true)};
    layer.attn.wq = Tensor::uniform({cfg.d_t, cfg.d_t}, -sw, sw, rng, true);
    layer.attn.wk = Tensor::uniform({cfg.d_t, cfg.d_t}, -sw, sw, rng, true);
    layer.attn.wv = Tensor::uniform({cfg.d_t, cfg.d_t}, -sw, sw, rng, true);
    layer.attn.wo = Tensor::uniform({cfg.d_t, cfg.d_t}, -sw, sw, rng, true);
    layer.ffn.w1 = Tensor::uniform({cfg.d_t, cfg.d_ffn}, -sw, sw, rng, true);
    layer.ffn.b1 = Tensor::zeros({cfg.d_ffn}, true);
    layer.ffn.w2 =
        Tensor::uniform({cfg.d_ffn, cfg.d_t}, -1.0 / std::sqrt(static_cast<double>(cfg.d_ffn)),
                        1.0 / std::sqrt(static_cast<double>(cfg.d_ffn)), rng, true);
    layer.ffn.b2 = Tensor::zeros({cfg.d_t}, true);
    state.layers.push_back(std::move(layer));
  }
  state.ln_final = {Tensor::full({cfg.d_t}, 1.0, true), Tensor::zeros({cfg.d_t}, true)};
  Rng arng(mix_seed(cfg.seed, 0xADA77E8));
  for (int l = 0; l < cfg.n_layers; ++l)
    state.adapters.push_back(
        AdapterLayer::init(cfg.d_t, cfg.d_g, cfg.d_k, cfg.n_experts, cfg.top_k, arng));
  return state;
}

std::vector<Parameter> ModelState::backbone_parameters() const {
  std::vector<Parameter> out;
  out.push_back({"backbone.token_embedding", token_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "backbone.layer" + std::to_string(l) + ".";
    const auto& layer = layers[l];
    out.push_back({p + "ln1.gain", layer.ln1.gain});
    out.push_back({p + "ln1.bias", layer.ln1.bias});
    out.push_back({p + "ln2.gain", layer.ln2.gain});
    out.push_back({p + "ln2.bias", layer.ln2.bias});
    out.push_back({p + "attn.wq", layer.attn.wq});
    out.push_back({p + "attn.wk", layer.attn.wk});
    out.push_back({p + "attn.wv", layer.attn.wv});
    out.push_back({p + "attn.wo", layer.attn.wo});
    out.push_back({p + "ffn.w1", layer.ffn.w1});
    out.push_back({p + "ffn.b1", layer.ffn.b1});
    out.push_back({p + "ffn.w2", layer.ffn.w2});
    out.push_back({p + "ffn.b2", layer.ffn.b2});
  }
  out.push_back({"backbone.ln_final.gain", ln_final.gain});
  out.push_back({"backbone.ln_final.bias", ln_final.bias});
  return out;
}

std::vector<Parameter> ModelState::adapter_parameters() const {
  std::vector<Parameter> out;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    auto ps = adapters[l].parameters("adapter" + std::to_string(l) + ".");
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<Parameter> ModelState::all_parameters() const {
  auto out = backbone_parameters();
  auto ad = adapter_parameters();
  out.insert(out.end(), ad.begin(), ad.end());
  return out;
}

void ModelState::set_backbone_trainable(bool trainable) {
  for (auto& p : backbone_parameters()) p.tensor.set_requires_grad(trainable);
}
void ModelState::set_adapters_trainable(bool trainable) {
  for (auto& p : adapter_parameters()) p.tensor.set_requires_grad(trainable);
}

std::vector<double> position_encoding_row(int pos, int d_t) {
  std::vector<double> row(d_t);
  for (int i = 0; i < d_t; i += 2) {
    const double denom = std::pow(10000.0, static_cast<double>(i) / d_t);
    row[i] = std::sin(pos / denom);
    if (i + 1 < d_t) row[i + 1] = std::cos(pos / denom);
  }
  return row;
}

namespace {

Tensor position_encoding(int len, int d_t) {
  Tensor pe = Tensor::zeros({len, d_t});
  for (int p = 0; p < len; ++p) {
    const auto row = position_encoding_row(p, d_t);
    std::copy(row.begin(), row.end(), pe.data() + static_cast<std::size_t>(p) * d_t);
  }
  return pe;
}

Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, int n_heads,
                            const Tensor& mask, Tensor* k_out = nullptr,
                            Tensor* v_out = nullptr) {
  const int d_t = x.cols();
  const int dh = d_t / n_heads;
  Tensor q = matmul(x, w.wq);
  Tensor k = matmul(x, w.wk);
  Tensor v = matmul(x, w.wv);
  if (k_out) *k_out = k;
  if (v_out) *v_out = v;
  Tensor heads;
  for (int h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor oh = scaled_dot_attention(qh, kh, vh, &mask);
    heads = h == 0 ? oh : concat_cols(heads, oh);
  }
  return matmul(heads, w.wo);
}

// Text-independent CMA output row for one layer (graph keys/values with a
// single row make the attention weights exactly 1).
std::vector<double> cma_row_values(const AdapterLayer& layer, const Tensor& h_g,
                                   bool disabled) {
  const int d_t = layer.fusion_b.cols();
  std::vector<double> row(d_t, 0.0);
  if (disabled) return row;
  NoGradGuard ng;
  RouteResult r = route(layer.cma_router_w, layer.cma_router_b, h_g, layer.top_k);
  for (int j = 0; j < layer.n_experts; ++j) {
    const double wgt = r.gate_topk.at(0, j);
    if (wgt == 0.0) continue;
    Tensor v = matmul(h_g, layer.cma_experts[j].w_v);
    Tensor o = matmul(v, layer.cma_experts[j].w_o);
    for (int c = 0; c < d_t; ++c) row[c] += wgt * o.at(0, c);
  }
  return row;
}

}  // namespace

Tensor model_forward(const ModelState& state, const std::vector<int>& tokens,
                     const std::vector<int>& route_pos, const Tensor& h_g0,
                     const ForwardOptions& opts, RoutingStatsCollector* stats,
                     ForwardTrace* trace) {
  const auto& cfg = state.cfg;
  const int T = static_cast<int>(tokens.size());
  if (T < 1) throw validation_error("model_forward: empty token sequence");
  if (T > cfg.max_seq_len)
    throw validation_error("model_forward: sequence length " + std::to_string(T) +
                           " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  for (int tok : tokens)
    if (tok < 0 || tok >= cfg.vocab_size) throw validation_error("model_forward: token out of vocab");
  if (opts.adapters_enabled && static_cast<int>(route_pos.size()) != T)
    throw validation_error("model_forward: route_pos must match sequence length");

  if (trace) {
    trace->layers.assign(cfg.n_layers, {});
    trace->prompt_len = T;
  }

  Tensor x = add(embedding(state.token_embedding, tokens), position_encoding(T, cfg.d_t));
  Tensor mask = causal_mask(T);
  Tensor h_g = h_g0;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& layer = state.layers[l];
    Tensor k_cache, v_cache;
    Tensor attn = multi_head_attention(layer_norm(x, layer.ln1.gain, layer.ln1.bias), layer.attn,
                                       cfg.n_heads, mask, trace ? &k_cache : nullptr,
                                       trace ? &v_cache : nullptr);
    Tensor h_attn = add(x, attn);
    Tensor f_in = layer_norm(h_attn, layer.ln2.gain, layer.ln2.bias);
    Tensor h_ffn = add_rowwise(
        matmul(relu(add_rowwise(matmul(f_in, layer.ffn.w1), layer.ffn.b1)), layer.ffn.w2),
        layer.ffn.b2);
    if (opts.adapters_enabled) {
      if (trace) {
        trace->layers[l].k_cache = k_cache.values();
        trace->layers[l].v_cache = v_cache.values();
        trace->layers[l].cma_row =
            cma_row_values(state.adapters[l], h_g, opts.ablation.disable_cma_moe);
      }
      auto out = adapter_layer_forward(state.adapters[l], h_attn, h_ffn, h_g, h_g0, route_pos,
                                       opts.ablation, l, stats);
      x = out.h_text_next;
      h_g = out.h_g_next;
    } else {
      if (trace) {
        trace->layers[l].k_cache = k_cache.values();
        trace->layers[l].v_cache = v_cache.values();
        trace->layers[l].cma_row.assign(cfg.d_t, 0.0);
      }
      x = add(h_attn, h_ffn);
    }
  }
  x = layer_norm(x, state.ln_final.gain, state.ln_final.bias);
  return matmul_nt(x, state.token_embedding);
}

double balance_term(const RoutingStatsCollector::Record& record) {
  const int n = record.gate_full.cols();
  double term = 0.0;
  for (int j = 0; j < n; ++j) {
    double p = 0.0;
    for (int i = 0; i < record.gate_full.rows(); ++i) p += record.gate_full.at(i, j);
    p /= record.rows;
    const double f = static_cast<double>(record.assignment_counts[j]) / record.rows;
    term += f * p;
  }
  return term;
}

LossParts compute_loss(const Tensor& logits, const std::vector<int>& tokens, int target_start,
                       int target_len, const RoutingStatsCollector* stats, double alpha,
                       bool balance_average) {
  if (target_len < 1) throw validation_error("compute_loss: empty target");
  if (target_start < 1 || target_start + target_len > static_cast<int>(tokens.size()))
    throw validation_error("compute_loss: target span outside the sequence");
  std::vector<int> positions, targets;
  for (int i = 0; i < target_len; ++i) {
    positions.push_back(target_start - 1 + i);  // position predicting token i
    targets.push_back(tokens[target_start + i]);
  }
  Tensor picked = pick_elems(log_softmax_rows(gather_rows(logits, positions)), targets);
  Tensor ce = scale(sum_all(picked), -1.0);

  LossParts parts;
  parts.cross_entropy = ce.item();
  Tensor total = ce;
  if (stats && alpha != 0.0) {
    Tensor balance = Tensor::zeros({1});
    for (const auto& rec : stats->records) {
      const int n = rec.gate_full.cols();
      Tensor f = Tensor::zeros({n});
      for (int j = 0; j < n; ++j)
        f.data()[j] = static_cast<double>(rec.assignment_counts[j]) / rec.rows;
      Tensor p = mean_rows(rec.gate_full);
      balance = add(balance, sum_all(hadamard(p, f)));
    }
    if (balance_average && !stats->records.empty())
      balance = scale(balance, 1.0 / static_cast<double>(stats->records.size()));
    parts.balance = balance.item();
    total = add(total, scale(balance, alpha));
  }
  parts.total = total;
  return parts;
}

namespace {
void run_training(std::vector<Parameter> trainable, const std::vector<TrainExample>& dataset,
                  const ModelState& state, const ForwardOptions& opts, int epochs, double lr,
                  double weight_decay, double clip_norm, double alpha, bool balance_average,
                  double warmup_ratio, std::uint64_t seed, std::ostream* log) {
  if (dataset.empty()) throw config_error("training: dataset is empty");
  AdamW opt(std::move(trainable), lr, weight_decay);
  Rng rng(mix_seed(seed, 0x7EA2));
  const std::int64_t total_steps = static_cast<std::int64_t>(epochs) * dataset.size();
  const std::int64_t warmup_steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(warmup_ratio * total_steps));
  std::int64_t step = 0;
  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int idx : order) {
      const auto& ex = dataset[idx];
      ++step;
      opt.set_lr(step < warmup_steps ? lr * static_cast<double>(step) / warmup_steps : lr);
      RoutingStatsCollector stats;
      Tensor logits = model_forward(state, ex.tokens, ex.route_pos, ex.h_g0, opts,
                                    opts.adapters_enabled ? &stats : nullptr);
      LossParts loss = compute_loss(logits, ex.tokens, ex.target_start, ex.target_len,
                                    opts.adapters_enabled ? &stats : nullptr, alpha,
                                    balance_average);
      if (!std::isfinite(loss.total.item()))
        throw numeric_error("training: non-finite loss at step " + std::to_string(step) +
                            " (ce=" + std::to_string(loss.cross_entropy) + ")");
      opt.zero_grad();
      loss.total.backward();
      const double gnorm = clip_grad_norm(opt.params(), clip_norm);
      opt.step();
      if (log)
        (*log) << "step=" << step << " ce=" << loss.cross_entropy << " balance=" << loss.balance
               << " grad_norm=" << gnorm << "\n";
      // Routing statistics reset with `stats` going out of scope.
    }
  }
}
}  // namespace

void train_adapters(ModelState& state, const std::vector<TrainExample>& dataset,
                    const TrainConfig& config, std::ostream* log) {
  state.set_backbone_trainable(false);
  state.set_adapters_trainable(true);
  ForwardOptions opts;
  opts.adapters_enabled = true;
  opts.ablation = config.ablation;
  run_training(state.adapter_parameters(), dataset, state, opts, config.epochs,
               config.learning_rate, config.weight_decay, config.clip_norm, config.alpha,
               config.balance_average, config.warmup_ratio, config.seed, log);
}

void pretrain_backbone(ModelState& state, const std::vector<TrainExample>& dataset,
                       const PretrainConfig& config, std::ostream* log) {
  state.set_backbone_trainable(true);
  state.set_adapters_trainable(false);
  // Next-token prediction over the whole sequence: treat everything after
  // the first token as target.
  std::vector<TrainExample> shifted = dataset;
  for (auto& ex : shifted) {
    ex.target_start = 1;
    ex.target_len = static_cast<int>(ex.tokens.size()) - 1;
  }
  ForwardOptions opts;
  opts.adapters_enabled = false;
  run_training(state.backbone_parameters(), shifted, state, opts, config.epochs,
               config.learning_rate, config.weight_decay, config.clip_norm, /*alpha=*/0.0,
               /*balance_average=*/false, /*warmup_ratio=*/0.01, config.seed, log);
  state.set_backbone_trainable(false);
}

}  // namespace stk
