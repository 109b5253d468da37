#include "stk/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "stk/kernels.hpp"

namespace stk {

namespace {

using Vec = std::vector<double>;

Vec matvec(const Vec& x, const Tensor& w) {  // x:[din], w:[din,dout]
  Vec y(w.cols());
  kernels::matmul_nn(x.data(), w.data(), y.data(), 1, w.rows(), w.cols());
  return y;
}

Vec vec_linear(const Vec& x, const Tensor& w, const Tensor& b) {
  Vec y = matvec(x, w);
  for (int j = 0; j < w.cols(); ++j) y[j] += b.data()[j];
  return y;
}

Vec vec_ln(const Vec& x, const LayerNormWeights& ln, double eps = 1e-5) {
  const int c = static_cast<int>(x.size());
  double mu = 0.0;
  for (int j = 0; j < c; ++j) mu += x[j];
  mu /= c;
  double var = 0.0;
  for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
  var /= c;
  const double is = 1.0 / std::sqrt(var + eps);
  Vec y(c);
  for (int j = 0; j < c; ++j) y[j] = (x[j] - mu) * is * ln.gain.data()[j] + ln.bias.data()[j];
  return y;
}

void vec_softmax(Vec& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (auto& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (auto& v : x) v *= inv;
}

Vec vec_log_softmax(const Vec& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lse;
  return y;
}

// Mirrors topk_renorm: top-k entries (ties to the lower index) renormalized.
Vec vec_topk_renorm(const Vec& gate, int k) {
  const int n = static_cast<int>(gate.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gate[a] > gate[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  double s = 0.0;
  for (int a : order) s += gate[a];
  Vec out(n, 0.0);
  for (int a : order) out[a] = gate[a] / s;
  return out;
}

Vec vec_bottleneck(const Vec& x, const BottleneckExpert& e) {
  Vec h = vec_linear(x, e.w_down, e.b_down);
  for (auto& v : h) v = v > 0.0 ? v : 0.0;
  return vec_linear(h, e.w_up, e.b_up);
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const ModelState& state, const std::vector<int>& prompt,
                                       const std::vector<int>& prompt_route_pos,
                                       const Tensor& h_g0, const AdapterOptions& ablation)
    : state_(state), ablation_(ablation) {
  NoGradGuard ng;
  ForwardOptions opts;
  opts.adapters_enabled = true;
  opts.ablation = ablation;
  Tensor logits = model_forward(state, prompt, prompt_route_pos, h_g0, opts, nullptr, &trace_);
  const int T = static_cast<int>(prompt.size());
  Vec last(logits.cols());
  std::copy_n(logits.data() + static_cast<std::size_t>(T - 1) * logits.cols(), logits.cols(),
              last.begin());
  prompt_log_probs_ = vec_log_softmax(last);
}

std::vector<double> IncrementalDecoder::next_log_probs(const std::vector<int>& generated) {
  if (generated.empty()) return prompt_log_probs_;
  NoGradGuard ng;
  const auto& cfg = state_.cfg;
  const int P = trace_.prompt_len;
  const int dh = cfg.d_t / cfg.n_heads;
  if (P + static_cast<int>(generated.size()) > cfg.max_seq_len)
    throw validation_error("decode: sequence exceeds max_seq_len");

  // Per-layer K/V rows for the generated suffix, rebuilt per call so beams
  // can branch freely.
  std::vector<Vec> gen_k(cfg.n_layers), gen_v(cfg.n_layers);

  Vec x;
  for (std::size_t gi = 0; gi < generated.size(); ++gi) {
    const int tok = generated[gi];
    if (tok < 0 || tok >= cfg.vocab_size) throw validation_error("decode: token out of vocab");
    const int pos = P + static_cast<int>(gi);
    x = position_encoding_row(pos, cfg.d_t);
    const double* emb = state_.token_embedding.data() + static_cast<std::size_t>(tok) * cfg.d_t;
    for (int j = 0; j < cfg.d_t; ++j) x[j] += emb[j];

    for (int l = 0; l < cfg.n_layers; ++l) {
      const auto& layer = state_.layers[l];
      const Vec a_in = vec_ln(x, layer.ln1);
      const Vec q = matvec(a_in, layer.attn.wq);
      const Vec k = matvec(a_in, layer.attn.wk);
      const Vec v = matvec(a_in, layer.attn.wv);

      const int n_keys = P + static_cast<int>(gi) + 1;
      auto key_at = [&](int j, int h, int c) -> double {
        if (j < P) return trace_.layers[l].k_cache[static_cast<std::size_t>(j) * cfg.d_t + h * dh + c];
        if (j < P + static_cast<int>(gi))
          return gen_k[l][static_cast<std::size_t>(j - P) * cfg.d_t + h * dh + c];
        return k[h * dh + c];
      };
      auto val_at = [&](int j, int h, int c) -> double {
        if (j < P) return trace_.layers[l].v_cache[static_cast<std::size_t>(j) * cfg.d_t + h * dh + c];
        if (j < P + static_cast<int>(gi))
          return gen_v[l][static_cast<std::size_t>(j - P) * cfg.d_t + h * dh + c];
        return v[h * dh + c];
      };

      Vec heads(cfg.d_t);
      const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
      for (int h = 0; h < cfg.n_heads; ++h) {
        Vec scores(n_keys);
        for (int j = 0; j < n_keys; ++j) {
          double acc = 0.0;
          for (int c = 0; c < dh; ++c) acc += q[h * dh + c] * key_at(j, h, c);
          scores[j] = acc * inv_sqrt;
        }
        vec_softmax(scores);
        for (int c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (int j = 0; j < n_keys; ++j) acc += scores[j] * val_at(j, h, c);
          heads[h * dh + c] = acc;
        }
      }
      const Vec attn_out = matvec(heads, layer.attn.wo);
      Vec h_attn(cfg.d_t);
      for (int j = 0; j < cfg.d_t; ++j) h_attn[j] = x[j] + attn_out[j];

      const Vec f_in = vec_ln(h_attn, layer.ln2);
      Vec ff = vec_linear(f_in, layer.ffn.w1, layer.ffn.b1);
      for (auto& vv : ff) vv = vv > 0.0 ? vv : 0.0;
      const Vec h_ffn = vec_linear(ff, layer.ffn.w2, layer.ffn.b2);

      // Adapter pathway. Generated tokens sit outside any event span, so
      // EA routing uses the token's own hidden state; the CMA contribution
      // is the precomputed text-independent row.
      const auto& ad = state_.adapters[l];
      Vec h_ea(cfg.d_t, 0.0);
      if (!ablation_.disable_ea_moe) {
        Vec gate = vec_linear(h_attn, ad.ea_router_w, ad.ea_router_b);
        vec_softmax(gate);
        const Vec w = vec_topk_renorm(gate, ad.top_k);
        for (int j = 0; j < ad.n_experts; ++j) {
          if (w[j] == 0.0) continue;
          const Vec e = vec_bottleneck(h_attn, ad.ea_experts[j]);
          for (int c = 0; c < cfg.d_t; ++c) h_ea[c] += w[j] * e[c];
        }
      }
      const Vec& cma = trace_.layers[l].cma_row;
      Vec fin(2 * cfg.d_t);
      std::copy(cma.begin(), cma.end(), fin.begin());
      std::copy(h_ea.begin(), h_ea.end(), fin.begin() + cfg.d_t);
      Vec g = vec_linear(fin, ad.fusion_w, ad.fusion_b);
      for (auto& vv : g)
        vv = vv >= 0.0 ? 1.0 / (1.0 + std::exp(-vv)) : std::exp(vv) / (1.0 + std::exp(vv));
      for (int c = 0; c < cfg.d_t; ++c)
        x[c] = h_attn[c] + (g[c] * cma[c] + (1.0 - g[c]) * h_ea[c]) + h_ffn[c];

      gen_k[l].insert(gen_k[l].end(), k.begin(), k.end());
      gen_v[l].insert(gen_v[l].end(), v.begin(), v.end());
    }
  }

  const Vec xf = vec_ln(x, state_.ln_final);
  Vec logits(cfg.vocab_size);
  kernels::matmul_nt(xf.data(), state_.token_embedding.data(), logits.data(), 1, cfg.d_t,
                     cfg.vocab_size);
  return vec_log_softmax(logits);
}

// ---- beam search ----

namespace {
bool beam_less(const BeamCandidate& a, const BeamCandidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}
}  // namespace

std::vector<BeamCandidate> beam_search(SequenceScorer& scorer, int beam_width, int max_len,
                                       int end_token) {
  if (beam_width < 1) throw config_error("beam_search: beam width must be >= 1");
  if (max_len < 1) throw config_error("beam_search: max_len must be >= 1");
  const int vocab = scorer.vocab_size();
  const int expand = std::min(beam_width, vocab);

  std::vector<BeamCandidate> active{BeamCandidate{}};
  std::vector<BeamCandidate> finished;

  for (int step = 0; step < max_len && !active.empty(); ++step) {
    std::vector<BeamCandidate> pool;
    pool.reserve(active.size() * expand);
    for (const auto& beam : active) {
      const auto lp = scorer.next_log_probs(beam.tokens);
      std::vector<int> order(vocab);
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + expand, order.end(),
                        [&](int a, int b) { return lp[a] != lp[b] ? lp[a] > lp[b] : a < b; });
      for (int e = 0; e < expand; ++e) {
        BeamCandidate next = beam;
        next.tokens.push_back(order[e]);
        next.log_prob += lp[order[e]];
        pool.push_back(std::move(next));
      }
    }
    std::sort(pool.begin(), pool.end(), beam_less);
    if (static_cast<int>(pool.size()) > beam_width) pool.resize(beam_width);
    active.clear();
    for (auto& beam : pool) {
      if (end_token >= 0 && beam.tokens.back() == end_token)
        finished.push_back(std::move(beam));
      else
        active.push_back(std::move(beam));
    }
  }
  finished.insert(finished.end(), active.begin(), active.end());
  std::sort(finished.begin(), finished.end(), beam_less);
  if (static_cast<int>(finished.size()) > beam_width) finished.resize(beam_width);
  return finished;
}

void resolve_entities(std::vector<BeamCandidate>& candidates, const InstructionSequence& instr,
                      const SymbolVocab& vocab) {
  for (auto& c : candidates) {
    c.entity = -1;
    if (c.tokens.empty()) continue;
    if (vocab.token_class(c.tokens[0]) != SymbolVocab::Class::Index) continue;
    const auto ent = instr.entity_for_index(vocab.index_value(c.tokens[0]));
    if (ent) c.entity = *ent;
  }
}

std::vector<int> hybrid_rank(const std::vector<BeamCandidate>& candidates,
                             const std::vector<double>& tkg_dist, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw config_error("hybrid_rank: lambda must lie in [0,1]");
  const int ne = static_cast<int>(tkg_dist.size());

  // Softmax over resolved candidates, per-entity max.
  std::vector<const BeamCandidate*> resolved;
  for (const auto& c : candidates)
    if (c.entity >= 0 && c.entity < ne) resolved.push_back(&c);
  std::vector<double> s_llm(ne, 0.0);
  if (!resolved.empty()) {
    double mx = resolved[0]->log_prob;
    for (const auto* c : resolved) mx = std::max(mx, c->log_prob);
    double sum = 0.0;
    std::vector<double> w(resolved.size());
    for (std::size_t i = 0; i < resolved.size(); ++i) {
      w[i] = std::exp(resolved[i]->log_prob - mx);
      sum += w[i];
    }
    for (std::size_t i = 0; i < resolved.size(); ++i)
      s_llm[resolved[i]->entity] = std::max(s_llm[resolved[i]->entity], w[i] / sum);
  }

  std::vector<int> ranking(ne);
  std::iota(ranking.begin(), ranking.end(), 0);
  std::vector<double> score(ne);
  for (int o = 0; o < ne; ++o) score[o] = (1.0 - lambda) * s_llm[o] + lambda * tkg_dist[o];
  std::sort(ranking.begin(), ranking.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  return ranking;
}

int hit_at_k(const std::vector<int>& ranking, int truth, int k) {
  if (k < 1) throw config_error("hit_at_k: K must be >= 1");
  const int upto = std::min<int>(k, static_cast<int>(ranking.size()));
  for (int i = 0; i < upto; ++i)
    if (ranking[i] == truth) return 1;
  return 0;
}

// ---- single-step evaluation ----

EvalReport evaluate(const ModelState& model, const EncoderParams& encoder, const RuleSet& rules,
                    const TemporalKG& kg, const DatasetSplit& split, const SymbolVocab& vocab,
                    const EvalConfig& config) {
  if (vocab.size() != model.cfg.vocab_size)
    throw validation_error("evaluate: vocabulary size " + std::to_string(vocab.size()) +
                           " does not match the checkpoint vocab " +
                           std::to_string(model.cfg.vocab_size));
  if (encoder.entity_embedding.rows() != kg.num_entities() ||
      encoder.relation_embedding.rows() != kg.num_relations_with_inverse())
    throw validation_error("evaluate: encoder shapes do not match the dataset");

  EvalReport report;
  report.beam_width = config.beam_width;
  report.lambda = config.disable_hybrid_score ? 0.0 : config.lambda;

  std::vector<int> all_entities(kg.num_entities());
  std::iota(all_entities.begin(), all_entities.end(), 0);

  // Test facts grouped by timestamp (inverse facts are separate queries).
  std::vector<std::int64_t> queries;
  for (std::int64_t i = split.test.first; i < split.test.second; ++i) queries.push_back(i);
  if (config.max_queries >= 0 && static_cast<std::int64_t>(queries.size()) > config.max_queries)
    queries.resize(config.max_queries);
  if (queries.empty()) return report;

  const int test_begin_time = kg.facts[split.test.first].time;
  std::int64_t h1 = 0, h3 = 0, h10 = 0, unresolved = 0;
  std::vector<QueryRecord> records(queries.size());

  std::size_t qi = 0;
  while (qi < queries.size()) {
    const int t = kg.facts[queries[qi]].time;
    std::size_t qe = qi;
    while (qe < queries.size() && kg.facts[queries[qe]].time == t) ++qe;
    const int history_end = config.append_gold ? t : std::min(t, test_begin_time);

    // Queries at one timestamp are independent; the gold-append step is the
    // barrier between timestamps.
#ifdef STK_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) reduction(+ : h1, h3, h10, unresolved)
#endif
    for (std::int64_t u = static_cast<std::int64_t>(qi); u < static_cast<std::int64_t>(qe); ++u) {
      const auto& q = kg.facts[queries[u]];
      NoGradGuard ng;

      EventChain chain = retrieve_chain(kg, q.subject, q.relation, history_end, rules,
                                        config.retrieval);
      InstructionSequence instr =
          build_instruction(vocab, q.subject, q.relation, q.time, chain);

      SubgraphSequence subgraphs;
      try {
        subgraphs = sample_history(kg, q.subject, q.relation, q.time, config.sampler,
                                   config.seed, history_end);
      } catch (const empty_history_error&) {
        // t=0 queries fall back to the base embeddings.
      }
      EncoderState enc = encode_history(subgraphs, encoder);
      GraphState graph = initial_graph_repr(enc, q.subject, q.relation);
      Tensor tkg_probs = tkg_score(enc, encoder, q.subject, q.relation, all_entities);

      IncrementalDecoder decoder(model, instr.tokens, route_positions(instr), graph.h0,
                                 config.ablation);
      auto beams = beam_search(decoder, config.beam_width, config.max_len, vocab.rbracket());
      resolve_entities(beams, instr, vocab);
      for (const auto& b : beams)
        if (b.entity < 0) ++unresolved;

      const double lambda = config.disable_hybrid_score ? 0.0 : config.lambda;
      auto ranking = hybrid_rank(beams, tkg_probs.values(), lambda);

      int rank = 0;
      for (std::size_t r = 0; r < ranking.size(); ++r)
        if (ranking[r] == q.object) {
          rank = static_cast<int>(r) + 1;
          break;
        }
      h1 += rank >= 1 && rank <= 1;
      h3 += rank >= 1 && rank <= 3;
      h10 += rank >= 1 && rank <= 10;
      records[u] = {q.subject, q.relation, q.time, q.object, rank,
                    static_cast<int>(chain.events.size())};
    }
    qi = qe;
  }

  report.n_queries = static_cast<std::int64_t>(queries.size());
  report.hit1 = static_cast<double>(h1) / report.n_queries;
  report.hit3 = static_cast<double>(h3) / report.n_queries;
  report.hit10 = static_cast<double>(h10) / report.n_queries;
  report.n_unresolved_beams = unresolved;
  if (config.keep_records) report.records = std::move(records);
  return report;
}

void write_report(const EvalReport& report, std::ostream& os, bool per_query) {
  os << "# stk-eval v1\n";
  os << "queries=" << report.n_queries << " beam_width=" << report.beam_width
     << " lambda=" << report.lambda << "\n";
  os << "hit@1=" << report.hit1 << "\n";
  os << "hit@3=" << report.hit3 << "\n";
  os << "hit@10=" << report.hit10 << "\n";
  os << "unresolved_beams=" << report.n_unresolved_beams << "\n";
  if (per_query) {
    os << "# subject relation time gold rank chain_events\n";
    for (const auto& r : report.records)
      os << r.subject << " " << r.relation << " " << r.time << " " << r.gold << " " << r.rank
         << " " << r.chain_events << "\n";
  }
}

}  // namespace stk
