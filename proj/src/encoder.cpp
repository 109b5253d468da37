#include "stk/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace stk {

EncoderParams EncoderParams::init(const TemporalKG& kg, int d_g, std::uint64_t seed) {
  if (d_g < 1) throw config_error("encoder: d_g must be >= 1");
  Rng rng(mix_seed(seed, 0xE11C0DE));
  const double s = 1.0 / std::sqrt(static_cast<double>(d_g));
  EncoderParams p;
  p.d_g = d_g;
  p.entity_embedding = Tensor::uniform({kg.num_entities(), d_g}, -s, s, rng, true);
  p.relation_embedding = Tensor::uniform({kg.num_relations_with_inverse(), d_g}, -s, s, rng, true);
  p.w_message = Tensor::uniform({2 * d_g, d_g}, -s, s, rng, true);
  p.b_message = Tensor::zeros({d_g}, true);
  p.w_gate = Tensor::uniform({2 * d_g, d_g}, -s, s, rng, true);
  p.b_gate = Tensor::full({d_g}, -2.0, true);  // open the gate slowly
  p.w_cand = Tensor::uniform({2 * d_g, d_g}, -s, s, rng, true);
  p.b_cand = Tensor::zeros({d_g}, true);
  p.w_score = Tensor::uniform({d_g, d_g}, -s, s, rng, true);
  return p;
}

std::vector<Parameter> EncoderParams::parameters() const {
  return {
      {"encoder.entity_embedding", entity_embedding},
      {"encoder.relation_embedding", relation_embedding},
      {"encoder.w_message", w_message},
      {"encoder.b_message", b_message},
      {"encoder.w_gate", w_gate},
      {"encoder.b_gate", b_gate},
      {"encoder.w_cand", w_cand},
      {"encoder.b_cand", b_cand},
      {"encoder.w_score", w_score},
  };
}

void EncoderParams::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(trainable);
}

EncoderState encode_history(const SubgraphSequence& subgraphs, const EncoderParams& params) {
  EncoderState state;
  state.h_entities = params.entity_embedding;
  state.h_relations = params.relation_embedding;
  const int ne = params.entity_embedding.rows();
  const int nr2 = params.relation_embedding.rows();

  for (const auto& snap : subgraphs.snapshots) {
    // Bidirectional messages: an edge (s,r,o) updates s from (r,o) and o
    // from (r^-1, s).
    std::vector<int> dst, neighbor, rel;
    for (const auto& e : snap.edges) {
      if (e.subject < 0 || e.subject >= ne || e.object < 0 || e.object >= ne)
        throw dim_error("encode_history: entity id out of range");
      if (e.relation < 0 || e.relation >= nr2)
        throw dim_error("encode_history: relation id out of range");
      const int inv = e.relation < nr2 / 2 ? e.relation + nr2 / 2 : e.relation - nr2 / 2;
      dst.push_back(e.subject);
      neighbor.push_back(e.object);
      rel.push_back(e.relation);
      dst.push_back(e.object);
      neighbor.push_back(e.subject);
      rel.push_back(inv);
    }
    if (dst.empty()) continue;

    std::vector<int> touched(dst.begin(), dst.end());
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    std::map<int, int> seg_of;
    for (std::size_t i = 0; i < touched.size(); ++i) seg_of[touched[i]] = static_cast<int>(i);
    std::vector<int> seg(dst.size());
    for (std::size_t i = 0; i < dst.size(); ++i) seg[i] = seg_of[dst[i]];

    Tensor neighbor_h = gather_rows(state.h_entities, neighbor);
    Tensor rel_h = gather_rows(state.h_relations, rel);
    Tensor msgs = tanh_t(linear(concat_cols(neighbor_h, rel_h), params.w_message,
                                &params.b_message));
    Tensor agg = segment_mean(msgs, seg, static_cast<int>(touched.size()));
    Tensor prev = gather_rows(state.h_entities, touched);
    Tensor zin = concat_cols(agg, prev);
    Tensor z = sigmoid(linear(zin, params.w_gate, &params.b_gate));
    Tensor cand = tanh_t(linear(zin, params.w_cand, &params.b_cand));
    Tensor one_minus_z = add_scalar(scale(z, -1.0), 1.0);
    Tensor updated = add(hadamard(z, cand), hadamard(one_minus_z, prev));
    state.h_entities = scatter_rows(state.h_entities, updated, touched);
    state.as_of_time = snap.time;
  }
  return state;
}

GraphState initial_graph_repr(const EncoderState& state, int subject, int relation) {
  if (subject < 0 || subject >= state.h_entities.rows())
    throw dim_error("initial_graph_repr: subject id out of range");
  if (relation < 0 || relation >= state.h_relations.rows())
    throw dim_error("initial_graph_repr: relation id out of range");
  Tensor h0 = concat_cols(gather_rows(state.h_entities, {subject}),
                          gather_rows(state.h_relations, {relation}));
  GraphState g;
  g.h0 = h0;
  g.current = h0;
  return g;
}

Tensor tkg_score_logits(const EncoderState& state, const EncoderParams& params, int subject,
                        int relation, const std::vector<int>& candidates) {
  if (candidates.empty()) throw config_error("tkg_score: candidate list is empty");
  Tensor hs = gather_rows(state.h_entities, {subject});
  Tensor hr = gather_rows(state.h_relations, {relation});
  Tensor query = matmul(hadamard(hs, hr), params.w_score);  // [1, d_g]
  Tensor cand = gather_rows(state.h_entities, candidates);  // [C, d_g]
  return matmul_nt(query, cand);                            // [1, C]
}

Tensor tkg_score(const EncoderState& state, const EncoderParams& params, int subject,
                 int relation, const std::vector<int>& candidates) {
  return softmax(tkg_score_logits(state, params, subject, relation, candidates), -1);
}

SubgraphSequence full_window_sequence(const TemporalKG& kg, int first_time, int last_time,
                                      std::int64_t fact_end) {
  if (fact_end < 0) fact_end = static_cast<std::int64_t>(kg.facts.size());
  SubgraphSequence seq;
  seq.query_time = last_time + 1;
  for (int t = std::max(0, first_time); t <= last_time && t < kg.num_times(); ++t) {
    auto [b, e] = kg.snapshot_range(t);
    e = std::min(e, fact_end);
    if (b >= e) continue;
    SampledSnapshot snap;
    snap.time = t;
    std::set<int> nodes;
    for (std::int64_t i = b; i < e; ++i) {
      // Inverse facts mirror the forward ones and messages are already
      // bidirectional, so keep base-relation edges only.
      if (kg.facts[i].relation >= kg.num_relations()) continue;
      snap.edges.push_back(kg.facts[i]);
      nodes.insert(kg.facts[i].subject);
      nodes.insert(kg.facts[i].object);
    }
    if (snap.edges.empty()) continue;
    snap.nodes.assign(nodes.begin(), nodes.end());
    seq.snapshots.push_back(std::move(snap));
  }
  return seq;
}

void pretrain_encoder(const TemporalKG& kg, std::int64_t train_fact_end, EncoderParams& params,
                      const EncoderTrainConfig& config) {
  if (config.epochs <= 0) return;
  params.set_trainable(true);
  AdamW opt(params.parameters(), config.learning_rate, /*weight_decay=*/0.0);
  Rng rng(mix_seed(config.seed, 0x7EA1));

  // Training timestamps, in chronological order.
  int last_train_time = 0;
  for (std::int64_t i = 0; i < train_fact_end; ++i)
    last_train_time = std::max(last_train_time, kg.facts[i].time);

  const int ne = kg.num_entities();
  std::vector<int> all_entities(ne);
  for (int i = 0; i < ne; ++i) all_entities[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int t = 1; t <= last_train_time; ++t) {
      auto [b, e] = kg.snapshot_range(t);
      e = std::min(e, train_fact_end);
      if (b >= e) continue;

      const auto window = full_window_sequence(kg, t - config.window, t - 1, train_fact_end);
      const EncoderState state = encode_history(window, params);

      std::vector<std::int64_t> fact_ids;
      for (std::int64_t i = b; i < e; ++i) fact_ids.push_back(i);
      if (static_cast<int>(fact_ids.size()) > config.max_facts_per_step) {
        std::shuffle(fact_ids.begin(), fact_ids.end(), rng);
        fact_ids.resize(config.max_facts_per_step);
      }

      Tensor loss = Tensor::zeros({1});
      for (std::int64_t fi : fact_ids) {
        const auto& q = kg.facts[fi];
        std::vector<int> candidates;
        int gold_pos;
        if (ne <= config.max_candidates) {
          candidates = all_entities;
          gold_pos = q.object;
        } else {
          candidates.push_back(q.object);
          std::uniform_int_distribution<int> pick(0, ne - 1);
          while (static_cast<int>(candidates.size()) < config.max_candidates)
            candidates.push_back(pick(rng));
          gold_pos = 0;
        }
        Tensor logits = tkg_score_logits(state, params, q.subject, q.relation, candidates);
        Tensor ce = scale(pick_elems(log_softmax_rows(logits), {gold_pos}), -1.0);
        loss = add(loss, ce);
      }
      loss = scale(loss, 1.0 / static_cast<double>(fact_ids.size()));
      if (!std::isfinite(loss.item()))
        throw numeric_error("pretrain_encoder: non-finite loss at t=" + std::to_string(t));
      opt.zero_grad();
      loss.backward();
      clip_grad_norm(opt.params(), 1.0);
      opt.step();
    }
  }
  params.set_trainable(false);
}

}  // namespace stk
