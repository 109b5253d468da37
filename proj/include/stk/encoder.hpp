#pragma once

#include <cstdint>
#include <vector>

#include "stk/sampler.hpp"
#include "stk/tensor.hpp"
#include "stk/tkg.hpp"

namespace stk {

// Simplified evolving graph encoder: per-snapshot relation-conditioned mean
// aggregation followed by a gated recurrent row update, plus a bilinear
// candidate scorer. Stands behind the same interface as a full pre-trained
// evolving encoder and stays frozen during adapter fine-tuning.
struct EncoderParams {
  int d_g = 16;
  Tensor entity_embedding;    // [|E|, d_g]
  Tensor relation_embedding;  // [2|R|, d_g]
  Tensor w_message;           // [2*d_g, d_g]
  Tensor b_message;           // [d_g]
  Tensor w_gate;              // [2*d_g, d_g]
  Tensor b_gate;              // [d_g]
  Tensor w_cand;              // [2*d_g, d_g]
  Tensor b_cand;              // [d_g]
  Tensor w_score;             // [d_g, d_g]

  static EncoderParams init(const TemporalKG& kg, int d_g, std::uint64_t seed);
  std::vector<Parameter> parameters() const;
  void set_trainable(bool trainable);
};

struct EncoderState {
  Tensor h_entities;   // [|E|, d_g]
  Tensor h_relations;  // [2|R|, d_g]
  int as_of_time = -1;
};

// Initial and layer-evolving TKG representation for one query.
struct GraphState {
  Tensor h0;       // [1, 2*d_g], immutable after construction
  Tensor current;  // [1, 2*d_g]
};

// Runs the recurrence over the sampled snapshots in chronological order,
// starting from the base embeddings. Rows not incident to any sampled edge
// persist bit-identically. An empty sequence returns the base embeddings.
EncoderState encode_history(const SubgraphSequence& subgraphs, const EncoderParams& params);

GraphState initial_graph_repr(const EncoderState& state, int subject, int relation);

// Relation-conditioned bilinear logits: logit(o) = (h_s ⊙ h_r) W h_o^T.
Tensor tkg_score_logits(const EncoderState& state, const EncoderParams& params, int subject,
                        int relation, const std::vector<int>& candidates);
// Softmax-normalized scores over the candidate list.
Tensor tkg_score(const EncoderState& state, const EncoderParams& params, int subject,
                 int relation, const std::vector<int>& candidates);

struct EncoderTrainConfig {
  int epochs = 20;
  double learning_rate = 0.05;
  int window = 4;  // snapshots encoded per prediction step
  int max_facts_per_step = 256;
  int max_candidates = 512;  // beyond this, gold + sampled negatives
  std::uint64_t seed = 0;
};

// Pre-trains embeddings, recurrence, and scorer with cross-entropy of
// tkg_score against gold objects of training queries. Single-threaded,
// deterministic under seed; returned parameters are meant to be frozen.
void pretrain_encoder(const TemporalKG& kg, std::int64_t train_fact_end, EncoderParams& params,
                      const EncoderTrainConfig& config);

// Un-sampled subgraph sequence over the full snapshots in
// [first_time, last_time], restricted to facts[0, fact_end).
SubgraphSequence full_window_sequence(const TemporalKG& kg, int first_time, int last_time,
                                      std::int64_t fact_end = -1);

}  // namespace stk
