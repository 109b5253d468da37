#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stk/encoder.hpp"
#include "stk/model.hpp"
#include "stk/rules.hpp"
#include "stk/sampler.hpp"
#include "stk/tkg.hpp"

namespace stk {

// Next-token scorer over a fixed prompt. Implementations must be pure
// functions of the generated suffix.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual int vocab_size() const = 0;
  // Log-probabilities over the vocabulary for the next token, given the
  // tokens generated after the prompt so far.
  virtual std::vector<double> next_log_probs(const std::vector<int>& generated) = 0;
};

// KV-cached single-position decoding over the trained model; numerically
// identical to the full forward pass.
class IncrementalDecoder : public SequenceScorer {
 public:
  IncrementalDecoder(const ModelState& state, const std::vector<int>& prompt,
                     const std::vector<int>& prompt_route_pos, const Tensor& h_g0,
                     const AdapterOptions& ablation);
  int vocab_size() const override { return state_.cfg.vocab_size; }
  std::vector<double> next_log_probs(const std::vector<int>& generated) override;

 private:
  const ModelState& state_;
  AdapterOptions ablation_;
  ForwardTrace trace_;
  std::vector<double> prompt_log_probs_;
};

struct BeamCandidate {
  std::vector<int> tokens;  // generated suffix (prompt excluded)
  double log_prob = 0.0;    // sum of token log-probabilities
  int entity = -1;          // resolved entity id; -1 = unresolved
};

// Standard beam update: expand each beam by the top-B tokens, keep the
// global top-B by cumulative log-probability (no length normalization).
// Beams ending in `end_token` stop expanding; pass -1 for no end marker.
// Ties break lexicographically on the token sequence.
std::vector<BeamCandidate> beam_search(SequenceScorer& scorer, int beam_width, int max_len,
                                       int end_token = -1);

// Resolves each candidate's entity from the leading numerical index via the
// instruction's candidate_index; unresolvable candidates keep entity -1.
void resolve_entities(std::vector<BeamCandidate>& candidates, const InstructionSequence& instr,
                      const SymbolVocab& vocab);

// Hybrid score S(o) = (1-lambda)*S_LLM(o) + lambda*S_TKG(o). S_LLM is the
// softmax over resolved candidates' log-probs, aggregated per entity by max;
// entities absent from the beam get S_LLM = 0. Returns all entity ids ranked
// by score descending, ties by entity id.
std::vector<int> hybrid_rank(const std::vector<BeamCandidate>& candidates,
                             const std::vector<double>& tkg_dist, double lambda);

int hit_at_k(const std::vector<int>& ranking, int truth, int k);

struct EvalConfig {
  SamplerConfig sampler;
  RetrievalConfig retrieval;
  int beam_width = 20;
  double lambda = 0.1;
  int max_len = 8;
  bool disable_hybrid_score = false;
  // Single-step protocol: once all queries at a timestamp are scored, its
  // gold facts join the retrievable history. Disable to freeze the history
  // at the start of the test split.
  bool append_gold = true;
  AdapterOptions ablation;
  std::uint64_t seed = 0;
  int max_queries = -1;     // cap for smoke runs; -1 = all
  bool keep_records = true;
};

struct QueryRecord {
  int subject, relation, time, gold;
  int rank;  // 1-based rank of the gold entity; 0 if absent from the ranking
  int chain_events;
};

struct EvalReport {
  double hit1 = 0.0, hit3 = 0.0, hit10 = 0.0;
  std::int64_t n_queries = 0;
  std::int64_t n_unresolved_beams = 0;
  int beam_width = 0;
  double lambda = 0.0;
  std::vector<QueryRecord> records;
};

// Single-step evaluation over the test split: queries processed in
// timestamp order, both directions (facts and inverse facts), Hit@K averaged
// over all queries. Queries within one timestamp run in parallel.
EvalReport evaluate(const ModelState& model, const EncoderParams& encoder, const RuleSet& rules,
                    const TemporalKG& kg, const DatasetSplit& split, const SymbolVocab& vocab,
                    const EvalConfig& config);

void write_report(const EvalReport& report, std::ostream& os, bool per_query = false);

}  // namespace stk
