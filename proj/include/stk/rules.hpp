#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stk/tkg.hpp"

namespace stk {

// Temporal logic rule: head(x0, xL) at t is supported by a chronological
// relation path x0 -b1-> x1 ... -bL-> xL with strictly increasing timestamps,
// all before t. Confidence follows the TLogic convention
// support / body_support.
struct TemporalRule {
  int head_relation = 0;
  std::vector<int> body_relations;  // chronological order, length >= 1
  std::int64_t support = 0;
  std::int64_t body_support = 0;
  double confidence = 0.0;
  bool zero_body = false;  // flagged when body never matched
};

struct MiningConfig {
  int walks_per_relation = 100;
  int max_body_len = 3;
  std::uint64_t seed = 0;
  // Grounding enumeration cap per rule; exact below the cap.
  std::int64_t max_groundings = 1'000'000;
};

struct RuleSet {
  // Indexed by head relation (size 2|R|); each list sorted by confidence
  // descending, ties by support descending then body lexicographic.
  std::vector<std::vector<TemporalRule>> rules_by_head;
  MiningConfig config;

  std::int64_t total_rules() const;
};

// Exponentially time-decayed step distribution over candidate edges:
// P(i) = exp(t_i - anchor) / sum_j exp(t_j - anchor). Shift-invariant in
// `anchor`; computed with max subtraction.
std::vector<double> time_decay_probs(const std::vector<int>& candidate_times, int anchor);
int sample_time_decay(const std::vector<int>& candidate_times, int anchor, Rng& rng);

// Support / body_support of `body` for `head_relation`, counted by exhaustive
// chronological matching over facts[0, fact_end).
struct GroundingCounts {
  std::int64_t body_support = 0;
  std::int64_t support = 0;
  bool capped = false;
};
GroundingCounts count_rule_groundings(const TemporalKG& kg, std::int64_t fact_end,
                                      int head_relation, const std::vector<int>& body,
                                      std::int64_t max_groundings = 1'000'000);

// Convenience wrapper returning confidence (0, flagged, when body never
// matches).
TemporalRule rule_confidence(const TemporalKG& kg, std::int64_t fact_end, int head_relation,
                             const std::vector<int>& body,
                             std::int64_t max_groundings = 1'000'000);

// Mines rule bodies by time-decreasing random walks from the object entities
// of head facts, then scores each distinct body exhaustively.
RuleSet mine_rules(const TemporalKG& kg, std::int64_t train_fact_end, const MiningConfig& config);

RuleSet filter_rules(const RuleSet& rules, double min_confidence, int top_n_per_head);

void save_rules(const RuleSet& rules, const TemporalKG& kg, const std::string& path);
RuleSet load_rules(const std::string& path, const TemporalKG& kg);

// ---- event chains ----

struct EventChain {
  std::vector<Quadruple> events;  // chronological, all before query_time
  // Per event: index of the matching rule within rules_by_head[query
  // relation], or -1 for the recency fallback.
  std::vector<int> provenance;
};

struct RetrievalConfig {
  int max_events = 50;
  std::int64_t max_groundings_per_rule = 512;
};

// Grounds rule bodies anchored at the query subject over facts[0, *) with
// timestamps below `history_end`, then pads with the subject's most recent
// facts, dedups, sorts chronologically, and keeps the most recent
// `max_events`.
EventChain retrieve_chain(const TemporalKG& kg, int subject, int relation, int history_end,
                          const RuleSet& rules, const RetrievalConfig& config);

// ---- instruction sequences ----

// Atomic symbol vocabulary: one token per entity name, relation name
// (inverses included), time literal, numerical index, punctuation mark, and
// the query-prefix marker.
class SymbolVocab {
 public:
  enum class Class { Special, Punct, Index, Entity, Relation, Time };

  SymbolVocab(const TemporalKG& kg, int max_indices);

  int query_marker() const { return 0; }
  int colon() const { return 1; }
  int comma() const { return 2; }
  int lbracket() const { return 3; }
  int rbracket() const { return 4; }
  int dot() const { return 5; }
  int index(int k) const;
  int entity(int eid) const;
  int relation(int rid) const;  // rid < 2|R|
  int time(int tid) const;

  Class token_class(int tok) const;
  int index_value(int tok) const;   // inverse of index()
  int entity_value(int tok) const;  // inverse of entity()
  int size() const { return total_; }
  int max_indices() const { return max_indices_; }
  std::string text(int tok) const;

 private:
  int max_indices_, n_entities_, n_relations2_, n_times_, total_;
  std::vector<std::string> entity_names_, relation_names_, time_names_;
};

struct InstructionSequence {
  std::vector<int> tokens;  // history lines then the query prefix
  // tau: token position -> position of the owning event's time token,
  // -1 outside any span.
  std::vector<int> time_token_map;
  // Half-open token ranges, one per event plus one final query-prefix span.
  std::vector<std::pair<int, int>> event_spans;
  // Numerical index -> entity id, in index order.
  std::vector<std::pair<int, int>> candidate_index;
  std::vector<int> target;  // gold answer tokens (training only)
  int gold_index = -1;

  std::optional<int> entity_for_index(int idx) const;
};

// Renders the chain and query into the line template
// "t : [s, r, o_id.o]" / prefix "t : [s, r," with per-event spans and the
// time-token map populated. When `gold` is set the target token sequence for
// "o_id.o]" is emitted, assigning a fresh index if the gold entity is unseen.
InstructionSequence build_instruction(const SymbolVocab& vocab, int subject, int relation,
                                      int query_time, const EventChain& chain,
                                      std::optional<int> gold = std::nullopt);

// Plain-text rendering of an instruction for human inspection.
std::string render_instruction(const InstructionSequence& seq, const SymbolVocab& vocab);

// Event-aware routing positions: tau(j) inside spans, j itself outside.
// Extends to `total_len` for appended target tokens.
std::vector<int> route_positions(const InstructionSequence& seq, int total_len = -1);

}  // namespace stk
