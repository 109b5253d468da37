#include "stk/rules.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stk {

std::int64_t RuleSet::total_rules() const {
  std::int64_t n = 0;
  for (const auto& v : rules_by_head) n += static_cast<std::int64_t>(v.size());
  return n;
}

std::vector<double> time_decay_probs(const std::vector<int>& candidate_times, int anchor) {
  if (candidate_times.empty()) return {};
  int mx = candidate_times[0];
  for (int t : candidate_times) mx = std::max(mx, t);
  (void)anchor;  // exp(t - anchor) is shift-invariant after normalization
  std::vector<double> p(candidate_times.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(static_cast<double>(candidate_times[i] - mx));
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

int sample_time_decay(const std::vector<int>& candidate_times, int anchor, Rng& rng) {
  const auto p = time_decay_probs(candidate_times, anchor);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

namespace {

// Facts grouped by relation, restricted to [0, fact_end).
std::vector<std::vector<std::int64_t>> facts_by_relation(const TemporalKG& kg,
                                                         std::int64_t fact_end) {
  std::vector<std::vector<std::int64_t>> by_rel(kg.num_relations_with_inverse());
  for (std::int64_t i = 0; i < fact_end; ++i) by_rel[kg.facts[i].relation].push_back(i);
  return by_rel;
}

bool head_holds(const TemporalKG& kg, std::int64_t fact_end, int x0, int head, int xl,
                int after) {
  for (std::int64_t fi : kg.edges_from(x0)) {
    if (fi >= fact_end) continue;
    const auto& q = kg.facts[fi];
    if (q.time <= after) continue;
    if (q.relation == head && q.object == xl) return true;
  }
  return false;
}

void extend_grounding(const TemporalKG& kg, std::int64_t fact_end, int head,
                      const std::vector<int>& body, std::size_t depth, int x0, int node,
                      int last_time, GroundingCounts& counts, std::int64_t max_groundings) {
  if (depth == body.size()) {
    ++counts.body_support;
    if (head_holds(kg, fact_end, x0, head, node, last_time)) ++counts.support;
    return;
  }
  for (std::int64_t fi : kg.edges_from(node)) {
    if (counts.body_support >= max_groundings) {
      counts.capped = true;
      return;
    }
    if (fi >= fact_end) continue;
    const auto& q = kg.facts[fi];
    if (q.relation != body[depth]) continue;
    if (depth > 0 && q.time <= last_time) continue;
    extend_grounding(kg, fact_end, head, body, depth + 1, x0, q.object, q.time, counts,
                     max_groundings);
  }
}

}  // namespace

GroundingCounts count_rule_groundings(const TemporalKG& kg, std::int64_t fact_end,
                                      int head_relation, const std::vector<int>& body,
                                      std::int64_t max_groundings) {
  if (body.empty()) throw config_error("rule body must have length >= 1");
  GroundingCounts counts;
  // First hop iterates facts of relation body[0]; deeper hops follow
  // adjacency with strictly increasing timestamps.
  for (std::int64_t fi = 0; fi < fact_end; ++fi) {
    const auto& q = kg.facts[fi];
    if (q.relation != body[0]) continue;
    if (counts.body_support >= max_groundings) {
      counts.capped = true;
      break;
    }
    extend_grounding(kg, fact_end, head_relation, body, 1, q.subject, q.object, q.time, counts,
                     max_groundings);
  }
  return counts;
}

TemporalRule rule_confidence(const TemporalKG& kg, std::int64_t fact_end, int head_relation,
                             const std::vector<int>& body, std::int64_t max_groundings) {
  TemporalRule rule;
  rule.head_relation = head_relation;
  rule.body_relations = body;
  const auto counts = count_rule_groundings(kg, fact_end, head_relation, body, max_groundings);
  rule.support = counts.support;
  rule.body_support = counts.body_support;
  if (counts.body_support > 0) {
    rule.confidence = static_cast<double>(counts.support) / static_cast<double>(counts.body_support);
  } else {
    rule.confidence = 0.0;
    rule.zero_body = true;
  }
  return rule;
}

namespace {

void sort_rule_list(std::vector<TemporalRule>& rules) {
  std::sort(rules.begin(), rules.end(), [](const TemporalRule& a, const TemporalRule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.support != b.support) return a.support > b.support;
    return a.body_relations < b.body_relations;
  });
}

}  // namespace

RuleSet mine_rules(const TemporalKG& kg, std::int64_t train_fact_end, const MiningConfig& config) {
  if (train_fact_end <= 0) throw config_error("mine_rules: empty training range");
  const int nr2 = kg.num_relations_with_inverse();
  const auto by_rel = facts_by_relation(kg, train_fact_end);

  RuleSet out;
  out.config = config;
  out.rules_by_head.resize(nr2);

  for (int head = 0; head < nr2; ++head) {
    const auto& head_facts = by_rel[head];
    if (head_facts.empty()) {
      std::fprintf(stderr, "mine_rules: relation %d has no training facts, skipped\n", head);
      continue;
    }
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(head)));
    std::set<std::vector<int>> bodies;
    std::uniform_int_distribution<std::size_t> pick_fact(0, head_facts.size() - 1);
    for (int w = 0; w < config.walks_per_relation; ++w) {
      const auto& hf = kg.facts[head_facts[pick_fact(rng)]];
      // Time-decreasing walk from the head object; each traversed edge,
      // reversed and inverted, prepends to a chronological body path that
      // ends at the head object.
      int node = hf.object;
      int bound = hf.time;
      std::vector<int> walked;  // relations in walk order
      for (int step = 0; step < config.max_body_len; ++step) {
        std::vector<std::int64_t> cand;
        std::vector<int> cand_times;
        for (std::int64_t fi : kg.edges_from(node)) {
          if (fi >= train_fact_end) continue;
          const auto& q = kg.facts[fi];
          if (q.time >= bound) break;
          cand.push_back(fi);
          cand_times.push_back(q.time);
        }
        if (cand.empty()) break;
        const int pick = sample_time_decay(cand_times, bound, rng);
        const auto& edge = kg.facts[cand[pick]];
        walked.push_back(edge.relation);
        node = edge.object;
        bound = edge.time;
        std::vector<int> body(walked.size());
        for (std::size_t i = 0; i < walked.size(); ++i)
          body[i] = kg.inverse_of(walked[walked.size() - 1 - i]);
        bodies.insert(std::move(body));
      }
    }
    auto& list = out.rules_by_head[head];
    for (const auto& body : bodies)
      list.push_back(rule_confidence(kg, train_fact_end, head, body, config.max_groundings));
    sort_rule_list(list);
  }
  return out;
}

RuleSet filter_rules(const RuleSet& rules, double min_confidence, int top_n_per_head) {
  RuleSet out;
  out.config = rules.config;
  out.rules_by_head.resize(rules.rules_by_head.size());
  for (std::size_t h = 0; h < rules.rules_by_head.size(); ++h) {
    for (const auto& r : rules.rules_by_head[h]) {
      if (r.confidence >= min_confidence) out.rules_by_head[h].push_back(r);
      if (static_cast<int>(out.rules_by_head[h].size()) >= top_n_per_head) break;
    }
  }
  return out;
}

void save_rules(const RuleSet& rules, const TemporalKG& kg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw missing_artifact_error("cannot write rules file: " + path);
  os << "# stk-rules v1\n";
  os << "# walks_per_relation=" << rules.config.walks_per_relation
     << " max_body_len=" << rules.config.max_body_len << " seed=" << rules.config.seed << "\n";
  os << "# head\tbody\tsupport\tbody_support\tconfidence\n";
  for (std::size_t h = 0; h < rules.rules_by_head.size(); ++h) {
    for (const auto& r : rules.rules_by_head[h]) {
      os << h << "\t";
      for (std::size_t i = 0; i < r.body_relations.size(); ++i)
        os << (i ? " " : "") << r.body_relations[i];
      os << "\t" << r.support << "\t" << r.body_support << "\t" << r.confidence << "\n";
    }
  }
  (void)kg;
}

RuleSet load_rules(const std::string& path, const TemporalKG& kg) {
  std::ifstream is(path);
  if (!is) throw missing_artifact_error("cannot open rules file: " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# stk-rules v1", 0) != 0)
    throw validation_error("not a rules file (missing version header): " + path);
  RuleSet out;
  out.rules_by_head.resize(kg.num_relations_with_inverse());
  int line_number = 1;
  while (std::getline(is, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string head_s, body_s, sup_s, bsup_s, conf_s;
    if (!std::getline(ss, head_s, '\t') || !std::getline(ss, body_s, '\t') ||
        !std::getline(ss, sup_s, '\t') || !std::getline(ss, bsup_s, '\t') ||
        !std::getline(ss, conf_s))
      throw parse_error("rules line " + std::to_string(line_number) + ": expected 5 fields");
    TemporalRule r;
    r.head_relation = std::stoi(head_s);
    std::istringstream bs(body_s);
    int rel;
    while (bs >> rel) r.body_relations.push_back(rel);
    r.support = std::stoll(sup_s);
    r.body_support = std::stoll(bsup_s);
    r.confidence = std::stod(conf_s);
    r.zero_body = r.body_support == 0;
    if (r.head_relation < 0 || r.head_relation >= kg.num_relations_with_inverse())
      throw validation_error("rules line " + std::to_string(line_number) + ": head out of range");
    out.rules_by_head[r.head_relation].push_back(std::move(r));
  }
  for (auto& list : out.rules_by_head) sort_rule_list(list);
  return out;
}

// ---- retrieval ----

namespace {

void ground_anchored(const TemporalKG& kg, int history_end, int node,
                     const std::vector<int>& body, std::size_t depth, int last_time,
                     std::vector<Quadruple>& path, std::int64_t& budget,
                     const std::function<void(const std::vector<Quadruple>&)>& emit) {
  if (depth == body.size()) {
    emit(path);
    --budget;
    return;
  }
  for (std::int64_t fi : kg.edges_from(node)) {
    if (budget <= 0) return;
    const auto& q = kg.facts[fi];
    if (q.time >= history_end) break;
    if (q.relation != body[depth]) continue;
    if (depth > 0 && q.time <= last_time) continue;
    path.push_back(q);
    ground_anchored(kg, history_end, q.object, body, depth + 1, q.time, path, budget, emit);
    path.pop_back();
  }
}

}  // namespace

EventChain retrieve_chain(const TemporalKG& kg, int subject, int relation, int history_end,
                          const RuleSet& rules, const RetrievalConfig& config) {
  // Collected facts with first-provenance, deduped by quadruple.
  std::map<std::tuple<int, int, int, int>, int> seen;  // fact -> provenance
  std::vector<std::pair<Quadruple, int>> collected;
  auto add = [&](const Quadruple& q, int prov) {
    auto key = std::make_tuple(q.time, q.subject, q.relation, q.object);
    if (seen.emplace(key, prov).second) collected.emplace_back(q, prov);
  };

  if (relation < static_cast<int>(rules.rules_by_head.size())) {
    const auto& list = rules.rules_by_head[relation];
    for (std::size_t ri = 0; ri < list.size(); ++ri) {
      std::int64_t budget = config.max_groundings_per_rule;
      std::vector<Quadruple> path;
      ground_anchored(kg, history_end, subject, list[ri].body_relations, 0, -1, path, budget,
                      [&](const std::vector<Quadruple>& grounding) {
                        for (const auto& q : grounding) add(q, static_cast<int>(ri));
                      });
    }
  }

  // Recency fallback: most recent facts involving the subject.
  if (static_cast<int>(collected.size()) < config.max_events) {
    const auto prior = kg.edges_from_before(subject, history_end);
    for (auto it = prior.rbegin();
         it != prior.rend() && static_cast<int>(collected.size()) < config.max_events; ++it)
      add(kg.facts[*it], -1);
  }

  // Chronological order; ties keep collection order stable.
  std::stable_sort(collected.begin(), collected.end(),
                   [](const auto& a, const auto& b) { return a.first.time < b.first.time; });
  if (static_cast<int>(collected.size()) > config.max_events)
    collected.erase(collected.begin(),
                    collected.end() - config.max_events);  // keep most recent

  EventChain chain;
  for (const auto& [q, prov] : collected) {
    chain.events.push_back(q);
    chain.provenance.push_back(prov);
  }
  return chain;
}

// ---- symbol vocabulary ----

SymbolVocab::SymbolVocab(const TemporalKG& kg, int max_indices)
    : max_indices_(max_indices),
      n_entities_(kg.num_entities()),
      n_relations2_(kg.num_relations_with_inverse()),
      n_times_(kg.num_times()) {
  total_ = 6 + max_indices_ + n_entities_ + n_relations2_ + n_times_;
  entity_names_.reserve(n_entities_);
  for (int i = 0; i < n_entities_; ++i) entity_names_.push_back(kg.entities.name(i));
  relation_names_.reserve(n_relations2_);
  for (int i = 0; i < n_relations2_; ++i) {
    const int nr = kg.num_relations();
    relation_names_.push_back(i < nr ? kg.relations.name(i) : kg.relations.name(i - nr) + "^-1");
  }
  time_names_ = kg.raw_times;
}

int SymbolVocab::index(int k) const {
  if (k < 0 || k >= max_indices_)
    throw dim_error("index token " + std::to_string(k) + " outside vocabulary of " +
                    std::to_string(max_indices_));
  return 6 + k;
}
int SymbolVocab::entity(int eid) const {
  if (eid < 0 || eid >= n_entities_) throw dim_error("entity id out of range");
  return 6 + max_indices_ + eid;
}
int SymbolVocab::relation(int rid) const {
  if (rid < 0 || rid >= n_relations2_) throw dim_error("relation id out of range");
  return 6 + max_indices_ + n_entities_ + rid;
}
int SymbolVocab::time(int tid) const {
  if (tid < 0 || tid >= n_times_) throw dim_error("time id out of range");
  return 6 + max_indices_ + n_entities_ + n_relations2_ + tid;
}

SymbolVocab::Class SymbolVocab::token_class(int tok) const {
  if (tok < 0 || tok >= total_) throw dim_error("token out of range");
  if (tok == 0) return Class::Special;
  if (tok < 6) return Class::Punct;
  if (tok < 6 + max_indices_) return Class::Index;
  if (tok < 6 + max_indices_ + n_entities_) return Class::Entity;
  if (tok < 6 + max_indices_ + n_entities_ + n_relations2_) return Class::Relation;
  return Class::Time;
}

int SymbolVocab::index_value(int tok) const {
  if (token_class(tok) != Class::Index) throw dim_error("not an index token");
  return tok - 6;
}

int SymbolVocab::entity_value(int tok) const {
  if (token_class(tok) != Class::Entity) throw dim_error("not an entity token");
  return tok - 6 - max_indices_;
}

std::string SymbolVocab::text(int tok) const {
  switch (token_class(tok)) {
    case Class::Special:
      return "<q>";
    case Class::Punct: {
      const char* p[] = {":", ",", "[", "]", "."};
      return p[tok - 1];
    }
    case Class::Index:
      return std::to_string(tok - 6);
    case Class::Entity:
      return entity_names_[tok - 6 - max_indices_];
    case Class::Relation:
      return relation_names_[tok - 6 - max_indices_ - n_entities_];
    case Class::Time:
      return time_names_[tok - 6 - max_indices_ - n_entities_ - n_relations2_];
  }
  return "?";
}

std::optional<int> InstructionSequence::entity_for_index(int idx) const {
  for (const auto& [k, e] : candidate_index)
    if (k == idx) return e;
  return std::nullopt;
}

InstructionSequence build_instruction(const SymbolVocab& vocab, int subject, int relation,
                                      int query_time, const EventChain& chain,
                                      std::optional<int> gold) {
  InstructionSequence seq;
  std::map<int, int> object_index;  // entity -> numerical index, by first appearance
  auto index_of = [&](int entity) {
    auto it = object_index.find(entity);
    if (it != object_index.end()) return it->second;
    const int idx = static_cast<int>(object_index.size());
    object_index.emplace(entity, idx);
    seq.candidate_index.emplace_back(idx, entity);
    return idx;
  };

  auto& toks = seq.tokens;
  auto& tau = seq.time_token_map;
  auto push = [&](int tok, int time_pos) {
    toks.push_back(tok);
    tau.push_back(time_pos);
  };

  for (const auto& e : chain.events) {
    if (e.time >= query_time)
      throw validation_error("chain event at t=" + std::to_string(e.time) +
                             " does not precede the query at t=" + std::to_string(query_time));
    const int start = static_cast<int>(toks.size());
    const int time_pos = start;  // the event's time literal leads the line
    push(vocab.time(e.time), time_pos);
    push(vocab.colon(), time_pos);
    push(vocab.lbracket(), time_pos);
    push(vocab.entity(e.subject), time_pos);
    push(vocab.comma(), time_pos);
    push(vocab.relation(e.relation), time_pos);
    push(vocab.comma(), time_pos);
    push(vocab.index(index_of(e.object)), time_pos);
    push(vocab.dot(), time_pos);
    push(vocab.entity(e.object), time_pos);
    push(vocab.rbracket(), time_pos);
    seq.event_spans.emplace_back(start, static_cast<int>(toks.size()));
  }

  // Query prefix "t : [s, r," with a leading marker.
  const int qstart = static_cast<int>(toks.size());
  const int qtime_pos = qstart + 1;
  push(vocab.query_marker(), qtime_pos);
  push(vocab.time(query_time), qtime_pos);
  push(vocab.colon(), qtime_pos);
  push(vocab.lbracket(), qtime_pos);
  push(vocab.entity(subject), qtime_pos);
  push(vocab.comma(), qtime_pos);
  push(vocab.relation(relation), qtime_pos);
  push(vocab.comma(), qtime_pos);
  seq.event_spans.emplace_back(qstart, static_cast<int>(toks.size()));

  if (gold) {
    seq.gold_index = index_of(*gold);
    seq.target = {vocab.index(seq.gold_index), vocab.dot(), vocab.entity(*gold),
                  vocab.rbracket()};
  }
  return seq;
}

std::vector<int> route_positions(const InstructionSequence& seq, int total_len) {
  if (total_len < 0) total_len = static_cast<int>(seq.tokens.size());
  std::vector<int> pos(total_len);
  for (int j = 0; j < total_len; ++j) {
    const int tau = j < static_cast<int>(seq.time_token_map.size()) ? seq.time_token_map[j] : -1;
    pos[j] = tau >= 0 ? tau : j;
  }
  return pos;
}

std::string render_instruction(const InstructionSequence& seq, const SymbolVocab& vocab) {
  std::ostringstream os;
  auto render_span = [&](int start, int end, const std::vector<int>& toks) {
    for (int i = start; i < end; ++i) {
      const int tok = toks[i];
      if (tok == vocab.query_marker()) continue;
      const auto cls = vocab.token_class(tok);
      if (i > start && (cls == SymbolVocab::Class::Entity || cls == SymbolVocab::Class::Relation ||
                        cls == SymbolVocab::Class::Index || cls == SymbolVocab::Class::Time) &&
          toks[i - 1] == vocab.comma())
        os << " ";
      os << vocab.text(tok);
      if (tok == vocab.colon()) os << " ";
    }
  };
  for (std::size_t s = 0; s < seq.event_spans.size(); ++s) {
    const auto [b, e] = seq.event_spans[s];
    render_span(b, e, seq.tokens);
    if (s + 1 == seq.event_spans.size() && !seq.target.empty()) {
      os << " ";
      for (std::size_t i = 0; i < seq.target.size(); ++i) os << vocab.text(seq.target[i]);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace stk
