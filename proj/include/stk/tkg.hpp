#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stk/common.hpp"

namespace stk {

// One fact (s, r, o, t). Relation ids >= |R| denote inverse relations
// (r_inv = r + |R|); timestamps are normalized to consecutive ids.
struct Quadruple {
  int subject = 0;
  int relation = 0;
  int object = 0;
  int time = 0;

  bool operator==(const Quadruple&) const = default;
};

// Insertion-ordered string<->id map.
class Vocab {
 public:
  int intern(const std::string& name);        // adds if unseen
  int id(const std::string& name) const;      // -1 if unknown
  const std::string& name(int id) const;
  int size() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

struct DatasetSplit {
  // Half-open fact ranges into TemporalKG::facts (inverse facts included).
  std::pair<std::int64_t, std::int64_t> train{0, 0};
  std::pair<std::int64_t, std::int64_t> valid{0, 0};
  std::pair<std::int64_t, std::int64_t> test{0, 0};
  int train_end_time = 0;  // max train timestamp
  int valid_end_time = 0;  // max valid timestamp
  std::int64_t raw_train_facts = 0;  // before inverse augmentation
  std::int64_t raw_valid_facts = 0;
  std::int64_t raw_test_facts = 0;
};

class TemporalKG {
 public:
  std::vector<Quadruple> facts;  // sorted by time, inverses materialized
  Vocab entities;
  Vocab relations;  // base relations only; ids < num_relations()
  // time id -> raw timestamp string, ascending numeric order
  std::vector<std::string> raw_times;

  int num_entities() const { return entities.size(); }
  int num_relations() const { return relations.size(); }          // |R|
  int num_relations_with_inverse() const { return 2 * relations.size(); }
  int num_times() const { return static_cast<int>(raw_times.size()); }
  int inverse_of(int relation) const {
    const int nr = num_relations();
    return relation < nr ? relation + nr : relation - nr;
  }

  // Facts with exactly timestamp t.
  std::pair<std::int64_t, std::int64_t> snapshot_range(int t) const;
  std::vector<Quadruple> snapshot_at(int t) const;
  // Facts with timestamp < t (chronological prefix).
  std::int64_t prefix_end(int t) const;

  // Adjacency: facts with a given subject, ordered by time.
  const std::vector<std::int64_t>& edges_from(int entity) const;
  // Subset of edges_from with time strictly below `before`.
  std::vector<std::int64_t> edges_from_before(int entity, int before) const;

  void build_index();
  void validate() const;

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>> snapshot_index_;
  std::vector<std::vector<std::int64_t>> by_subject_;
};

// Parses one tab-separated line "subject\trelation\tobject\traw_time",
// interning unseen strings. `raw_time` must be an integer literal.
struct ParsedLine {
  int subject, relation, object;
  long long raw_time;
};
ParsedLine parse_quadruple(const std::string& line, int line_number, Vocab& entities,
                           Vocab& relations);

// Loads train/valid/test TSV files: interns vocabularies in file order,
// normalizes timestamps to consecutive ids, materializes inverse relations,
// sorts facts chronologically, and validates split monotonicity.
std::pair<TemporalKG, DatasetSplit> load_dataset(const std::string& train_path,
                                                 const std::string& valid_path,
                                                 const std::string& test_path);

// Builds a TemporalKG directly from raw (s, r, o, raw_time) facts split into
// three chronological groups. Used by tests and the synthetic generator.
std::pair<TemporalKG, DatasetSplit> build_dataset(
    const std::vector<std::vector<ParsedLine>>& split_facts, Vocab entities,
    Vocab relations);

// Binary dataset bundle (facts + vocabularies + split boundaries).
void save_dataset(const TemporalKG& kg, const DatasetSplit& split, const std::string& path);
std::pair<TemporalKG, DatasetSplit> load_dataset_bundle(const std::string& path);

}  // namespace stk
