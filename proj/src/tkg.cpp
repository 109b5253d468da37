#include "stk/tkg.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_set>

namespace stk {

int Vocab::intern(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

int Vocab::id(const std::string& name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::name(int id) const {
  if (id < 0 || id >= size()) throw validation_error("vocab id out of range: " + std::to_string(id));
  return names_[id];
}

std::pair<std::int64_t, std::int64_t> TemporalKG::snapshot_range(int t) const {
  if (t < 0 || t >= num_times())
    throw std::out_of_range("snapshot time " + std::to_string(t) + " outside [0," +
                            std::to_string(num_times()) + ")");
  return snapshot_index_[t];
}

std::vector<Quadruple> TemporalKG::snapshot_at(int t) const {
  auto [b, e] = snapshot_range(t);
  return {facts.begin() + b, facts.begin() + e};
}

std::int64_t TemporalKG::prefix_end(int t) const {
  auto it = std::partition_point(facts.begin(), facts.end(),
                                 [t](const Quadruple& q) { return q.time < t; });
  return it - facts.begin();
}

const std::vector<std::int64_t>& TemporalKG::edges_from(int entity) const {
  return by_subject_.at(entity);
}

std::vector<std::int64_t> TemporalKG::edges_from_before(int entity, int before) const {
  const auto& all = by_subject_.at(entity);
  std::vector<std::int64_t> out;
  for (std::int64_t fi : all) {
    if (facts[fi].time >= before) break;  // adjacency is time-ordered
    out.push_back(fi);
  }
  return out;
}

void TemporalKG::build_index() {
  snapshot_index_.assign(num_times(), {0, 0});
  std::int64_t pos = 0;
  for (int t = 0; t < num_times(); ++t) {
    const std::int64_t begin = pos;
    while (pos < static_cast<std::int64_t>(facts.size()) && facts[pos].time == t) ++pos;
    snapshot_index_[t] = {begin, pos};
  }
  if (pos != static_cast<std::int64_t>(facts.size()))
    throw validation_error("facts are not sorted by normalized time");
  by_subject_.assign(num_entities(), {});
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(facts.size()); ++i)
    by_subject_[facts[i].subject].push_back(i);
}

void TemporalKG::validate() const {
  const int ne = num_entities(), nr2 = num_relations_with_inverse(), nt = num_times();
  struct KeyHash {
    std::size_t operator()(const Quadruple& q) const {
      std::size_t h = std::hash<long long>()(
          (static_cast<long long>(q.subject) << 40) ^ (static_cast<long long>(q.relation) << 20) ^
          q.object);
      return h ^ (std::hash<int>()(q.time) * 0x9e3779b9);
    }
  };
  std::unordered_multiset<Quadruple, KeyHash> all(facts.begin(), facts.end());
  for (const auto& q : facts) {
    if (q.subject < 0 || q.subject >= ne || q.object < 0 || q.object >= ne)
      throw validation_error("entity id out of range");
    if (q.relation < 0 || q.relation >= nr2) throw validation_error("relation id out of range");
    if (q.time < 0 || q.time >= nt) throw validation_error("time id out of range");
    const Quadruple inv{q.object, inverse_of(q.relation), q.subject, q.time};
    if (all.count(inv) != all.count(q))
      throw validation_error("inverse closure violated for a fact at t=" + std::to_string(q.time));
  }
}

ParsedLine parse_quadruple(const std::string& line, int line_number, Vocab& entities,
                           Vocab& relations) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (fields.size() < 4)
    throw parse_error("line " + std::to_string(line_number) + ": expected >=4 tab-separated fields, got " +
                      std::to_string(fields.size()));
  ParsedLine p;
  p.subject = entities.intern(fields[0]);
  p.relation = relations.intern(fields[1]);
  p.object = entities.intern(fields[2]);
  try {
    std::size_t used = 0;
    p.raw_time = std::stoll(fields[3], &used);
    if (used != fields[3].size()) throw std::invalid_argument("trailing chars");
  } catch (const std::exception&) {
    throw parse_error("line " + std::to_string(line_number) + ": non-numeric timestamp '" +
                      fields[3] + "'");
  }
  return p;
}

namespace {
std::vector<ParsedLine> parse_file(const std::string& path, Vocab& entities, Vocab& relations) {
  std::ifstream in(path);
  if (!in) throw missing_artifact_error("cannot open dataset file: " + path);
  std::vector<ParsedLine> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_quadruple(line, line_number, entities, relations));
  }
  return out;
}
}  // namespace

std::pair<TemporalKG, DatasetSplit> build_dataset(
    const std::vector<std::vector<ParsedLine>>& split_facts, Vocab entities, Vocab relations) {
  if (split_facts.size() != 3) throw config_error("build_dataset: expected three splits");

  // Chronological split monotonicity on raw timestamps.
  long long prev_max = std::numeric_limits<long long>::min();
  const char* names[3] = {"train", "valid", "test"};
  for (int g = 0; g < 3; ++g) {
    if (split_facts[g].empty()) continue;
    long long lo = split_facts[g].front().raw_time, hi = lo;
    for (const auto& p : split_facts[g]) {
      lo = std::min(lo, p.raw_time);
      hi = std::max(hi, p.raw_time);
    }
    if (lo < prev_max)
      throw validation_error(std::string("timestamp ordering violated: ") + names[g] +
                             " starts at " + std::to_string(lo) + " before previous split ends at " +
                             std::to_string(prev_max));
    prev_max = std::max(prev_max, hi);
  }

  // Normalize raw timestamps to consecutive ids over the observed union.
  std::map<long long, int> time_id;
  for (const auto& group : split_facts)
    for (const auto& p : group) time_id[p.raw_time] = 0;
  TemporalKG kg;
  kg.entities = std::move(entities);
  kg.relations = std::move(relations);
  int next = 0;
  for (auto& [raw, id] : time_id) {
    id = next++;
    kg.raw_times.push_back(std::to_string(raw));
  }

  const int nr = kg.num_relations();
  DatasetSplit split;
  std::int64_t cursor = 0;
  std::pair<std::int64_t, std::int64_t>* ranges[3] = {&split.train, &split.valid, &split.test};
  std::int64_t* raw_counts[3] = {&split.raw_train_facts, &split.raw_valid_facts,
                                 &split.raw_test_facts};
  for (int g = 0; g < 3; ++g) {
    ranges[g]->first = cursor;
    for (const auto& p : split_facts[g]) {
      const int t = time_id[p.raw_time];
      kg.facts.push_back({p.subject, p.relation, p.object, t});
      kg.facts.push_back({p.object, p.relation + nr, p.subject, t});
    }
    cursor += 2 * static_cast<std::int64_t>(split_facts[g].size());
    ranges[g]->second = cursor;
    *raw_counts[g] = static_cast<std::int64_t>(split_facts[g].size());
  }
  std::stable_sort(kg.facts.begin(), kg.facts.end(),
                   [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
  auto max_time_in = [&](std::pair<std::int64_t, std::int64_t> r) {
    int mt = 0;
    for (std::int64_t i = r.first; i < r.second; ++i) mt = std::max(mt, kg.facts[i].time);
    return mt;
  };
  split.train_end_time = max_time_in(split.train);
  split.valid_end_time = std::max(split.train_end_time, max_time_in(split.valid));
  kg.build_index();
  return {std::move(kg), split};
}

std::pair<TemporalKG, DatasetSplit> load_dataset(const std::string& train_path,
                                                 const std::string& valid_path,
                                                 const std::string& test_path) {
  Vocab entities, relations;
  std::vector<std::vector<ParsedLine>> groups;
  groups.push_back(parse_file(train_path, entities, relations));
  groups.push_back(parse_file(valid_path, entities, relations));
  groups.push_back(parse_file(test_path, entities, relations));
  return build_dataset(groups, std::move(entities), std::move(relations));
}

// ---- binary bundle ----

namespace {
constexpr char kMagic[8] = {'S', 'T', 'K', 'D', 'A', 'T', 'A', '1'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
}  // namespace

void save_dataset(const TemporalKG& kg, const DatasetSplit& split, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw missing_artifact_error("cannot write dataset bundle: " + path);
  os.write(kMagic, 8);
  write_u32(os, static_cast<std::uint32_t>(kg.num_entities()));
  for (int i = 0; i < kg.num_entities(); ++i) write_str(os, kg.entities.name(i));
  write_u32(os, static_cast<std::uint32_t>(kg.num_relations()));
  for (int i = 0; i < kg.num_relations(); ++i) write_str(os, kg.relations.name(i));
  write_u32(os, static_cast<std::uint32_t>(kg.num_times()));
  for (const auto& t : kg.raw_times) write_str(os, t);
  write_i64(os, static_cast<std::int64_t>(kg.facts.size()));
  for (const auto& q : kg.facts) {
    write_u32(os, static_cast<std::uint32_t>(q.subject));
    write_u32(os, static_cast<std::uint32_t>(q.relation));
    write_u32(os, static_cast<std::uint32_t>(q.object));
    write_u32(os, static_cast<std::uint32_t>(q.time));
  }
  for (auto r : {split.train, split.valid, split.test}) {
    write_i64(os, r.first);
    write_i64(os, r.second);
  }
  write_u32(os, static_cast<std::uint32_t>(split.train_end_time));
  write_u32(os, static_cast<std::uint32_t>(split.valid_end_time));
  write_i64(os, split.raw_train_facts);
  write_i64(os, split.raw_valid_facts);
  write_i64(os, split.raw_test_facts);
  if (!os) throw missing_artifact_error("short write to dataset bundle: " + path);
}

std::pair<TemporalKG, DatasetSplit> load_dataset_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw missing_artifact_error("cannot open dataset bundle: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw validation_error("not a dataset bundle (bad magic): " + path);
  TemporalKG kg;
  const std::uint32_t ne = read_u32(is);
  for (std::uint32_t i = 0; i < ne; ++i) kg.entities.intern(read_str(is));
  const std::uint32_t nr = read_u32(is);
  for (std::uint32_t i = 0; i < nr; ++i) kg.relations.intern(read_str(is));
  const std::uint32_t nt = read_u32(is);
  for (std::uint32_t i = 0; i < nt; ++i) kg.raw_times.push_back(read_str(is));
  const std::int64_t nf = read_i64(is);
  kg.facts.resize(static_cast<std::size_t>(nf));
  for (auto& q : kg.facts) {
    q.subject = static_cast<int>(read_u32(is));
    q.relation = static_cast<int>(read_u32(is));
    q.object = static_cast<int>(read_u32(is));
    q.time = static_cast<int>(read_u32(is));
  }
  DatasetSplit split;
  for (auto* r : {&split.train, &split.valid, &split.test}) {
    r->first = read_i64(is);
    r->second = read_i64(is);
  }
  split.train_end_time = static_cast<int>(read_u32(is));
  split.valid_end_time = static_cast<int>(read_u32(is));
  split.raw_train_facts = read_i64(is);
  split.raw_valid_facts = read_i64(is);
  split.raw_test_facts = read_i64(is);
  if (!is) throw validation_error("truncated dataset bundle: " + path);
  kg.build_index();
  return {std::move(kg), split};
}

}  // namespace stk
