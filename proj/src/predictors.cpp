#include "aoplab/predictors.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <unordered_set>

#include "aoplab/json_number.hpp"
#include "aoplab/parallel.hpp"
#include "aoplab/text.hpp"

namespace aoplab::predictors {

namespace fs = std::filesystem;

// ---- PMI --------------------------------------------------------------------

void PmiTable::add(const std::string& adjective, const std::string& noun, std::uint64_t count) {
  pairs_[{adjective, noun}] += count;
  adj_counts_[adjective] += count;
  noun_counts_[noun] += count;
  total_ += count;
}

void PmiTable::merge(const PmiTable& other) {
  for (const auto& [key, c] : other.pairs_) add(key.first, key.second, c);
}

std::uint64_t PmiTable::pair_count(const std::string& a, const std::string& n) const {
  auto it = pairs_.find({a, n});
  return it == pairs_.end() ? 0 : it->second;
}

namespace {

double smoothed_total(const PmiTable& t) {
  return static_cast<double>(t.total_amod_count()) +
         t.alpha() * static_cast<double>(t.adjective_types()) * static_cast<double>(t.noun_types());
}

}  // namespace

double PmiTable::joint(const std::string& a, const std::string& n) const {
  if (!adj_counts_.count(a) || !noun_counts_.count(n)) return 0.0;
  return (static_cast<double>(pair_count(a, n)) + alpha_) / smoothed_total(*this);
}

double PmiTable::adj_marginal(const std::string& a) const {
  auto it = adj_counts_.find(a);
  if (it == adj_counts_.end()) return 0.0;
  return (static_cast<double>(it->second) + alpha_ * static_cast<double>(noun_counts_.size())) /
         smoothed_total(*this);
}

double PmiTable::noun_marginal(const std::string& n) const {
  auto it = noun_counts_.find(n);
  if (it == noun_counts_.end()) return 0.0;
  return (static_cast<double>(it->second) + alpha_ * static_cast<double>(adj_counts_.size())) /
         smoothed_total(*this);
}

std::optional<double> PmiTable::pmi(const std::string& a, const std::string& n) const {
  auto ai = adj_counts_.find(a);
  auto ni = noun_counts_.find(n);
  if (ai == adj_counts_.end() || ni == noun_counts_.end()) return std::nullopt;
  const double c_an = static_cast<double>(pair_count(a, n)) + alpha_;
  if (c_an == 0.0) return std::nullopt;
  // P(a,n) / (P(a) P(n)) = [c(a,n) / c(a)] * [T / c(n)] with smoothed counts.
  // Grouping the noun factor keeps the comparison of two adjectives against
  // one noun exact when their conditional ratios are equal.
  const double c_a = static_cast<double>(ai->second) + alpha_ * static_cast<double>(noun_counts_.size());
  const double c_n = static_cast<double>(ni->second) + alpha_ * static_cast<double>(adj_counts_.size());
  return std::log((c_an / c_a) * (smoothed_total(*this) / c_n));
}

PmiTable build_pmi_table(const std::vector<std::pair<std::string, std::string>>& amod_pairs,
                         double alpha) {
  if (amod_pairs.empty()) throw DataError("amod pair stream is empty");
  PmiTable table(alpha);
  for (const auto& [a, n] : amod_pairs) table.add(text::to_lower(a), text::to_lower(n));
  return table;
}

std::vector<std::pair<std::string, std::string>> amod_pairs(const conllu::Document& doc) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : doc.sentences) {
    for (const auto& t : s.tokens) {
      if (t.head < 0 || conllu::base_relation(t.deprel) != "amod") continue;
      out.emplace_back(text::to_lower(t.surface),
                       text::to_lower(s.tokens[static_cast<std::size_t>(t.head)].surface));
    }
  }
  return out;
}

PmiTable pmi_table_from_conllu(const fs::path& root, double alpha, int workers) {
  const auto files = conllu::list_files(root);
  std::vector<PmiTable> partial(files.size(), PmiTable(alpha));
  parallel::for_each_index(files.size(), workers, [&](std::size_t i) {
    const auto doc = conllu::parse_file(files[i], files[i].string());
    for (const auto& [a, n] : amod_pairs(doc)) partial[i].add(a, n);
  });
  PmiTable table(alpha);
  for (const auto& p : partial) table.merge(p);
  if (table.total_amod_count() == 0) throw DataError("no amod relations under " + root.string());
  return table;
}

// ---- subjectivity -------------------------------------------------------------

SubjectivityRatings SubjectivityRatings::parse(std::string_view tsv, const std::string& source) {
  SubjectivityRatings r;
  std::size_t line_no = 0;
  for (auto line : text::split(tsv, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto where = source + ":" + std::to_string(line_no);
    auto cols = text::split(line, '\t');
    if (cols.size() != 2) throw DataError(where + ": expected adjective<TAB>score");
    double v = 0.0;
    try {
      std::size_t used = 0;
      const std::string num(text::trim(cols[1]));
      v = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      // tolerate a header row
      if (line_no == 1) continue;
      throw DataError(where + ": score is not a number");
    }
    if (!std::isfinite(v)) throw DataError(where + ": score must be finite");
    r.set(std::string(text::trim(cols[0])), v);
  }
  return r;
}

SubjectivityRatings SubjectivityRatings::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open ratings file " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(data, path.string());
}

void SubjectivityRatings::set(const std::string& adjective, double score) {
  ratings_[text::to_lower(adjective)] = score;
}

std::optional<double> SubjectivityRatings::get(const std::string& adjective) const {
  auto it = ratings_.find(text::to_lower(adjective));
  if (it == ratings_.end()) return std::nullopt;
  return it->second;
}

// ---- predictors -------------------------------------------------------------

const char* to_string(Predictor p) {
  switch (p) {
    case Predictor::length:
      return "length";
    case Predictor::pmi:
      return "pmi";
    case Predictor::subjectivity:
      return "subjectivity";
  }
  return "?";
}

double length_score(const cap::CapItem& item) {
  return static_cast<double>(text::codepoint_length(item.a2)) -
         static_cast<double>(text::codepoint_length(item.a1));
}

std::optional<double> pmi_score(const cap::CapItem& item, const PmiTable& table) {
  const auto noun = text::to_lower(item.noun);
  const auto p1 = table.pmi(text::to_lower(item.a1), noun);
  const auto p2 = table.pmi(text::to_lower(item.a2), noun);
  if (!p1 || !p2) return std::nullopt;
  return *p2 - *p1;
}

std::optional<double> subjectivity_score(const cap::CapItem& item, const SubjectivityRatings& ratings) {
  const auto s1 = ratings.get(item.a1);
  const auto s2 = ratings.get(item.a2);
  if (!s1 || !s2) return std::nullopt;
  return *s1 - *s2;
}

Accuracy predictor_accuracy(const std::vector<std::optional<double>>& scores) {
  if (scores.empty()) throw DataError("predictor accuracy: no scores");
  std::size_t present = 0;
  std::size_t correct = 0;
  for (const auto& s : scores) {
    if (!s) continue;
    ++present;
    if (*s > 0.0) ++correct;
  }
  if (present == 0) throw DataError("predictor accuracy: every score is missing");
  return {static_cast<double>(correct) / static_cast<double>(present),
          static_cast<double>(present) / static_cast<double>(scores.size()), present};
}

Accuracy predictor_accuracy(const std::vector<PredictorScore>& scores) {
  std::vector<std::optional<double>> raw;
  raw.reserve(scores.size());
  for (const auto& s : scores) raw.push_back(s.score);
  return predictor_accuracy(raw);
}

OverlapPartition overlap_partition(const std::map<std::string, std::set<std::string>>& correct_sets,
                                   const std::set<std::string>& universe) {
  if (correct_sets.size() > 16) throw DataError("overlap partition supports at most 16 sets");
  OverlapPartition out;
  std::vector<const std::set<std::string>*> sets;
  for (const auto& [name, set] : correct_sets) {
    for (const auto& id : set) {
      if (!universe.count(id))
        throw DataError("overlap partition: '" + id + "' from " + name + " is outside the universe");
    }
    out.predictors.push_back(name);
    sets.push_back(&set);
  }
  const std::size_t k = sets.size();
  out.regions.resize(std::size_t{1} << k);
  for (std::size_t mask = 0; mask < out.regions.size(); ++mask) {
    for (std::size_t b = 0; b < k; ++b) {
      if (mask & (std::size_t{1} << b)) out.regions[mask].members.push_back(out.predictors[b]);
    }
  }
  for (const auto& id : universe) {
    std::size_t mask = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (sets[b]->count(id)) mask |= std::size_t{1} << b;
    }
    ++out.regions[mask].count;
  }
  if (!universe.empty())
    out.union_coverage = static_cast<double>(universe.size() - out.regions[0].count) /
                         static_cast<double>(universe.size());
  return out;
}

std::vector<ItemScores> score_items(const std::vector<cap::CapItem>& items, const PmiTable* table,
                                    const SubjectivityRatings* ratings) {
  std::vector<ItemScores> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    ItemScores s;
    s.item_id = item.item_id;
    s.length = length_score(item);
    if (table) s.pmi = pmi_score(item, *table);
    if (ratings) s.subjectivity = subjectivity_score(item, *ratings);
    out.push_back(std::move(s));
  }
  return out;
}

// ---- IO ---------------------------------------------------------------------

using ojson = nlohmann::ordered_json;

void write_jsonl(std::ostream& out, const std::vector<ItemScores>& scores) {
  for (const auto& s : scores) {
    ojson j;
    j["item_id"] = s.item_id;
    j["length"] = json_number(s.length);
    j["pmi"] = json_number(s.pmi);
    j["subjectivity"] = json_number(s.subjectivity);
    out << j.dump() << '\n';
  }
}

std::vector<ItemScores> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictor file " + path.string());
  std::vector<ItemScores> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.contains("item_id") || !j.contains("length") || !j.contains("pmi") ||
        !j.contains("subjectivity"))
      throw DataError(where + ": expected item_id, length, pmi, subjectivity");
    ItemScores s;
    s.item_id = j["item_id"].get<std::string>();
    s.length = read_number(j["length"], where);
    s.pmi = read_optional_number(j["pmi"], where);
    s.subjectivity = read_optional_number(j["subjectivity"], where);
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_json(const std::vector<ItemScores>& scores) {
  ojson j;
  j["n_items"] = scores.size();
  auto add = [&](const char* name, const std::vector<std::optional<double>>& v) {
    ojson row;
    try {
      const auto acc = predictor_accuracy(v);
      row["accuracy"] = json_number(acc.accuracy);
      row["coverage"] = json_number(acc.coverage);
      row["n"] = acc.n;
    } catch (const DataError&) {
      row["accuracy"] = nullptr;
      row["coverage"] = 0.0;
      row["n"] = 0;
    }
    j["predictors"][name] = row;
  };
  std::vector<std::optional<double>> len, pmi, subj;
  std::set<std::string> universe;
  std::map<std::string, std::set<std::string>> correct{{"length", {}}, {"pmi", {}}, {"subjectivity", {}}};
  for (const auto& s : scores) {
    len.emplace_back(s.length);
    pmi.push_back(s.pmi);
    subj.push_back(s.subjectivity);
    if (s.pmi && s.subjectivity) {
      universe.insert(s.item_id);
      if (s.length > 0) correct["length"].insert(s.item_id);
      if (*s.pmi > 0) correct["pmi"].insert(s.item_id);
      if (*s.subjectivity > 0) correct["subjectivity"].insert(s.item_id);
    }
  }
  if (!scores.empty()) {
    add("length", len);
    add("pmi", pmi);
    add("subjectivity", subj);
  }
  const auto part = overlap_partition(correct, universe);
  ojson overlap;
  overlap["universe"] = universe.size();
  overlap["union_coverage"] = json_number(part.union_coverage);
  overlap["regions"] = ojson::array();
  for (const auto& r : part.regions) overlap["regions"].push_back({{"members", r.members}, {"count", r.count}});
  j["overlap"] = overlap;
  return j.dump(2);
}

}  // namespace aoplab::predictors
