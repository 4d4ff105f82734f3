#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aoplab/cap.hpp"
#include "aoplab/conllu.hpp"

namespace aoplab::predictors {

/// Adjective-noun co-occurrence counts from amod relations. Probabilities are
/// derived on demand: P(a,n) = (c(a,n) + alpha) / (T + alpha |A| |N|), and
/// P(a), P(n) are the row/column sums of that joint.
class PmiTable {
 public:
  explicit PmiTable(double alpha = 0.0) : alpha_(alpha) {}

  void add(const std::string& adjective, const std::string& noun, std::uint64_t count = 1);
  /// Pointwise sum; alpha of `this` is kept.
  void merge(const PmiTable& other);

  [[nodiscard]] std::uint64_t total_amod_count() const { return total_; }
  [[nodiscard]] std::uint64_t pair_count(const std::string& a, const std::string& n) const;
  [[nodiscard]] double joint(const std::string& a, const std::string& n) const;
  [[nodiscard]] double adj_marginal(const std::string& a) const;
  [[nodiscard]] double noun_marginal(const std::string& n) const;
  /// log P(a,n) - log P(a) - log P(n); nullopt when the pair has zero mass.
  [[nodiscard]] std::optional<double> pmi(const std::string& a, const std::string& n) const;

  [[nodiscard]] const std::map<std::pair<std::string, std::string>, std::uint64_t>& pairs() const {
    return pairs_;
  }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] std::size_t adjective_types() const { return adj_counts_.size(); }
  [[nodiscard]] std::size_t noun_types() const { return noun_counts_.size(); }

 private:
  double alpha_;
  std::uint64_t total_ = 0;
  std::map<std::pair<std::string, std::string>, std::uint64_t> pairs_;
  std::map<std::string, std::uint64_t, std::less<>> adj_counts_;
  std::map<std::string, std::uint64_t, std::less<>> noun_counts_;
};

/// Keys are lowercased. Throws DataError on an empty stream.
PmiTable build_pmi_table(const std::vector<std::pair<std::string, std::string>>& amod_pairs,
                         double alpha = 0.0);

/// (dependent, head) surface pairs, lowercased, for every amod relation.
std::vector<std::pair<std::string, std::string>> amod_pairs(const conllu::Document& doc);
/// Streams every *.conllu file under root into one table.
PmiTable pmi_table_from_conllu(const std::filesystem::path& root, double alpha, int workers);

class SubjectivityRatings {
 public:
  /// Two-column TSV: adjective<TAB>score. Keys are lowercased.
  static SubjectivityRatings parse(std::string_view tsv, const std::string& source);
  static SubjectivityRatings load(const std::filesystem::path& path);
  void set(const std::string& adjective, double score);

  [[nodiscard]] std::optional<double> get(const std::string& adjective) const;
  [[nodiscard]] std::size_t size() const { return ratings_.size(); }

 private:
  std::map<std::string, double, std::less<>> ratings_;
};

enum class Predictor { length, pmi, subjectivity };
const char* to_string(Predictor p);

struct PredictorScore {
  std::string item_id;
  Predictor predictor = Predictor::length;
  std::optional<double> score;
};

/// |a2| - |a1| in code points.
double length_score(const cap::CapItem& item);
/// PMI(a2; n) - PMI(a1; n)
std::optional<double> pmi_score(const cap::CapItem& item, const PmiTable& table);
/// Subj(a1) - Subj(a2)
std::optional<double> subjectivity_score(const cap::CapItem& item, const SubjectivityRatings& ratings);

struct Accuracy {
  double accuracy = 0.0;
  double coverage = 0.0;
  std::size_t n = 0;  // items with a score
};

/// Accuracy counts strictly positive scores among the non-missing ones.
Accuracy predictor_accuracy(const std::vector<PredictorScore>& scores);
Accuracy predictor_accuracy(const std::vector<std::optional<double>>& scores);

struct OverlapRegion {
  std::vector<std::string> members;  // predictors whose correct sets contain the items
  std::size_t count = 0;
};

struct OverlapPartition {
  std::vector<std::string> predictors;  // bit i of a region index <-> predictors[i]
  std::vector<OverlapRegion> regions;   // 2^k entries, indexed by membership mask
  double union_coverage = 0.0;
};

OverlapPartition overlap_partition(const std::map<std::string, std::set<std::string>>& correct_sets,
                                   const std::set<std::string>& universe);

struct ItemScores {
  std::string item_id;
  double length = 0.0;
  std::optional<double> pmi;
  std::optional<double> subjectivity;
};

std::vector<ItemScores> score_items(const std::vector<cap::CapItem>& items, const PmiTable* table,
                                    const SubjectivityRatings* ratings);

void write_jsonl(std::ostream& out, const std::vector<ItemScores>& scores);
std::vector<ItemScores> read_jsonl(const std::filesystem::path& path);

/// Per-predictor accuracy plus the overlap partition over the items that
/// every predictor covers.
std::string summary_json(const std::vector<ItemScores>& scores);

}  // namespace aoplab::predictors
