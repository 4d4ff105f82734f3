#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoplab/cap.hpp"
#include "aoplab/metrics.hpp"
#include "aoplab/ngram.hpp"
#include "aoplab/predictors.hpp"

namespace aoplab::analysis {

/// 1-based ranks, ties receive the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

/// Spearman rho. Requires equal lengths, at least 3 values, all finite
/// (DataError otherwise). Missing when either side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Lenient variant for reports: pairs with a non-finite side are dropped,
/// and fewer than 3 remaining pairs gives a missing value.
std::optional<double> spearman_finite(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> v);

enum class Quadrant { both_positive, rescued, breaks, both_nonpositive };
const char* to_string(Quadrant q);
/// Zero counts as non-positive.
Quadrant classify(double delta_isolated, double delta_contextual);

struct QuadrantReport {
  std::size_t n = 0;
  std::size_t both_positive = 0;
  std::size_t rescued = 0;  // isolated <= 0 < contextual
  std::size_t breaks = 0;   // contextual <= 0 < isolated
  std::size_t both_nonpositive = 0;
  std::size_t improved = 0;  // contextual > isolated

  [[nodiscard]] double fraction(std::size_t count) const {
    return static_cast<double>(count) / static_cast<double>(n);
  }
};

QuadrantReport quadrant_report(const std::vector<metrics::MetricRecord>& records);

struct ContextRandomReport {
  std::size_t n = 0;         // records with a random-context expectation
  std::size_t excluded = 0;  // records without one
  std::size_t true_improves = 0;
  std::size_t random_improves = 0;
  std::size_t true_only = 0;

  [[nodiscard]] std::optional<double> fraction(std::size_t count) const {
    if (n == 0) return std::nullopt;
    return static_cast<double>(count) / static_cast<double>(n);
  }
};

ContextRandomReport context_vs_random_report(const std::vector<metrics::MetricRecord>& records);

struct CheckpointTable {
  std::string label;
  std::vector<metrics::MetricRecord> records;
};

/// Ordered checkpoints; the last one is treated as final.
struct CheckpointSeries {
  std::vector<CheckpointTable> checkpoints;
};

/// Checks that every table covers the same item ids. Throws DataError.
void check_universe(const CheckpointSeries& series);

/// A metrics file is one checkpoint; a directory holds one *.jsonl per
/// checkpoint, ordered by checkpoints.txt when present and by natural sort
/// of the file stems otherwise.
CheckpointSeries load_series(const std::filesystem::path& path);
inline constexpr const char* kCheckpointOrderFile = "checkpoints.txt";

/// "ckpt2" < "ckpt10".
bool natural_less(std::string_view a, std::string_view b);

struct SettingStats {
  double aop_percent = 0.0;
  double mean_delta = 0.0;
  double median_delta = 0.0;
  std::optional<double> rho_vs_final;
  std::optional<double> rho_vs_counts;
};

struct PhaseRow {
  std::string checkpoint;
  SettingStats isolated;
  SettingStats contextual;
};

/// count_signal maps item_id to a count-based score (e.g. bigram log
/// difference). Requires at least 2 checkpoints.
std::vector<PhaseRow> phase_summary(const CheckpointSeries& series,
                                    const std::map<std::string, double>* count_signal = nullptr);

/// Exposure splits as written by the count stage: checkpoint -> bucket -> ids.
struct SplitTable {
  std::vector<std::string> checkpoints;  // in file order
  std::map<std::string, std::map<std::string, std::vector<std::string>>> buckets;
};
SplitTable read_splits_json(const std::filesystem::path& path);

struct ReportInputs {
  CheckpointSeries series;  // at least one checkpoint
  std::vector<cap::CapItem> corpus;
  std::optional<ngram::CountTable> counts;
  std::optional<std::vector<predictors::ItemScores>> predictors;
  std::optional<SplitTable> splits;
  text::NormalizeOptions normalize;
};

struct ReportResult {
  std::vector<std::string> files;    // relative names, sorted
  std::map<std::string, std::string> omitted;  // section -> reason
};

/// Writes the CSV tables, summary.json and manifest.json into out_dir.
/// Output bytes depend on the inputs only.
ReportResult emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace aoplab::analysis
