#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoplab/cap.hpp"
#include "aoplab/scorer.hpp"

namespace aoplab::metrics {

enum class Setting { isolated, contextual };
const char* to_string(Setting s);

/// Logprob mass on the three word slots of a phrase. The slot is positional:
/// in a swapped variant `first_adj` holds the original second adjective.
struct PositionScores {
  double first_adj = 0.0;
  double second_adj = 0.0;
  double noun = 0.0;
  friend bool operator==(const PositionScores&, const PositionScores&) = default;
};

struct PositionPair {
  PositionScores natural;
  PositionScores swapped;
  friend bool operator==(const PositionPair&, const PositionPair&) = default;
};

struct MetricRecord {
  std::string item_id;
  double delta_isolated = 0.0;
  double delta_contextual = 0.0;
  double c_delta = 0.0;  // delta_contextual - delta_isolated
  std::optional<double> delta_random_expect;
  // missing when the scorer's tokens cross a word boundary inside the phrase
  std::optional<PositionPair> isolated_positions;
  std::optional<PositionPair> contextual_positions;
  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// A request plus the byte spans AOP quantities are read from.
struct Variant {
  scoring::ScoreRequest request;
  CharSpan phrase;                  // a1..noun, with the whitespace before a1
  std::array<CharSpan, 3> slots{};  // first adjective, second adjective, noun
};

/// "The a1 a2 noun"; the phrase's own article is dropped.
Variant isolated_variant(const cap::Phrase& phrase, std::string request_id);
/// context + "[article] a1 a2 noun".
Variant contextual_variant(const std::string& context, const cap::Phrase& phrase,
                           std::string request_id);

double aop_delta_isolated(const cap::CapItem& item, const scoring::Scorer& scorer,
                          const cap::ArticleRules& rules = cap::ArticleRules::bundled());
double aop_delta_contextual(const cap::CapItem& item, const scoring::Scorer& scorer,
                            const cap::ArticleRules& rules = cap::ArticleRules::bundled());
/// Contextual delta of the item's phrase placed after an arbitrary context.
double aop_delta_in_context(const cap::CapItem& item, const std::string& context,
                            const scoring::Scorer& scorer, const cap::ArticleRules& rules = cap::ArticleRules::bundled());

/// Fraction of strictly positive deltas. Throws DataError on an empty list.
double aop_percent(std::span<const double> deltas);

/// k distinct indices from [0, n), sorted ascending, determined by seed.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed);

/// Mean contextual delta over `sample_size` contexts drawn without
/// replacement from the pool. The draw depends only on (seed, item_id).
double expected_random_context_delta(const cap::CapItem& item,
                                     const std::vector<std::string>& context_pool,
                                     std::size_t sample_size, std::uint64_t seed,
                                     const scoring::Scorer& scorer,
                                     const cap::ArticleRules& rules = cap::ArticleRules::bundled());

/// Contexts of all other items, deduplicated in first-seen order and
/// excluding the item's own context string.
std::vector<std::string> context_pool_for(const cap::CapItem& item,
                                          const std::vector<std::string>& all_contexts);

struct MetricOptions {
  std::size_t random_contexts = 0;  // 0 disables the random-context expectation
  std::uint64_t seed = 0;
  int workers = 0;
  const cap::ArticleRules* article_rules = nullptr;  // null: bundled table
};

MetricRecord compute_record(const cap::CapItem& item, const scoring::Scorer& scorer,
                            const cap::ArticleRules& rules = cap::ArticleRules::bundled());
std::vector<MetricRecord> compute_all(const std::vector<cap::CapItem>& corpus,
                                      const scoring::Scorer& scorer, const MetricOptions& options);

struct TokenProfile {
  Setting setting = Setting::contextual;
  std::size_t included = 0;
  std::size_t excluded = 0;
  PositionScores natural;
  PositionScores swapped;
  PositionScores difference;  // natural - swapped
};

TokenProfile profile_from_records(const std::vector<MetricRecord>& records, Setting setting);
TokenProfile token_profile(const std::vector<cap::CapItem>& corpus, const scoring::Scorer& scorer,
                           Setting setting, int workers = 0, const cap::ArticleRules& rules = cap::ArticleRules::bundled());

struct Summary {
  double aop_percent_isolated = 0.0;
  double aop_percent_contextual = 0.0;
  double mean_delta_isolated = 0.0;
  double mean_delta_contextual = 0.0;
  std::size_t tie_count = 0;       // items with a zero delta in either setting
  std::size_t excluded_count = 0;  // items without a per-position profile
};

Summary summarize(const std::vector<MetricRecord>& records);

std::string to_json_line(const MetricRecord& record);
MetricRecord from_json_line(std::string_view line, const std::string& where);
void write_jsonl(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path);
std::string summary_json(const Summary& summary);

}  // namespace aoplab::metrics
