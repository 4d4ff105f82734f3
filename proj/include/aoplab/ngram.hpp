#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aoplab/cap.hpp"
#include "aoplab/text.hpp"

namespace aoplab::ngram {

using WordId = std::uint32_t;
inline constexpr WordId kUnknownWord = 0;
inline constexpr std::uint32_t kNoPattern = 0xffffffffu;

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

/// Pattern ids of one item, indexed by n - 1.
struct ItemPatterns {
  std::array<std::uint32_t, 3> natural{};
  std::array<std::uint32_t, 3> swapped{};
};

/// Deduplicated uni/bi/trigram patterns of an evaluation corpus and the
/// Aho-Corasick automaton that finds them in a word-id stream.
class TargetIndex {
 public:
  static TargetIndex build(const std::vector<cap::CapItem>& corpus,
                           const text::NormalizeOptions& normalize = {});

  [[nodiscard]] std::size_t size() const { return patterns_.size(); }
  [[nodiscard]] const std::vector<WordId>& pattern_words(std::uint32_t p) const { return patterns_[p]; }
  [[nodiscard]] std::string pattern_text(std::uint32_t p) const;
  [[nodiscard]] int pattern_order(std::uint32_t p) const { return static_cast<int>(patterns_[p].size()); }
  [[nodiscard]] std::optional<std::uint32_t> find(std::string_view text) const;

  [[nodiscard]] std::size_t item_count() const { return items_.size(); }
  [[nodiscard]] const ItemPatterns& item_patterns(std::size_t i) const { return items_[i]; }
  [[nodiscard]] const std::string& item_id(std::size_t i) const { return item_ids_[i]; }
  [[nodiscard]] std::optional<std::size_t> find_item(std::string_view item_id) const;

  /// Id of an already normalized word; kUnknownWord when no pattern uses it.
  [[nodiscard]] WordId word_id(std::string_view word) const {
    auto it = vocab_.find(word);
    return it == vocab_.end() ? kUnknownWord : it->second;
  }
  [[nodiscard]] const std::string& word(WordId id) const { return words_[id]; }
  [[nodiscard]] std::size_t vocab_size() const { return words_.size(); }
  [[nodiscard]] const text::NormalizeOptions& normalize() const { return normalize_; }
  /// Longest pattern length, the carry needed between shards is this minus one.
  [[nodiscard]] std::size_t max_order() const { return max_order_; }
  [[nodiscard]] std::size_t state_count() const { return nodes_.size(); }
  /// Stable digest of words, patterns and normalization.
  [[nodiscard]] std::uint64_t fingerprint() const;

  static constexpr std::uint32_t kRoot = 0;

  [[nodiscard]] std::uint32_t step(std::uint32_t state, WordId w) const {
    if (w == kUnknownWord) return kRoot;
    while (state != kRoot) {
      const auto& kids = nodes_[state].children;
      std::size_t lo = 0, hi = kids.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (kids[mid].first < w)
          lo = mid + 1;
        else
          hi = mid;
      }
      if (lo < kids.size() && kids[lo].first == w) return kids[lo].second;
      state = nodes_[state].fail;
    }
    return root_next_[w];
  }

  /// Calls fn(pattern) for every pattern ending in `state`, longest first.
  template <typename Fn>
  void for_each_output(std::uint32_t state, Fn&& fn) const {
    std::uint32_t s = nodes_[state].pattern != kNoPattern ? state : nodes_[state].output;
    while (s != kNoPattern) {
      fn(nodes_[s].pattern);
      s = nodes_[s].output;
    }
  }

 private:
  struct Node {
    std::vector<std::pair<WordId, std::uint32_t>> children;  // sorted by word
    std::uint32_t fail = kRoot;
    std::uint32_t output = kNoPattern;  // nearest proper suffix state carrying a pattern
    std::uint32_t pattern = kNoPattern;
  };

  std::uint32_t intern_pattern(const std::vector<std::string>& words);
  void build_automaton();

  text::NormalizeOptions normalize_;
  std::vector<std::string> words_{""};
  std::unordered_map<std::string, WordId, StringHash, std::equal_to<>> vocab_;
  std::vector<std::vector<WordId>> patterns_;
  std::map<std::vector<WordId>, std::uint32_t> pattern_ids_;
  std::vector<ItemPatterns> items_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> item_lookup_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> root_next_;
  std::size_t max_order_ = 0;
};

struct NgramCounts {
  std::vector<std::uint64_t> counts;  // by pattern id
  std::uint64_t tokens_processed = 0;

  void merge(const NgramCounts& other);
  friend bool operator==(const NgramCounts&, const NgramCounts&) = default;
};

/// Maps tokens to word ids using the index normalization. Tokens that
/// normalize to nothing are dropped.
std::vector<WordId> encode(std::span<const std::string> tokens, const TargetIndex& index);

/// Counts over an ordered list of shards that form one token stream.
/// Matches straddling shard boundaries are recovered from an
/// (max_order - 1)-token carry. Overlapping matches all count.
NgramCounts count_stream(const std::vector<std::vector<WordId>>& shards, const TargetIndex& index,
                         int workers = 0);
NgramCounts count_stream(const std::vector<std::vector<std::string>>& shards, const TargetIndex& index,
                         int workers = 0);

/// Serial reference: joins every window of 1..3 tokens and looks it up in a
/// hash map of pattern strings. No automaton, no sharding.
NgramCounts count_naive(const std::vector<std::vector<std::string>>& shards, const TargetIndex& index);

// ---- file corpora -------------------------------------------------------------

struct CountOptions {
  bool cross_documents = false;  // lines are documents
  std::size_t chunk_bytes = std::size_t{1} << 22;
  std::string jsonl_field;  // empty: plain text, one document per line
  int workers = 0;
};

/// Name of the optional file in a corpus directory listing shard paths in order.
inline constexpr const char* kShardOrderFile = "shard_order.txt";

/// Shards of a corpus directory: the order file if present, otherwise every
/// regular non-hidden file sorted by relative path. A file path is returned
/// as a single shard.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& corpus);

NgramCounts count_files(const std::vector<std::filesystem::path>& shards, const TargetIndex& index,
                        const CountOptions& options = {});
/// Serial whole-file reference for count_files.
NgramCounts count_files_naive(const std::vector<std::filesystem::path>& shards, const TargetIndex& index,
                              const CountOptions& options = {});

// ---- timelines ----------------------------------------------------------------

struct TimelineDelta {
  std::uint64_t batch = 0;
  std::uint32_t pattern = 0;
  std::uint64_t count = 0;
  friend bool operator==(const TimelineDelta&, const TimelineDelta&) = default;
};

/// Cumulative counts per batch of `batch_tokens` tokens, stored as sparse
/// per-batch increments. A match belongs to the batch holding its last token.
class CountTimeline {
 public:
  CountTimeline() = default;
  CountTimeline(std::size_t patterns, std::uint64_t batch_tokens, std::uint64_t tokens,
                std::vector<TimelineDelta> deltas);

  [[nodiscard]] std::uint64_t batch_tokens() const { return batch_tokens_; }
  [[nodiscard]] std::uint64_t tokens_processed() const { return tokens_; }
  [[nodiscard]] std::size_t pattern_count() const { return patterns_; }
  [[nodiscard]] std::size_t num_batches() const;
  /// End offset (exclusive, in tokens) of every batch.
  [[nodiscard]] std::vector<std::uint64_t> batch_boundaries() const;
  /// Sorted by (batch, pattern).
  [[nodiscard]] const std::vector<TimelineDelta>& deltas() const { return deltas_; }
  /// Counts through batch b inclusive.
  [[nodiscard]] std::vector<std::uint64_t> snapshot(std::size_t batch) const;
  [[nodiscard]] NgramCounts final_counts() const;
  [[nodiscard]] std::vector<std::uint64_t> cumulative(std::uint32_t pattern) const;
  [[nodiscard]] std::optional<std::size_t> first_seen(std::uint32_t pattern) const;

  friend bool operator==(const CountTimeline&, const CountTimeline&) = default;

 private:
  std::size_t patterns_ = 0;
  std::uint64_t batch_tokens_ = 1;
  std::uint64_t tokens_ = 0;
  std::vector<TimelineDelta> deltas_;
  std::vector<std::optional<std::size_t>> first_seen_;
};

CountTimeline build_timeline(const std::vector<std::vector<WordId>>& shards, const TargetIndex& index,
                             std::uint64_t batch_tokens, int workers = 0);
CountTimeline build_timeline(const std::vector<std::vector<std::string>>& shards,
                             const TargetIndex& index, std::uint64_t batch_tokens, int workers = 0);

struct TimelineOptions {
  std::uint64_t batch_tokens = 0;
  std::filesystem::path checkpoint_dir;  // empty: no checkpointing
  std::size_t stop_after_rounds = 0;     // 0: run to completion
};

struct TimelineRun {
  CountTimeline timeline;
  bool complete = false;
  bool resumed = false;
  std::uint64_t units_done = 0;
};

inline constexpr const char* kCheckpointFile = "timeline.ckpt";

/// File-corpus timeline. With a checkpoint directory the state is saved
/// after every round of units and a matching checkpoint is resumed.
TimelineRun build_timeline_files(const std::vector<std::filesystem::path>& shards,
                                 const TargetIndex& index, const CountOptions& count_options,
                                 const TimelineOptions& options);

// ---- derived quantities ---------------------------------------------------------

struct RelativeCount {
  int raw_sign = 0;
  double log_diff = 0.0;  // log(c_nat + 1) - log(c_swap + 1)
  std::uint64_t natural = 0;
  std::uint64_t swapped = 0;
};

RelativeCount relative_count(std::uint64_t natural, std::uint64_t swapped);
RelativeCount relative_count(const NgramCounts& counts, const TargetIndex& index, const cap::CapItem& item,
                             int n);

/// Counts keyed by pattern text, as read back from a counts table.
using CountTable = std::unordered_map<std::string, std::uint64_t, StringHash, std::equal_to<>>;
RelativeCount relative_count(const CountTable& counts, const cap::CapItem& item, int n,
                             const text::NormalizeOptions& normalize = {});

/// The item's natural and swapped pattern strings for order n.
std::pair<std::string, std::string> item_ngrams(const cap::CapItem& item, int n,
                                                const text::NormalizeOptions& normalize = {});

struct ExposureSplit {
  std::vector<std::string> unseen, once, few, many, excluded;
  [[nodiscard]] std::size_t total() const {
    return unseen.size() + once.size() + few.size() + many.size() + excluded.size();
  }
};

ExposureSplit split_by_exposure(const CountTimeline& timeline, std::size_t checkpoint,
                                const std::vector<cap::CapItem>& corpus, const TargetIndex& index);

/// 0, 1, 2, 4, ... below the last batch, then the last batch.
std::vector<std::size_t> log_spaced_checkpoints(std::size_t num_batches);

void write_counts_tsv(std::ostream& out, const NgramCounts& counts, const TargetIndex& index);
CountTable read_counts_tsv(const std::filesystem::path& path);
std::string timeline_summary_json(const CountTimeline& timeline, const TargetIndex& index);
std::string splits_json(const CountTimeline& timeline, const std::vector<std::size_t>& checkpoints,
                        const std::vector<cap::CapItem>& corpus, const TargetIndex& index);

}  // namespace aoplab::ngram
