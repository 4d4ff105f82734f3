#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aoplab/common.hpp"

namespace aoplab::scoring {

struct ScoreRequest {
  std::string request_id;
  std::string context_text;  // may be empty
  std::string phrase_text;   // non-empty

  /// The text the scorer sees; offsets in a ScoreRecord index into it.
  [[nodiscard]] std::string full_text() const { return context_text + phrase_text; }
  friend bool operator==(const ScoreRequest&, const ScoreRequest&) = default;
};

struct ScoredToken {
  std::string surface;
  CharSpan chars;
  double logprob = 0.0;  // natural log
  friend bool operator==(const ScoredToken&, const ScoredToken&) = default;
};

struct ScoreRecord {
  std::string request_id;
  std::vector<ScoredToken> tokens;
  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ScorerInfo {
  std::string name;
  bool deterministic = true;
};

/// Anything that maps text to per-token log-probabilities. Implementations
/// must be safe to call from several threads at once.
class Scorer {
 public:
  virtual ~Scorer() = default;
  [[nodiscard]] virtual ScoreRecord score(const ScoreRequest& request) const = 0;
  [[nodiscard]] virtual ScorerInfo info() const = 0;
};

/// Sum of the logprobs of every token lying inside `span`. A token that only
/// partly overlaps the span raises AlignmentError.
double phrase_logprob(const ScoreRecord& record, CharSpan span);

/// Checks that token spans tile [0, text_size) in order. Overlaps raise
/// InvariantError("overlapping spans"), gaps raise InvariantError
/// ("span-coverage violation"). Positive logprobs are returned as warnings.
std::vector<std::string> validate_record(const ScoreRecord& record, std::size_t text_size);

/// Count-based n-gram model over whitespace tokens (lowercased). Each token's
/// span absorbs the whitespace in front of it so spans tile the text.
///
///   logprob(w | h) = log((count(h, w) + alpha) / (count(h) + alpha * V))
///
/// where h is up to order-1 preceding tokens of the scored text (shorter at
/// the start of the text), count(h) is the number of times h is followed by
/// any token in the corpus and V the number of corpus types. With alpha = 0
/// an unseen event yields -infinity.
class NgramOracle final : public Scorer {
 public:
  NgramOracle(const std::vector<std::string>& corpus_tokens, int order, double alpha);

  [[nodiscard]] ScoreRecord score(const ScoreRequest& request) const override;
  [[nodiscard]] ScorerInfo info() const override;

  [[nodiscard]] double token_logprob(const std::vector<std::string>& history,
                                     const std::string& word) const;
  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] std::size_t vocab_size() const { return vocab_size_; }

 private:
  int order_;
  double alpha_;
  std::size_t vocab_size_ = 0;
  std::size_t total_tokens_ = 0;
  // key: tokens joined by '\x1f'
  std::unordered_map<std::string, std::uint64_t> ngram_counts_;
  std::unordered_map<std::string, std::uint64_t> context_counts_;
};

/// Splits on whitespace and lowercases, the oracle's tokenization.
std::vector<std::string> oracle_tokenize(std::string_view text);

std::unique_ptr<NgramOracle> build_ngram_oracle(const std::vector<std::string>& corpus_tokens,
                                                int order, double alpha);

/// Parses "corpus=PATH,order=N,alpha=X" (the part after "oracle:").
std::unique_ptr<NgramOracle> oracle_from_spec(std::string_view spec);

}  // namespace aoplab::scoring
