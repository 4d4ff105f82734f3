#include "aoplab/scorer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "aoplab/text.hpp"

namespace aoplab::scoring {

double phrase_logprob(const ScoreRecord& record, CharSpan span) {
  double sum = 0.0;
  for (const auto& tok : record.tokens) {
    const bool overlaps = tok.chars.begin < span.end && tok.chars.end > span.begin;
    if (!overlaps) continue;
    if (!span.contains(tok.chars))
      throw AlignmentError("span not token-aligned: token '" + tok.surface + "' [" +
                           std::to_string(tok.chars.begin) + "," + std::to_string(tok.chars.end) +
                           ") crosses [" + std::to_string(span.begin) + "," +
                           std::to_string(span.end) + ") in request " + record.request_id);
    sum += tok.logprob;
  }
  return sum;
}

std::vector<std::string> validate_record(const ScoreRecord& record, std::size_t text_size) {
  std::vector<std::string> warnings;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    const auto& t = record.tokens[i];
    if (t.chars.end <= t.chars.begin)
      throw InvariantError("request " + record.request_id + ": empty or inverted span at token " +
                           std::to_string(i));
    if (t.chars.begin < cursor)
      throw InvariantError("request " + record.request_id + ": overlapping spans at token " +
                           std::to_string(i));
    if (t.chars.begin > cursor)
      throw InvariantError("request " + record.request_id + ": span-coverage violation, gap [" +
                           std::to_string(cursor) + "," + std::to_string(t.chars.begin) + ")");
    cursor = t.chars.end;
    if (t.logprob > 0.0)
      warnings.push_back("request " + record.request_id + ": positive logprob at token " +
                         std::to_string(i));
  }
  if (cursor != text_size)
    throw InvariantError("request " + record.request_id + ": span-coverage violation, tokens cover " +
                         std::to_string(cursor) + " of " + std::to_string(text_size) + " bytes");
  return warnings;
}

// ---- n-gram oracle ----------------------------------------------------------

namespace {

constexpr char kSep = '\x1f';

std::string join_key(const std::vector<std::string>& toks, std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key += kSep;
    key += toks[i];
  }
  return key;
}

}  // namespace

std::vector<std::string> oracle_tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (auto w = text::unicode_space_width(s, i)) {
      i += w;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::unicode_space_width(s, j) == 0) ++j;
    out.push_back(text::to_lower(s.substr(i, j - i)));
    i = j;
  }
  return out;
}

NgramOracle::NgramOracle(const std::vector<std::string>& corpus, int order, double alpha)
    : order_(order), alpha_(alpha) {
  if (order < 1 || order > 3) throw UsageError("oracle order must be 1, 2 or 3");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw UsageError("oracle alpha must be >= 0");
  if (corpus.empty()) throw DataError("oracle corpus is empty");
  std::set<std::string> types(corpus.begin(), corpus.end());
  vocab_size_ = types.size();
  total_tokens_ = corpus.size();
  const auto n = corpus.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t len = 1; len <= static_cast<std::size_t>(order) && i + len <= n; ++len) {
      ++ngram_counts_[join_key(corpus, i, i + len)];
      // a context of length len-1 followed by a token
      if (len >= 2) ++context_counts_[join_key(corpus, i, i + len - 1)];
    }
  }
}

double NgramOracle::token_logprob(const std::vector<std::string>& history,
                                  const std::string& word) const {
  std::vector<std::string> gram(history);
  gram.push_back(word);
  const auto ngram_it = ngram_counts_.find(join_key(gram, 0, gram.size()));
  const double joint = ngram_it == ngram_counts_.end() ? 0.0 : static_cast<double>(ngram_it->second);
  double ctx;
  if (history.empty()) {
    ctx = static_cast<double>(total_tokens_);
  } else {
    const auto it = context_counts_.find(join_key(history, 0, history.size()));
    ctx = it == context_counts_.end() ? 0.0 : static_cast<double>(it->second);
  }
  const double num = joint + alpha_;
  const double den = ctx + alpha_ * static_cast<double>(vocab_size_);
  if (num == 0.0 || den == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(num / den);
}

ScoreRecord NgramOracle::score(const ScoreRequest& request) const {
  const std::string full = request.full_text();
  ScoreRecord rec;
  rec.request_id = request.request_id;
  std::vector<CharSpan> spans;
  std::vector<std::string> words;
  std::size_t i = 0;
  std::size_t pending_start = 0;
  while (i < full.size()) {
    if (auto w = text::unicode_space_width(full, i)) {
      i += w;
      continue;
    }
    std::size_t j = i;
    while (j < full.size() && text::unicode_space_width(full, j) == 0) ++j;
    spans.push_back({pending_start, j});
    words.push_back(text::to_lower(std::string_view(full).substr(i, j - i)));
    pending_start = j;
    i = j;
  }
  if (words.empty()) throw DataError("request " + request.request_id + ": nothing to score");
  spans.back().end = full.size();  // trailing whitespace joins the last token

  const auto hist_len = static_cast<std::size_t>(order_ - 1);
  for (std::size_t k = 0; k < words.size(); ++k) {
    const std::size_t h0 = k >= hist_len ? k - hist_len : 0;
    std::vector<std::string> history(words.begin() + static_cast<std::ptrdiff_t>(h0),
                                     words.begin() + static_cast<std::ptrdiff_t>(k));
    ScoredToken tok;
    tok.chars = spans[k];
    tok.surface = full.substr(spans[k].begin, spans[k].size());
    tok.logprob = token_logprob(history, words[k]);
    rec.tokens.push_back(std::move(tok));
  }
  return rec;
}

ScorerInfo NgramOracle::info() const {
  std::string name = "oracle:order=" + std::to_string(order_) + ",alpha=";
  // shortest round-trip representation keeps the name stable
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", alpha_);
  name += buf;
  return {name, true};
}

std::unique_ptr<NgramOracle> build_ngram_oracle(const std::vector<std::string>& corpus_tokens,
                                                int order, double alpha) {
  return std::make_unique<NgramOracle>(corpus_tokens, order, alpha);
}

std::unique_ptr<NgramOracle> oracle_from_spec(std::string_view spec) {
  std::string corpus;
  int order = 2;
  double alpha = 1.0;
  for (auto part : text::split(spec, ',')) {
    part = text::trim(part);
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string_view::npos) throw UsageError("oracle spec: expected key=value, got '" + std::string(part) + "'");
    const auto key = part.substr(0, eq);
    const std::string value(part.substr(eq + 1));
    try {
      if (key == "corpus") {
        corpus = value;
      } else if (key == "order") {
        order = std::stoi(value);
      } else if (key == "alpha") {
        alpha = std::stod(value);
      } else {
        throw UsageError("oracle spec: unknown key '" + std::string(key) + "'");
      }
    } catch (const std::logic_error&) {
      throw UsageError("oracle spec: bad value for '" + std::string(key) + "'");
    }
  }
  if (corpus.empty()) throw UsageError("oracle spec: corpus=PATH is required");
  std::ifstream in(corpus, std::ios::binary);
  if (!in) throw DataError("cannot open oracle corpus " + corpus);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return build_ngram_oracle(oracle_tokenize(data), order, alpha);
}

}  // namespace aoplab::scoring
