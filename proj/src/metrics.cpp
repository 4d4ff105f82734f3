#include "aoplab/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <unordered_set>

#include "aoplab/hash.hpp"
#include "aoplab/json_number.hpp"
#include "aoplab/parallel.hpp"
#include "aoplab/text.hpp"

namespace aoplab::metrics {

using scoring::phrase_logprob;
using scoring::ScoreRecord;

const char* to_string(Setting s) { return s == Setting::isolated ? "isolated" : "contextual"; }

namespace {

Variant make_variant(std::string context, std::string phrase_text, std::size_t a1_offset,
                     const cap::Phrase& phrase, std::string request_id) {
  Variant v;
  const std::size_t a1 = context.size() + a1_offset;
  const std::string full = context + phrase_text;
  std::size_t start = a1;
  while (start > 0 && text::is_ascii_space(full[start - 1])) --start;
  const std::size_t a1_end = a1 + phrase.a1.size();
  const std::size_t a2_end = a1_end + 1 + phrase.a2.size();
  const std::size_t noun_end = a2_end + 1 + phrase.noun.size();
  v.phrase = {start, noun_end};
  v.slots = {CharSpan{start, a1_end}, CharSpan{a1_end, a2_end}, CharSpan{a2_end, noun_end}};
  v.request = {std::move(request_id), std::move(context), std::move(phrase_text)};
  return v;
}

struct VariantScore {
  double phrase = 0.0;
  std::optional<PositionScores> slots;
};

VariantScore score_variant(const Variant& v, const scoring::Scorer& scorer) {
  const ScoreRecord rec = scorer.score(v.request);
  VariantScore out;
  out.phrase = phrase_logprob(rec, v.phrase);
  try {
    out.slots = PositionScores{phrase_logprob(rec, v.slots[0]), phrase_logprob(rec, v.slots[1]),
                               phrase_logprob(rec, v.slots[2])};
  } catch (const AlignmentError&) {
    out.slots.reset();
  }
  return out;
}

template <typename Fn>
auto tag_errors(const std::string& item_id, Fn&& fn) {
  try {
    return fn();
  } catch (const AlignmentError& e) {
    throw AlignmentError("item " + item_id + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError("item " + item_id + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError("item " + item_id + ": " + e.what());
  } catch (const TimeoutError& e) {
    throw TimeoutError("item " + item_id + ": " + e.what());
  } catch (const ScorerError& e) {
    throw ScorerError("item " + item_id + ": " + e.what());
  }
}

struct PairScore {
  double delta = 0.0;
  std::optional<PositionPair> positions;
};

PairScore score_pair(const Variant& natural, const Variant& swapped, const scoring::Scorer& scorer) {
  const auto nat = score_variant(natural, scorer);
  const auto swp = score_variant(swapped, scorer);
  PairScore out;
  out.delta = nat.phrase - swp.phrase;
  if (nat.slots && swp.slots) out.positions = PositionPair{*nat.slots, *swp.slots};
  return out;
}

PairScore isolated_pair(const cap::CapItem& item, const scoring::Scorer& scorer, const cap::ArticleRules& rules) {
  const auto natural = isolated_variant(item.phrase(), item.item_id + ":iso:nat");
  const auto swapped = isolated_variant(cap::swap_order(item, rules), item.item_id + ":iso:swp");
  return score_pair(natural, swapped, scorer);
}

PairScore contextual_pair(const cap::CapItem& item, const std::string& context,
                          const std::string& tag, const scoring::Scorer& scorer,
                          const cap::ArticleRules& rules) {
  const auto natural = contextual_variant(context, item.phrase(), item.item_id + ":" + tag + ":nat");
  const auto swapped =
      contextual_variant(context, cap::swap_order(item, rules), item.item_id + ":" + tag + ":swp");
  return score_pair(natural, swapped, scorer);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  while (true) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

}  // namespace

Variant isolated_variant(const cap::Phrase& phrase, std::string request_id) {
  cap::Phrase bare = phrase;
  bare.article.reset();
  return make_variant("", "The " + bare.render(), 4, phrase, std::move(request_id));
}

Variant contextual_variant(const std::string& context, const cap::Phrase& phrase,
                           std::string request_id) {
  const std::size_t a1_offset = phrase.article ? phrase.article->size() + 1 : 0;
  return make_variant(context, phrase.render(), a1_offset, phrase, std::move(request_id));
}

double aop_delta_isolated(const cap::CapItem& item, const scoring::Scorer& scorer, const cap::ArticleRules& rules) {
  return tag_errors(item.item_id, [&] { return isolated_pair(item, scorer, rules).delta; });
}

double aop_delta_contextual(const cap::CapItem& item, const scoring::Scorer& scorer,
                            const cap::ArticleRules& rules) {
  return tag_errors(item.item_id,
                    [&] { return contextual_pair(item, item.context_prefix, "ctx", scorer, rules).delta; });
}

double aop_delta_in_context(const cap::CapItem& item, const std::string& context,
                            const scoring::Scorer& scorer, const cap::ArticleRules& rules) {
  return tag_errors(item.item_id, [&] { return contextual_pair(item, context, "rnd", scorer, rules).delta; });
}

double aop_percent(std::span<const double> deltas) {
  if (deltas.empty()) throw DataError("aop_percent: empty delta list");
  const auto positive = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d > 0.0; });
  return static_cast<double>(positive) / static_cast<double>(deltas.size());
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw DataError("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double expected_random_context_delta(const cap::CapItem& item,
                                     const std::vector<std::string>& context_pool,
                                     std::size_t sample_size, std::uint64_t seed,
                                     const scoring::Scorer& scorer, const cap::ArticleRules& rules) {
  if (context_pool.empty()) throw DataError("item " + item.item_id + ": empty context pool");
  if (sample_size == 0) throw DataError("random-context sample size must be positive");
  if (sample_size > context_pool.size())
    throw DataError("item " + item.item_id + ": sample size " + std::to_string(sample_size) +
                    " exceeds pool size " + std::to_string(context_pool.size()));
  if (std::find(context_pool.begin(), context_pool.end(), item.context_prefix) != context_pool.end())
    throw DataError("item " + item.item_id + ": context pool contains the item's own context");
  const auto picks = sample_without_replacement(
      context_pool.size(), sample_size, seed ^ hash::fnv1a64(item.item_id));
  parallel::CompensatedSum sum;
  for (auto i : picks) sum.add(aop_delta_in_context(item, context_pool[i], scorer, rules));
  return sum.value() / static_cast<double>(picks.size());
}

std::vector<std::string> context_pool_for(const cap::CapItem& item,
                                          const std::vector<std::string>& all_contexts) {
  std::vector<std::string> pool;
  std::unordered_set<std::string_view> seen;
  for (const auto& c : all_contexts) {
    if (c == item.context_prefix) continue;
    if (seen.insert(c).second) pool.push_back(c);
  }
  return pool;
}

MetricRecord compute_record(const cap::CapItem& item, const scoring::Scorer& scorer, const cap::ArticleRules& rules) {
  return tag_errors(item.item_id, [&] {
    const auto iso = isolated_pair(item, scorer, rules);
    const auto ctx = contextual_pair(item, item.context_prefix, "ctx", scorer, rules);
    MetricRecord r;
    r.item_id = item.item_id;
    r.delta_isolated = iso.delta;
    r.delta_contextual = ctx.delta;
    r.c_delta = r.delta_contextual - r.delta_isolated;
    r.isolated_positions = iso.positions;
    r.contextual_positions = ctx.positions;
    return r;
  });
}

std::vector<MetricRecord> compute_all(const std::vector<cap::CapItem>& corpus,
                                      const scoring::Scorer& scorer, const MetricOptions& options) {
  {
    std::unordered_set<std::string_view> ids;
    for (const auto& item : corpus) {
      if (!ids.insert(item.item_id).second) throw DataError("duplicate item_id " + item.item_id);
    }
  }
  std::vector<std::string> contexts;
  if (options.random_contexts > 0) {
    contexts.reserve(corpus.size());
    for (const auto& item : corpus) contexts.push_back(item.context_prefix);
  }
  const auto& rules = options.article_rules ? *options.article_rules : cap::ArticleRules::bundled();
  std::vector<MetricRecord> out(corpus.size());
  parallel::for_each_index(corpus.size(), options.workers, [&](std::size_t i) {
    out[i] = compute_record(corpus[i], scorer, rules);
    if (options.random_contexts > 0) {
      const auto pool = context_pool_for(corpus[i], contexts);
      const auto k = std::min(options.random_contexts, pool.size());
      if (k > 0)
        out[i].delta_random_expect =
            expected_random_context_delta(corpus[i], pool, k, options.seed, scorer, rules);
    }
  });
  return out;
}

TokenProfile profile_from_records(const std::vector<MetricRecord>& records, Setting setting) {
  TokenProfile p;
  p.setting = setting;
  std::array<parallel::CompensatedSum, 3> nat, swp;
  for (const auto& r : records) {
    const auto& pos = setting == Setting::isolated ? r.isolated_positions : r.contextual_positions;
    if (!pos) {
      ++p.excluded;
      continue;
    }
    ++p.included;
    nat[0].add(pos->natural.first_adj);
    nat[1].add(pos->natural.second_adj);
    nat[2].add(pos->natural.noun);
    swp[0].add(pos->swapped.first_adj);
    swp[1].add(pos->swapped.second_adj);
    swp[2].add(pos->swapped.noun);
  }
  if (p.included == 0) throw DataError("token profile: every item was excluded");
  const auto n = static_cast<double>(p.included);
  p.natural = {nat[0].value() / n, nat[1].value() / n, nat[2].value() / n};
  p.swapped = {swp[0].value() / n, swp[1].value() / n, swp[2].value() / n};
  p.difference = {p.natural.first_adj - p.swapped.first_adj,
                  p.natural.second_adj - p.swapped.second_adj, p.natural.noun - p.swapped.noun};
  return p;
}

TokenProfile token_profile(const std::vector<cap::CapItem>& corpus, const scoring::Scorer& scorer,
                           Setting setting, int workers, const cap::ArticleRules& rules) {
  if (corpus.empty()) throw DataError("token profile: empty corpus");
  std::vector<MetricRecord> records(corpus.size());
  parallel::for_each_index(corpus.size(), workers, [&](std::size_t i) {
    const auto& item = corpus[i];
    const auto pair = tag_errors(item.item_id, [&] {
      return setting == Setting::isolated ? isolated_pair(item, scorer, rules)
                                          : contextual_pair(item, item.context_prefix, "ctx", scorer, rules);
    });
    records[i].item_id = item.item_id;
    (setting == Setting::isolated ? records[i].isolated_positions
                                  : records[i].contextual_positions) = pair.positions;
  });
  return profile_from_records(records, setting);
}

Summary summarize(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw DataError("metrics summary: no records");
  std::vector<double> iso, ctx;
  iso.reserve(records.size());
  ctx.reserve(records.size());
  Summary s;
  parallel::CompensatedSum iso_sum, ctx_sum;
  for (const auto& r : records) {
    iso.push_back(r.delta_isolated);
    ctx.push_back(r.delta_contextual);
    iso_sum.add(r.delta_isolated);
    ctx_sum.add(r.delta_contextual);
    if (r.delta_isolated == 0.0 || r.delta_contextual == 0.0) ++s.tie_count;
    if (!r.isolated_positions || !r.contextual_positions) ++s.excluded_count;
  }
  const auto n = static_cast<double>(records.size());
  s.aop_percent_isolated = aop_percent(iso);
  s.aop_percent_contextual = aop_percent(ctx);
  s.mean_delta_isolated = iso_sum.value() / n;
  s.mean_delta_contextual = ctx_sum.value() / n;
  return s;
}

// ---- serialization ----------------------------------------------------------

namespace {

using ojson = nlohmann::ordered_json;

ojson positions_json(const std::optional<PositionPair>& p) {
  if (!p) return nullptr;
  ojson j;
  j["first_adj"] = ojson::array({json_number(p->natural.first_adj), json_number(p->swapped.first_adj)});
  j["second_adj"] =
      ojson::array({json_number(p->natural.second_adj), json_number(p->swapped.second_adj)});
  j["noun"] = ojson::array({json_number(p->natural.noun), json_number(p->swapped.noun)});
  return j;
}

std::optional<PositionPair> positions_from(const ojson& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  PositionPair p;
  auto pair = [&](const char* key, double& nat, double& swp) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
      throw DataError(where + ": per_position." + key + " must be a 2-element array");
    nat = read_number(j[key][0], where);
    swp = read_number(j[key][1], where);
  };
  pair("first_adj", p.natural.first_adj, p.swapped.first_adj);
  pair("second_adj", p.natural.second_adj, p.swapped.second_adj);
  pair("noun", p.natural.noun, p.swapped.noun);
  return p;
}

}  // namespace

std::string to_json_line(const MetricRecord& r) {
  ojson j;
  j["item_id"] = r.item_id;
  j["delta_isolated"] = json_number(r.delta_isolated);
  j["delta_contextual"] = json_number(r.delta_contextual);
  j["c_delta"] = json_number(r.c_delta);
  j["delta_random_expect"] = json_number(r.delta_random_expect);
  j["per_position"] = {{"isolated", positions_json(r.isolated_positions)},
                       {"contextual", positions_json(r.contextual_positions)}};
  return j.dump();
}

MetricRecord from_json_line(std::string_view line, const std::string& where) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  for (const char* key : {"item_id", "delta_isolated", "delta_contextual", "c_delta"}) {
    if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  }
  if (!j["item_id"].is_string()) throw DataError(where + ": item_id must be a string");
  MetricRecord r;
  r.item_id = j["item_id"].get<std::string>();
  r.delta_isolated = read_number(j["delta_isolated"], where);
  r.delta_contextual = read_number(j["delta_contextual"], where);
  r.c_delta = read_number(j["c_delta"], where);
  if (j.contains("delta_random_expect"))
    r.delta_random_expect = read_optional_number(j["delta_random_expect"], where);
  if (j.contains("per_position") && j["per_position"].is_object()) {
    const auto& pp = j["per_position"];
    if (pp.contains("isolated")) r.isolated_positions = positions_from(pp["isolated"], where);
    if (pp.contains("contextual")) r.contextual_positions = positions_from(pp["contextual"], where);
  }
  return r;
}

void write_jsonl(std::ostream& out, const std::vector<MetricRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open metrics file " + path.string());
  std::vector<MetricRecord> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto r = from_json_line(line, path.string() + ":" + std::to_string(line_no));
    if (!ids.insert(r.item_id).second)
      throw DataError(path.string() + ": duplicate item_id " + r.item_id);
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_json(const Summary& s) {
  ojson j;
  j["aop_percent_isolated"] = json_number(s.aop_percent_isolated);
  j["aop_percent_contextual"] = json_number(s.aop_percent_contextual);
  j["mean_delta_isolated"] = json_number(s.mean_delta_isolated);
  j["mean_delta_contextual"] = json_number(s.mean_delta_contextual);
  j["tie_count"] = s.tie_count;
  j["excluded_count"] = s.excluded_count;
  return j.dump(2);
}

}  // namespace aoplab::metrics
