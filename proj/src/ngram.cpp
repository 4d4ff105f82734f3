#include "aoplab/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "aoplab/hash.hpp"
#include "aoplab/parallel.hpp"

namespace aoplab::ngram {

namespace fs = std::filesystem;

// ---- target index -------------------------------------------------------------

namespace {

std::string normalized_word(const std::string& raw, const text::NormalizeOptions& opts,
                            const std::string& item_id) {
  std::string out;
  if (!text::normalize_token(raw, opts, out))
    throw DataError("item " + item_id + ": '" + raw + "' normalizes to an empty token");
  if (text::contains_whitespace(out))
    throw DataError("item " + item_id + ": '" + raw + "' contains whitespace");
  return out;
}

std::array<std::vector<std::string>, 2> item_words(const cap::CapItem& item, int n,
                                                   const text::NormalizeOptions& opts) {
  const auto a1 = normalized_word(item.a1, opts, item.item_id);
  const auto a2 = normalized_word(item.a2, opts, item.item_id);
  switch (n) {
    case 1:
      return {{{a1}, {a2}}};
    case 2:
      return {{{a1, a2}, {a2, a1}}};
    case 3: {
      const auto noun = normalized_word(item.noun, opts, item.item_id);
      return {{{a1, a2, noun}, {a2, a1, noun}}};
    }
    default:
      throw UsageError("n-gram order must be 1, 2 or 3");
  }
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::uint32_t TargetIndex::intern_pattern(const std::vector<std::string>& words) {
  std::vector<WordId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    auto it = vocab_.find(w);
    if (it == vocab_.end()) {
      it = vocab_.emplace(w, static_cast<WordId>(words_.size())).first;
      words_.push_back(w);
    }
    ids.push_back(it->second);
  }
  auto [it, inserted] = pattern_ids_.emplace(ids, static_cast<std::uint32_t>(patterns_.size()));
  if (inserted) {
    patterns_.push_back(ids);
    max_order_ = std::max(max_order_, ids.size());
  }
  return it->second;
}

TargetIndex TargetIndex::build(const std::vector<cap::CapItem>& corpus,
                               const text::NormalizeOptions& normalize) {
  if (corpus.empty()) throw DataError("cannot build a target index from an empty corpus");
  TargetIndex index;
  index.normalize_ = normalize;
  for (const auto& item : corpus) {
    if (index.item_lookup_.count(item.item_id)) throw DataError("duplicate item_id " + item.item_id);
    ItemPatterns ip;
    for (int n = 1; n <= 3; ++n) {
      const auto words = item_words(item, n, normalize);
      ip.natural[static_cast<std::size_t>(n - 1)] = index.intern_pattern(words[0]);
      ip.swapped[static_cast<std::size_t>(n - 1)] = index.intern_pattern(words[1]);
    }
    index.item_lookup_.emplace(item.item_id, index.items_.size());
    index.items_.push_back(ip);
    index.item_ids_.push_back(item.item_id);
  }
  index.build_automaton();
  return index;
}

void TargetIndex::build_automaton() {
  nodes_.assign(1, Node{});
  for (std::uint32_t p = 0; p < patterns_.size(); ++p) {
    std::uint32_t s = kRoot;
    for (WordId w : patterns_[p]) {
      auto& kids = nodes_[s].children;
      auto it = std::find_if(kids.begin(), kids.end(), [&](const auto& c) { return c.first == w; });
      if (it != kids.end()) {
        s = it->second;
        continue;
      }
      const auto next = static_cast<std::uint32_t>(nodes_.size());
      nodes_[s].children.emplace_back(w, next);
      nodes_.emplace_back();
      s = next;
    }
    nodes_[s].pattern = p;
  }
  for (auto& n : nodes_) std::sort(n.children.begin(), n.children.end());

  root_next_.assign(words_.size(), kRoot);
  for (const auto& [w, child] : nodes_[kRoot].children) root_next_[w] = child;

  std::deque<std::uint32_t> queue;
  for (const auto& [w, child] : nodes_[kRoot].children) {
    nodes_[child].fail = kRoot;
    queue.push_back(child);
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (const auto& [w, v] : nodes_[u].children) {
      const auto f = step(nodes_[u].fail, w);
      nodes_[v].fail = f;
      nodes_[v].output = nodes_[f].pattern != kNoPattern ? f : nodes_[f].output;
      queue.push_back(v);
    }
  }
}

std::string TargetIndex::pattern_text(std::uint32_t p) const {
  std::string out;
  for (WordId w : patterns_[p]) {
    if (!out.empty()) out += ' ';
    out += words_[w];
  }
  return out;
}

std::optional<std::uint32_t> TargetIndex::find(std::string_view text) const {
  std::vector<WordId> ids;
  for (auto part : text::split(text, ' ')) {
    const auto id = word_id(part);
    if (id == kUnknownWord) return std::nullopt;
    ids.push_back(id);
  }
  auto it = pattern_ids_.find(ids);
  if (it == pattern_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> TargetIndex::find_item(std::string_view item_id) const {
  auto it = item_lookup_.find(item_id);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t TargetIndex::fingerprint() const {
  std::string blob = normalize_.lowercase ? "L1" : "L0";
  blob += normalize_.strip_punct ? "P1" : "P0";
  for (std::uint32_t p = 0; p < patterns_.size(); ++p) {
    blob += '\n';
    blob += pattern_text(p);
  }
  return hash::fnv1a64(blob);
}

void NgramCounts::merge(const NgramCounts& other) {
  if (counts.size() < other.counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t i = 0; i < other.counts.size(); ++i) counts[i] += other.counts[i];
  tokens_processed += other.tokens_processed;
}

std::vector<WordId> encode(std::span<const std::string> tokens, const TargetIndex& index) {
  std::vector<WordId> out;
  out.reserve(tokens.size());
  std::string scratch;
  for (const auto& t : tokens) {
    if (text::normalize_token(t, index.normalize(), scratch)) out.push_back(index.word_id(scratch));
  }
  return out;
}

// ---- engine -----------------------------------------------------------------

namespace {

struct UnitResult {
  std::uint64_t tokens = 0;
  std::vector<WordId> head;  // first max_order-1 tokens
  std::vector<WordId> tail;  // last max_order-1 tokens
  std::vector<std::uint64_t> counts;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> events;  // (local end position, pattern)
};

class Scanner {
 public:
  Scanner(const TargetIndex& index, bool timeline, UnitResult& out)
      : index_(index), timeline_(timeline), carry_(index.max_order() - 1), out_(out) {}

  void reset() { state_ = TargetIndex::kRoot; }

  void push(WordId w) {
    if (out_.head.size() < carry_) out_.head.push_back(w);
    if (carry_ > 0) {
      if (out_.tail.size() == carry_) out_.tail.erase(out_.tail.begin());
      out_.tail.push_back(w);
    }
    state_ = index_.step(state_, w);
    index_.for_each_output(state_, [&](std::uint32_t p) {
      if (timeline_)
        out_.events.emplace_back(out_.tokens, p);
      else
        ++out_.counts[p];
    });
    ++out_.tokens;
  }

 private:
  const TargetIndex& index_;
  bool timeline_;
  std::size_t carry_;
  UnitResult& out_;
  std::uint32_t state_ = TargetIndex::kRoot;
};

/// Round-based driver: units of a round are scanned in parallel, then merged
/// and stitched serially in unit order.
class Engine {
 public:
  Engine(const TargetIndex& index, bool timeline, bool stitch, std::uint64_t batch_tokens)
      : index_(index), timeline_(timeline), stitch_(stitch), batch_tokens_(batch_tokens),
        counts_(index.size(), 0) {}

  template <typename ScanUnit, typename AfterRound>
  void run(std::size_t n_units, int workers, ScanUnit&& scan_unit, AfterRound&& after_round) {
    const std::size_t round = static_cast<std::size_t>(parallel::resolve_workers(workers)) * 4;
    while (units_done_ < n_units) {
      const std::size_t m = std::min(round, n_units - units_done_);
      std::vector<UnitResult> results(m);
      const std::size_t base = units_done_;
      parallel::for_each_index(m, workers, [&](std::size_t i) {
        if (!timeline_) results[i].counts.assign(index_.size(), 0);
        Scanner scanner(index_, timeline_, results[i]);
        scan_unit(base + i, scanner);
      });
      for (auto& r : results) absorb(r);
      units_done_ += m;
      if (timeline_) flush_events();
      if (!after_round()) return;
    }
  }

  [[nodiscard]] NgramCounts counts() const { return {counts_, offset_}; }
  [[nodiscard]] CountTimeline timeline() const {
    return CountTimeline(index_.size(), batch_tokens_, offset_, deltas_);
  }

  // checkpoint state
  std::uint64_t units_done_ = 0;
  std::uint64_t offset_ = 0;
  std::vector<WordId> tail_;
  std::vector<TimelineDelta> deltas_;

 private:
  void record(std::uint64_t end_pos, std::uint32_t p) {
    if (timeline_)
      pending_.push_back({end_pos / batch_tokens_, p, 1});
    else
      ++counts_[p];
  }

  void absorb(const UnitResult& r) {
    if (stitch_ && !tail_.empty() && !r.head.empty()) {
      std::vector<WordId> seq(tail_);
      seq.insert(seq.end(), r.head.begin(), r.head.end());
      std::uint32_t state = TargetIndex::kRoot;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        state = index_.step(state, seq[j]);
        if (j < tail_.size()) continue;
        index_.for_each_output(state, [&](std::uint32_t p) {
          const std::size_t len = index_.pattern_words(p).size();
          if (j + 1 < tail_.size() + len) record(offset_ + (j - tail_.size()), p);
        });
      }
    }
    if (timeline_) {
      for (const auto& [pos, p] : r.events) record(offset_ + pos, p);
    } else {
      for (std::size_t p = 0; p < r.counts.size(); ++p) counts_[p] += r.counts[p];
    }
    if (stitch_) {
      const std::size_t carry = index_.max_order() - 1;
      tail_.insert(tail_.end(), r.tail.begin(), r.tail.end());
      if (tail_.size() > carry) tail_.erase(tail_.begin(), tail_.end() - static_cast<std::ptrdiff_t>(carry));
    }
    offset_ += r.tokens;
  }

  void flush_events() {
    if (pending_.empty()) return;
    auto key_less = [](const TimelineDelta& a, const TimelineDelta& b) {
      return a.batch != b.batch ? a.batch < b.batch : a.pattern < b.pattern;
    };
    std::sort(pending_.begin(), pending_.end(), key_less);
    std::vector<TimelineDelta> fresh;
    for (const auto& d : pending_) {
      if (!fresh.empty() && fresh.back().batch == d.batch && fresh.back().pattern == d.pattern)
        fresh.back().count += d.count;
      else
        fresh.push_back(d);
    }
    pending_.clear();
    // new events never precede the previous round by more than the carry,
    // so only a short suffix of the existing deltas takes part in the merge
    const auto split = std::lower_bound(deltas_.begin(), deltas_.end(), fresh.front(), key_less);
    std::vector<TimelineDelta> suffix(split, deltas_.end());
    deltas_.erase(split, deltas_.end());
    std::size_t i = 0, j = 0;
    while (i < suffix.size() || j < fresh.size()) {
      if (j == fresh.size() || (i < suffix.size() && key_less(suffix[i], fresh[j]))) {
        deltas_.push_back(suffix[i++]);
      } else if (i == suffix.size() || key_less(fresh[j], suffix[i])) {
        deltas_.push_back(fresh[j++]);
      } else {
        deltas_.push_back({suffix[i].batch, suffix[i].pattern, suffix[i].count + fresh[j].count});
        ++i;
        ++j;
      }
    }
  }

  const TargetIndex& index_;
  bool timeline_;
  bool stitch_;
  std::uint64_t batch_tokens_;
  std::vector<std::uint64_t> counts_;
  std::vector<TimelineDelta> pending_;
};

std::vector<std::vector<WordId>> encode_all(const std::vector<std::vector<std::string>>& shards,
                                            const TargetIndex& index) {
  std::vector<std::vector<WordId>> out;
  out.reserve(shards.size());
  for (const auto& s : shards) out.push_back(encode(s, index));
  return out;
}

void scan_ids(const std::vector<WordId>& ids, Scanner& scanner) {
  for (WordId w : ids) scanner.push(w);
}

}  // namespace

NgramCounts count_stream(const std::vector<std::vector<WordId>>& shards, const TargetIndex& index,
                         int workers) {
  Engine engine(index, false, true, 1);
  engine.run(shards.size(), workers, [&](std::size_t u, Scanner& s) { scan_ids(shards[u], s); },
             [] { return true; });
  return engine.counts();
}

NgramCounts count_stream(const std::vector<std::vector<std::string>>& shards, const TargetIndex& index,
                         int workers) {
  return count_stream(encode_all(shards, index), index, workers);
}

namespace {

struct NaiveTable {
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> patterns;
  std::size_t max_order = 0;

  explicit NaiveTable(const TargetIndex& index) : max_order(index.max_order()) {
    for (std::uint32_t p = 0; p < index.size(); ++p) patterns.emplace(index.pattern_text(p), p);
  }

  void count(const std::vector<std::string>& tokens, std::vector<std::uint64_t>& counts) const {
    std::string window;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      window.clear();
      for (std::size_t n = 1; n <= max_order && i + n <= tokens.size(); ++n) {
        if (n > 1) window += ' ';
        window += tokens[i + n - 1];
        auto it = patterns.find(window);
        if (it != patterns.end()) ++counts[it->second];
      }
    }
  }
};

std::vector<std::string> normalize_all(const std::vector<std::string>& raw, const text::NormalizeOptions& opts) {
  std::vector<std::string> out;
  std::string scratch;
  for (const auto& t : raw) {
    if (text::normalize_token(t, opts, scratch)) out.push_back(scratch);
  }
  return out;
}

}  // namespace

NgramCounts count_naive(const std::vector<std::vector<std::string>>& shards, const TargetIndex& index) {
  std::vector<std::string> stream;
  for (const auto& s : shards) {
    auto n = normalize_all(s, index.normalize());
    stream.insert(stream.end(), std::make_move_iterator(n.begin()), std::make_move_iterator(n.end()));
  }
  NaiveTable table(index);
  NgramCounts out{std::vector<std::uint64_t>(index.size(), 0), stream.size()};
  table.count(stream, out.counts);
  return out;
}

// ---- file corpora -------------------------------------------------------------

std::vector<fs::path> list_shards(const fs::path& corpus) {
  if (fs::is_regular_file(corpus)) return {corpus};
  if (!fs::is_directory(corpus)) throw DataError("corpus not found: " + corpus.string());
  std::vector<fs::path> out;
  const auto order = corpus / kShardOrderFile;
  if (fs::exists(order)) {
    std::ifstream in(order);
    if (!in) throw DataError("cannot read " + order.string());
    std::string line;
    while (std::getline(in, line)) {
      const auto entry = text::trim(line);
      if (entry.empty() || entry[0] == '#') continue;
      auto path = corpus / std::string(entry);
      if (!fs::is_regular_file(path)) throw DataError(order.string() + ": shard not found: " + path.string());
      out.push_back(path);
    }
  } else {
    for (const auto& entry : fs::recursive_directory_iterator(corpus)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), corpus);
      bool hidden = false;
      for (const auto& part : rel) hidden = hidden || part.string().starts_with('.');
      if (!hidden) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(), [&](const fs::path& a, const fs::path& b) {
      return fs::relative(a, corpus).generic_string() < fs::relative(b, corpus).generic_string();
    });
  }
  if (out.empty()) throw DataError("no shards under " + corpus.string());
  return out;
}

namespace {

std::uint64_t shard_size(const fs::path& p) {
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  if (ec) throw DataError("cannot read shard " + p.string() + ": " + ec.message());
  return size;
}

/// Unit k of a file holds the lines starting in [k*C, (k+1)*C).
struct UnitPlan {
  std::vector<fs::path> files;
  std::vector<std::uint64_t> sizes;
  std::vector<std::uint64_t> first_unit;  // prefix sums, one extra entry
  std::size_t chunk = 1;

  UnitPlan(const std::vector<fs::path>& shards, std::size_t chunk_bytes) : files(shards), chunk(chunk_bytes) {
    if (chunk == 0) throw UsageError("chunk_bytes must be positive");
    first_unit.push_back(0);
    for (const auto& f : files) {
      sizes.push_back(shard_size(f));
      first_unit.push_back(first_unit.back() + (sizes.back() + chunk - 1) / chunk);
    }
  }

  [[nodiscard]] std::size_t units() const { return first_unit.back(); }

  [[nodiscard]] std::pair<std::size_t, std::uint64_t> locate(std::size_t u) const {
    const auto it = std::upper_bound(first_unit.begin(), first_unit.end(), u);
    const auto f = static_cast<std::size_t>(it - first_unit.begin()) - 1;
    return {f, u - first_unit[f]};
  }

  [[nodiscard]] std::string read(std::size_t u) const {
    const auto [f, k] = locate(u);
    const auto& path = files[f];
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read shard " + path.string());
    const std::uint64_t size = sizes[f];
    const std::uint64_t lo = k * chunk;
    const std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, size);
    std::uint64_t begin = lo;
    constexpr std::size_t kBlock = 1 << 16;
    std::string block;
    if (k > 0) {
      // skip the line that started in the previous unit
      in.seekg(static_cast<std::streamoff>(lo - 1));
      std::uint64_t pos = lo - 1;
      bool found = false;
      while (!found && pos < size) {
        block.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, size - pos)));
        in.read(block.data(), static_cast<std::streamsize>(block.size()));
        if (!in) throw DataError("cannot read shard " + path.string());
        const auto nl = block.find('\n');
        if (nl != std::string::npos) {
          begin = pos + nl + 1;
          found = true;
        } else {
          pos += block.size();
        }
      }
      if (!found || begin >= hi) return {};
    }
    // lines starting before hi, the last one read through its newline
    in.clear();
    in.seekg(static_cast<std::streamoff>(begin));
    std::string out(static_cast<std::size_t>(hi - begin), '\0');
    in.read(out.data(), static_cast<std::streamsize>(out.size()));
    if (!in) throw DataError("cannot read shard " + path.string());
    std::uint64_t pos = hi;
    while (!out.empty() && out.back() != '\n' && pos < size) {
      block.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, size - pos)));
      in.read(block.data(), static_cast<std::streamsize>(block.size()));
      if (!in) throw DataError("cannot read shard " + path.string());
      const auto nl = block.find('\n');
      if (nl != std::string::npos) {
        out.append(block, 0, nl + 1);
        break;
      }
      out += block;
      pos += block.size();
    }
    return out;
  }
};

std::string_view document_text(std::string_view line, const std::string& field, std::string& storage,
                                const std::string& where) {
  if (field.empty()) return line;
  if (text::trim(line).empty()) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  if (!j.is_object() || !j.contains(field) || !j[field].is_string())
    throw DataError(where + ": missing string field '" + field + "'");
  storage = j[field].get<std::string>();
  return storage;
}

template <typename Fn>
void for_each_line(std::string_view data, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    if (nl == std::string_view::npos) nl = data.size();
    fn(data.substr(pos, nl - pos), pos);
    pos = nl + 1;
  }
}

void scan_file_unit(const UnitPlan& plan, std::size_t u, const TargetIndex& index, const CountOptions& options,
                    Scanner& scanner) {
  const auto data = plan.read(u);
  const auto [f, k] = plan.locate(u);
  std::string scratch, storage;
  for_each_line(data, [&](std::string_view line, std::size_t at) {
    const auto doc = document_text(line, options.jsonl_field, storage,
                                   plan.files[f].string() + ": byte " + std::to_string(k * plan.chunk + at));
    if (!options.cross_documents) scanner.reset();
    text::for_each_token(doc, index.normalize(), scratch,
                         [&](std::string_view tok) { scanner.push(index.word_id(tok)); });
  });
}

}  // namespace

NgramCounts count_files(const std::vector<fs::path>& shards, const TargetIndex& index,
                        const CountOptions& options) {
  const UnitPlan plan(shards, options.chunk_bytes);
  Engine engine(index, false, options.cross_documents, 1);
  engine.run(plan.units(), options.workers,
             [&](std::size_t u, Scanner& s) { scan_file_unit(plan, u, index, options, s); },
             [] { return true; });
  return engine.counts();
}

NgramCounts count_files_naive(const std::vector<fs::path>& shards, const TargetIndex& index,
                              const CountOptions& options) {
  NaiveTable table(index);
  NgramCounts out{std::vector<std::uint64_t>(index.size(), 0), 0};
  std::vector<std::string> stream;
  std::string storage;
  for (const auto& path : shards) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read shard " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto doc = document_text(line, options.jsonl_field, storage,
                                     path.string() + ": line " + std::to_string(line_no));
      auto tokens = text::normalize_line(doc, index.normalize());
      out.tokens_processed += tokens.size();
      if (options.cross_documents) {
        stream.insert(stream.end(), tokens.begin(), tokens.end());
      } else {
        table.count(tokens, out.counts);
      }
    }
  }
  if (options.cross_documents) table.count(stream, out.counts);
  return out;
}

// ---- timelines ----------------------------------------------------------------

CountTimeline::CountTimeline(std::size_t patterns, std::uint64_t batch_tokens, std::uint64_t tokens,
                             std::vector<TimelineDelta> deltas)
    : patterns_(patterns), batch_tokens_(batch_tokens), tokens_(tokens), deltas_(std::move(deltas)),
      first_seen_(patterns) {
  if (batch_tokens_ == 0) throw UsageError("batch size must be positive");
  for (const auto& d : deltas_) {
    if (d.pattern >= patterns_) throw DataError("timeline delta refers to an unknown pattern");
    if (d.count > 0 && !first_seen_[d.pattern]) first_seen_[d.pattern] = static_cast<std::size_t>(d.batch);
  }
}

std::size_t CountTimeline::num_batches() const {
  return static_cast<std::size_t>((tokens_ + batch_tokens_ - 1) / batch_tokens_);
}

std::vector<std::uint64_t> CountTimeline::batch_boundaries() const {
  std::vector<std::uint64_t> out;
  for (std::size_t b = 0; b < num_batches(); ++b) out.push_back(std::min(tokens_, (b + 1) * batch_tokens_));
  return out;
}

std::vector<std::uint64_t> CountTimeline::snapshot(std::size_t batch) const {
  std::vector<std::uint64_t> out(patterns_, 0);
  for (const auto& d : deltas_) {
    if (d.batch > batch) break;
    out[d.pattern] += d.count;
  }
  return out;
}

NgramCounts CountTimeline::final_counts() const {
  NgramCounts out{std::vector<std::uint64_t>(patterns_, 0), tokens_};
  for (const auto& d : deltas_) out.counts[d.pattern] += d.count;
  return out;
}

std::vector<std::uint64_t> CountTimeline::cumulative(std::uint32_t pattern) const {
  std::vector<std::uint64_t> out(num_batches(), 0);
  for (const auto& d : deltas_) {
    if (d.pattern == pattern && d.batch < out.size()) out[d.batch] += d.count;
  }
  for (std::size_t b = 1; b < out.size(); ++b) out[b] += out[b - 1];
  return out;
}

std::optional<std::size_t> CountTimeline::first_seen(std::uint32_t pattern) const {
  return first_seen_.at(pattern);
}

CountTimeline build_timeline(const std::vector<std::vector<WordId>>& shards, const TargetIndex& index,
                             std::uint64_t batch_tokens, int workers) {
  if (batch_tokens == 0) throw UsageError("batch size must be positive");
  Engine engine(index, true, true, batch_tokens);
  engine.run(shards.size(), workers, [&](std::size_t u, Scanner& s) { scan_ids(shards[u], s); },
             [] { return true; });
  return engine.timeline();
}

CountTimeline build_timeline(const std::vector<std::vector<std::string>>& shards, const TargetIndex& index,
                             std::uint64_t batch_tokens, int workers) {
  return build_timeline(encode_all(shards, index), index, batch_tokens, workers);
}

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'O', 'P', 'T', 'L', '0', '0', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated timeline checkpoint");
  return v;
}

std::uint64_t run_fingerprint(const std::vector<fs::path>& shards, const UnitPlan& plan, const TargetIndex& index,
                              const CountOptions& count_options, std::uint64_t batch_tokens) {
  std::ostringstream blob;
  blob << hash::hex64(index.fingerprint()) << '|' << batch_tokens << '|' << count_options.cross_documents << '|'
       << count_options.chunk_bytes << '|' << count_options.jsonl_field;
  for (std::size_t i = 0; i < shards.size(); ++i) blob << '|' << shards[i].generic_string() << ':' << plan.sizes[i];
  return hash::fnv1a64(blob.str());
}

void save_checkpoint(const fs::path& dir, std::uint64_t fingerprint, const Engine& e) {
  fs::create_directories(dir);
  const auto final_path = dir / kCheckpointFile;
  const auto tmp = dir / (std::string(kCheckpointFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint64_t>(out, fingerprint);
    put<std::uint64_t>(out, e.units_done_);
    put<std::uint64_t>(out, e.offset_);
    put<std::uint64_t>(out, e.tail_.size());
    for (WordId w : e.tail_) put<WordId>(out, w);
    put<std::uint64_t>(out, e.deltas_.size());
    for (const auto& d : e.deltas_) {
      put<std::uint64_t>(out, d.batch);
      put<std::uint32_t>(out, d.pattern);
      put<std::uint64_t>(out, d.count);
    }
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

bool load_checkpoint(const fs::path& dir, std::uint64_t fingerprint, Engine& e, std::size_t patterns) {
  const auto path = dir / kCheckpointFile;
  if (!fs::exists(path)) return false;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw DataError(path.string() + " is not a timeline checkpoint");
  if (get<std::uint64_t>(in) != fingerprint) return false;
  e.units_done_ = get<std::uint64_t>(in);
  e.offset_ = get<std::uint64_t>(in);
  e.tail_.resize(get<std::uint64_t>(in));
  for (auto& w : e.tail_) w = get<WordId>(in);
  e.deltas_.resize(get<std::uint64_t>(in));
  for (auto& d : e.deltas_) {
    d.batch = get<std::uint64_t>(in);
    d.pattern = get<std::uint32_t>(in);
    d.count = get<std::uint64_t>(in);
    if (d.pattern >= patterns) throw DataError(path.string() + ": pattern out of range");
  }
  return true;
}

}  // namespace

TimelineRun build_timeline_files(const std::vector<fs::path>& shards, const TargetIndex& index,
                                 const CountOptions& count_options, const TimelineOptions& options) {
  if (options.batch_tokens == 0) throw UsageError("batch size must be positive");
  const UnitPlan plan(shards, count_options.chunk_bytes);
  Engine engine(index, true, count_options.cross_documents, options.batch_tokens);
  TimelineRun run;
  const bool checkpointing = !options.checkpoint_dir.empty();
  const auto fingerprint = run_fingerprint(shards, plan, index, count_options, options.batch_tokens);
  if (checkpointing) run.resumed = load_checkpoint(options.checkpoint_dir, fingerprint, engine, index.size());
  if (engine.units_done_ > plan.units()) throw DataError("checkpoint is ahead of the corpus");
  std::size_t rounds = 0;
  engine.run(plan.units(), count_options.workers,
             [&](std::size_t u, Scanner& s) { scan_file_unit(plan, u, index, count_options, s); },
             [&] {
               ++rounds;
               if (checkpointing) save_checkpoint(options.checkpoint_dir, fingerprint, engine);
               return options.stop_after_rounds == 0 || rounds < options.stop_after_rounds;
             });
  run.units_done = engine.units_done_;
  run.complete = engine.units_done_ == plan.units();
  run.timeline = engine.timeline();
  return run;
}

// ---- derived quantities ---------------------------------------------------------

RelativeCount relative_count(std::uint64_t natural, std::uint64_t swapped) {
  RelativeCount r;
  r.natural = natural;
  r.swapped = swapped;
  r.raw_sign = natural > swapped ? 1 : (natural < swapped ? -1 : 0);
  r.log_diff = natural == swapped ? 0.0
                                  : std::log(static_cast<double>(natural) + 1.0) -
                                        std::log(static_cast<double>(swapped) + 1.0);
  return r;
}

RelativeCount relative_count(const NgramCounts& counts, const TargetIndex& index, const cap::CapItem& item,
                             int n) {
  if (n < 1 || n > 3) throw UsageError("n-gram order must be 1, 2 or 3");
  const auto i = index.find_item(item.item_id);
  if (!i) throw DataError("counts do not cover item " + item.item_id);
  const auto& ip = index.item_patterns(*i);
  const auto k = static_cast<std::size_t>(n - 1);
  return relative_count(counts.counts.at(ip.natural[k]), counts.counts.at(ip.swapped[k]));
}

std::pair<std::string, std::string> item_ngrams(const cap::CapItem& item, int n,
                                                const text::NormalizeOptions& normalize) {
  const auto words = item_words(item, n, normalize);
  return {join_words(words[0]), join_words(words[1])};
}

RelativeCount relative_count(const CountTable& counts, const cap::CapItem& item, int n,
                             const text::NormalizeOptions& normalize) {
  const auto [nat, swp] = item_ngrams(item, n, normalize);
  auto lookup = [&](const std::string& pattern) {
    auto it = counts.find(pattern);
    if (it == counts.end()) throw DataError("counts table has no row for '" + pattern + "'");
    return it->second;
  };
  return relative_count(lookup(nat), lookup(swp));
}

ExposureSplit split_by_exposure(const CountTimeline& timeline, std::size_t checkpoint,
                                const std::vector<cap::CapItem>& corpus, const TargetIndex& index) {
  if (checkpoint >= timeline.num_batches())
    throw DataError("checkpoint " + std::to_string(checkpoint) + " outside the timeline (" +
                    std::to_string(timeline.num_batches()) + " batches)");
  const auto snap = timeline.snapshot(checkpoint);
  ExposureSplit out;
  for (const auto& item : corpus) {
    const auto i = index.find_item(item.item_id);
    if (!i) throw DataError("timeline does not cover item " + item.item_id);
    const auto& ip = index.item_patterns(*i);
    const auto nat = snap[ip.natural[1]];
    const auto swp = snap[ip.swapped[1]];
    if (swp > 0)
      out.excluded.push_back(item.item_id);
    else if (nat == 0)
      out.unseen.push_back(item.item_id);
    else if (nat == 1)
      out.once.push_back(item.item_id);
    else if (nat <= 10)
      out.few.push_back(item.item_id);
    else
      out.many.push_back(item.item_id);
  }
  return out;
}

std::vector<std::size_t> log_spaced_checkpoints(std::size_t num_batches) {
  std::vector<std::size_t> out;
  if (num_batches == 0) return out;
  const std::size_t last = num_batches - 1;
  for (std::size_t b = 0; b < last; b = b == 0 ? 1 : b * 2) out.push_back(b);
  out.push_back(last);
  return out;
}

void write_counts_tsv(std::ostream& out, const NgramCounts& counts, const TargetIndex& index) {
  out << "pattern\tn\tcount\n";
  for (std::uint32_t p = 0; p < index.size(); ++p)
    out << index.pattern_text(p) << '\t' << index.pattern_order(p) << '\t' << counts.counts.at(p) << '\n';
}

CountTable read_counts_tsv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open counts table " + path.string());
  CountTable out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "pattern\tn\tcount") throw DataError(path.string() + ": expected header pattern<TAB>n<TAB>count");
      continue;
    }
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 3) throw DataError(where + ": expected 3 columns");
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      const std::string num(cols[2]);
      count = std::stoull(num, &used);
      if (used != num.size() || num.starts_with('-')) throw std::invalid_argument("count");
    } catch (const std::logic_error&) {
      throw DataError(where + ": count is not a non-negative integer");
    }
    out[std::string(cols[0])] = count;
  }
  if (line_no == 0) throw DataError(path.string() + " is empty");
  return out;
}

std::string timeline_summary_json(const CountTimeline& timeline, const TargetIndex& index) {
  nlohmann::ordered_json j;
  j["batch_tokens"] = timeline.batch_tokens();
  j["tokens_processed"] = timeline.tokens_processed();
  j["num_batches"] = timeline.num_batches();
  const auto final_counts = timeline.final_counts();
  j["patterns"] = nlohmann::ordered_json::array();
  for (std::uint32_t p = 0; p < index.size(); ++p) {
    nlohmann::ordered_json row;
    row["pattern"] = index.pattern_text(p);
    row["n"] = index.pattern_order(p);
    row["count"] = final_counts.counts[p];
    const auto first = timeline.first_seen(p);
    row["first_seen"] = first ? nlohmann::ordered_json(*first) : nlohmann::ordered_json(nullptr);
    j["patterns"].push_back(row);
  }
  return j.dump(2);
}

std::string splits_json(const CountTimeline& timeline, const std::vector<std::size_t>& checkpoints,
                        const std::vector<cap::CapItem>& corpus, const TargetIndex& index) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  const auto bounds = timeline.batch_boundaries();
  for (auto b : checkpoints) {
    const auto split = split_by_exposure(timeline, b, corpus, index);
    nlohmann::ordered_json row;
    row["tokens_seen"] = bounds.at(b);
    row["unseen"] = split.unseen;
    row["once"] = split.once;
    row["few"] = split.few;
    row["many"] = split.many;
    row["excluded"] = split.excluded;
    j[std::to_string(b)] = row;
  }
  return j.dump(2);
}

}  // namespace aoplab::ngram
