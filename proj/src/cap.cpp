#include "aoplab/cap.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "aoplab/hash.hpp"
#include "aoplab/parallel.hpp"
#include "aoplab/text.hpp"
#include "article_exceptions_data.hpp"

namespace aoplab::cap {

namespace fs = std::filesystem;

AdjectiveLexicon AdjectiveLexicon::from_entries(const std::vector<std::string>& entries) {
  AdjectiveLexicon lex;
  for (const auto& raw : entries) {
    auto e = text::trim(raw);
    if (e.empty()) continue;
    if (text::contains_whitespace(e))
      throw DataError("lexicon entry '" + std::string(e) + "' contains internal whitespace");
    lex.entries_.insert(text::to_lower(e));
  }
  if (lex.entries_.empty()) throw DataError("adjective lexicon is empty");
  return lex;
}

bool AdjectiveLexicon::contains(std::string_view word) const {
  return entries_.find(text::to_lower(word)) != entries_.end();
}

AdjectiveLexicon parse_lexicon(std::string_view data, const std::string& source) {
  if (auto bad = text::find_invalid_utf8(data))
    throw DataError(source + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  std::vector<std::string> lines;
  for (auto line : text::split(data, '\n')) lines.emplace_back(line);
  try {
    return AdjectiveLexicon::from_entries(lines);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

AdjectiveLexicon load_lexicon(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_lexicon(data, path.string());
}

std::string Phrase::render() const {
  std::string out;
  if (article) {
    out += *article;
    out += ' ';
  }
  out += a1;
  out += ' ';
  out += a2;
  out += ' ';
  out += noun;
  return out;
}

std::string CapItem::sentence() const { return context_prefix + phrase().render() + context_suffix; }

// ---- article repair -------------------------------------------------------

ArticleRules ArticleRules::parse(std::string_view tsv, const std::string& source) {
  ArticleRules rules;
  std::size_t line_no = 0;
  for (auto line : text::split(tsv, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 2)
      throw DataError(source + ":" + std::to_string(line_no) + ": expected word<TAB>article");
    const auto art = text::to_lower(text::trim(cols[1]));
    if (art != "a" && art != "an")
      throw DataError(source + ":" + std::to_string(line_no) + ": article must be 'a' or 'an'");
    auto word = text::to_lower(text::trim(cols[0]));
    const bool an = art == "an";
    if (!word.empty() && word.back() == '*') {
      word.pop_back();
      rules.prefix_[word] = an;
    } else {
      rules.exact_[word] = an;
    }
  }
  return rules;
}

const ArticleRules& ArticleRules::bundled() {
  static const ArticleRules rules = parse(kBundledArticleExceptions, "bundled article exceptions");
  return rules;
}

ArticleRules ArticleRules::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open article exception file " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(data, path.string());
}

bool is_indefinite_article(std::string_view article) {
  const auto a = text::to_lower(article);
  return a == "a" || a == "an";
}

std::string ArticleRules::fix(std::string_view article, std::string_view next_word) const {
  if (!is_indefinite_article(article))
    throw DataError("fix_article: '" + std::string(article) + "' is not an indefinite article");
  if (next_word.empty()) throw DataError("fix_article: empty next word");
  const auto word = text::to_lower(next_word);

  bool an;
  if (auto it = exact_.find(word); it != exact_.end()) {
    an = it->second;
  } else {
    std::size_t best = 0;
    std::optional<bool> hit;
    for (const auto& [prefix, takes_an] : prefix_) {
      if (prefix.size() >= best && word.compare(0, prefix.size(), prefix) == 0) {
        best = prefix.size();
        hit = takes_an;
      }
    }
    if (hit) {
      an = *hit;
    } else {
      const char c = word[0];
      an = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
    }
  }
  std::string out = an ? "an" : "a";
  if (article[0] >= 'A' && article[0] <= 'Z') out = text::capitalize(out);
  return out;
}

std::string fix_article(std::string_view article, std::string_view next_word,
                        const ArticleRules& rules) {
  return rules.fix(article, next_word);
}

SwappedPhrase swap_order(const Phrase& phrase, const ArticleRules& rules) {
  SwappedPhrase out{phrase.article, phrase.a2, phrase.a1, phrase.noun};
  if (out.article && is_indefinite_article(*out.article))
    out.article = rules.fix(*out.article, out.a1);
  return out;
}

SwappedPhrase swap_order(const CapItem& item, const ArticleRules& rules) {
  return swap_order(item.phrase(), rules);
}

CapItem swapped_item(const CapItem& item, const ArticleRules& rules) {
  CapItem out = item;
  const auto s = swap_order(item, rules);
  out.article = s.article;
  out.a1 = s.a1;
  out.a2 = s.a2;
  return out;
}

// ---- extraction -----------------------------------------------------------

ExtractStats& ExtractStats::operator+=(const ExtractStats& o) {
  sentences += o.sentences;
  items += o.items;
  skipped_arity += o.skipped_arity;
  skipped_not_lexical += o.skipped_not_lexical;
  skipped_noncontiguous += o.skipped_noncontiguous;
  return *this;
}

std::string make_item_id(std::string_view source_ref, CharSpan span) {
  std::string key(source_ref);
  key += '@';
  key += std::to_string(span.begin);
  key += '-';
  key += std::to_string(span.end);
  return "cap-" + hash::hex64(hash::fnv1a64(key));
}

namespace {

bool single_space_between(const std::string& text, const conllu::Token& left,
                          const conllu::Token& right) {
  return right.chars.begin == left.chars.end + 1 && text[left.chars.end] == ' ';
}

void extract_sentence(const conllu::Sentence& s, const std::string& source_ref,
                      const AdjectiveLexicon& lexicon, const ExtractOptions& options,
                      std::vector<CapItem>& out, ExtractStats& stats) {
  const auto& toks = s.tokens;
  const int n = static_cast<int>(toks.size());
  std::vector<std::vector<int>> amods(toks.size());
  for (int j = 0; j < n; ++j) {
    const int h = toks[static_cast<std::size_t>(j)].head;
    if (h >= 0 && conllu::base_relation(toks[static_cast<std::size_t>(j)].deprel) == "amod")
      amods[static_cast<std::size_t>(h)].push_back(j);
  }
  for (int k = 0; k < n; ++k) {
    const auto& noun = toks[static_cast<std::size_t>(k)];
    if (noun.upos != "NOUN" && !(options.include_propn && noun.upos == "PROPN")) continue;
    const auto& deps = amods[static_cast<std::size_t>(k)];
    if (deps.size() < 2) continue;
    if (deps.size() > 2) {
      ++stats.skipped_arity;
      continue;
    }
    const int j1 = std::min(deps[0], deps[1]);
    const int j2 = std::max(deps[0], deps[1]);
    const auto& adj1 = toks[static_cast<std::size_t>(j1)];
    const auto& adj2 = toks[static_cast<std::size_t>(j2)];
    if (adj1.upos != "ADJ" || adj2.upos != "ADJ" || !lexicon.contains(adj1.surface) ||
        !lexicon.contains(adj2.surface)) {
      ++stats.skipped_not_lexical;
      continue;
    }
    if (j2 != k - 1 || j1 != k - 2 || !single_space_between(s.text, adj1, adj2) ||
        !single_space_between(s.text, adj2, noun)) {
      ++stats.skipped_noncontiguous;
      continue;
    }
    CapItem item;
    std::size_t begin = adj1.chars.begin;
    if (j1 > 0) {
      const auto& det = toks[static_cast<std::size_t>(j1 - 1)];
      if (det.upos == "DET" && single_space_between(s.text, det, adj1)) {
        item.article = det.surface;
        begin = det.chars.begin;
      }
    }
    const CharSpan span{begin, noun.chars.end};
    item.a1 = adj1.surface;
    item.a2 = adj2.surface;
    item.noun = noun.surface;
    item.context_prefix = s.text.substr(0, span.begin);
    item.context_suffix = s.text.substr(span.end);
    item.source_ref = source_ref;
    item.item_id = make_item_id(source_ref, span);
    out.push_back(std::move(item));
    ++stats.items;
  }
}

}  // namespace

std::vector<CapItem> extract_items(const conllu::Document& doc, const AdjectiveLexicon& lexicon,
                                   const ExtractOptions& options, ExtractStats* stats) {
  std::vector<CapItem> out;
  ExtractStats local;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    ++local.sentences;
    extract_sentence(doc.sentences[i], doc.source + "#" + std::to_string(i + 1), lexicon, options,
                     out, local);
  }
  if (stats) *stats += local;
  return out;
}

std::vector<CapItem> extract_directory(const fs::path& root, const AdjectiveLexicon& lexicon,
                                       const ExtractOptions& options, int workers,
                                       ExtractStats* stats) {
  const auto files = conllu::list_files(root);
  const fs::path base = fs::is_directory(root) ? root : root.parent_path();
  std::vector<std::vector<CapItem>> per_file(files.size());
  std::vector<ExtractStats> per_stats(files.size());
  parallel::for_each_index(files.size(), workers, [&](std::size_t i) {
    const auto rel = fs::relative(files[i], base).generic_string();
    const auto doc = conllu::parse_file(files[i], rel);
    per_file[i] = extract_items(doc, lexicon, options, &per_stats[i]);
  });
  std::vector<CapItem> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::move(per_file[i].begin(), per_file[i].end(), std::back_inserter(out));
    if (stats) *stats += per_stats[i];
  }
  return out;
}

// ---- JSONL ----------------------------------------------------------------

std::string to_json_line(const CapItem& item) {
  nlohmann::ordered_json j;
  j["item_id"] = item.item_id;
  j["context_prefix"] = item.context_prefix;
  j["article"] = item.article ? nlohmann::ordered_json(*item.article) : nlohmann::ordered_json(nullptr);
  j["a1"] = item.a1;
  j["a2"] = item.a2;
  j["noun"] = item.noun;
  j["context_suffix"] = item.context_suffix;
  j["source_ref"] = item.source_ref;
  return j.dump();
}

void write_jsonl(std::ostream& out, const std::vector<CapItem>& items) {
  for (const auto& item : items) out << to_json_line(item) << '\n';
}

CapItem from_json_line(std::string_view line, const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string())
      throw DataError(where + ": missing or non-string field '" + std::string(key) + "'");
    return j[key].get<std::string>();
  };
  CapItem item;
  item.item_id = str("item_id");
  item.context_prefix = str("context_prefix");
  item.context_suffix = str("context_suffix");
  item.a1 = str("a1");
  item.a2 = str("a2");
  item.noun = str("noun");
  item.source_ref = str("source_ref");
  if (!j.contains("article")) throw DataError(where + ": missing field 'article'");
  if (!j["article"].is_null()) {
    if (!j["article"].is_string()) throw DataError(where + ": 'article' must be a string or null");
    item.article = j["article"].get<std::string>();
  }
  if (item.a1.empty() || item.a2.empty() || item.noun.empty())
    throw DataError(where + ": a1, a2 and noun must be non-empty");
  return item;
}

std::vector<CapItem> read_jsonl(std::istream& in, const std::string& source) {
  std::vector<CapItem> items;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto item = from_json_line(line, source + ":" + std::to_string(line_no));
    if (!seen.insert(item.item_id).second)
      throw DataError(source + ":" + std::to_string(line_no) + ": duplicate item_id " + item.item_id);
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<CapItem> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CAP file " + path.string());
  return read_jsonl(in, path.string());
}

}  // namespace aoplab::cap
