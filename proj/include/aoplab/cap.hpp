#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aoplab/common.hpp"
#include "aoplab/conllu.hpp"

namespace aoplab::cap {

class AdjectiveLexicon {
 public:
  AdjectiveLexicon() = default;
  /// Lowercases and deduplicates; rejects empty sets and entries with
  /// internal whitespace.
  static AdjectiveLexicon from_entries(const std::vector<std::string>& entries);

  [[nodiscard]] bool contains(std::string_view word) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::set<std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::set<std::string, std::less<>> entries_;
};

/// One token per line, UTF-8. Blank lines are ignored.
AdjectiveLexicon load_lexicon(const std::filesystem::path& path);
AdjectiveLexicon parse_lexicon(std::string_view data, const std::string& source);

/// [article] a1 a2 noun
struct Phrase {
  std::optional<std::string> article;
  std::string a1;
  std::string a2;
  std::string noun;

  /// Tokens joined by single spaces.
  [[nodiscard]] std::string render() const;
  friend bool operator==(const Phrase&, const Phrase&) = default;
};

using SwappedPhrase = Phrase;

struct CapItem {
  std::string item_id;
  std::string context_prefix;
  std::string context_suffix;
  std::optional<std::string> article;
  std::string a1;
  std::string a2;
  std::string noun;
  std::string source_ref;

  [[nodiscard]] Phrase phrase() const { return {article, a1, a2, noun}; }
  /// context_prefix + phrase + context_suffix.
  [[nodiscard]] std::string sentence() const;
  friend bool operator==(const CapItem&, const CapItem&) = default;
};

/// Indefinite-article repair: initial-vowel rule plus an exception table.
class ArticleRules {
 public:
  /// The table bundled at build time from data/article_exceptions.tsv.
  static const ArticleRules& bundled();
  static ArticleRules parse(std::string_view tsv, const std::string& source);
  static ArticleRules load(const std::filesystem::path& path);

  /// Returns "a" or "an" (capitalized like `article`) for the word that
  /// follows. Throws DataError for an empty word or a non-indefinite article.
  [[nodiscard]] std::string fix(std::string_view article, std::string_view next_word) const;
  [[nodiscard]] std::size_t size() const { return exact_.size() + prefix_.size(); }

 private:
  std::map<std::string, bool, std::less<>> exact_;   // word -> takes "an"
  std::map<std::string, bool, std::less<>> prefix_;  // prefix -> takes "an"
};

std::string fix_article(std::string_view article, std::string_view next_word,
                        const ArticleRules& rules = ArticleRules::bundled());

bool is_indefinite_article(std::string_view article);

/// Transposes the adjectives; an indefinite article is repaired against the
/// new first adjective, any other determiner is kept as-is.
SwappedPhrase swap_order(const Phrase& phrase, const ArticleRules& rules = ArticleRules::bundled());
SwappedPhrase swap_order(const CapItem& item, const ArticleRules& rules = ArticleRules::bundled());

/// The same item with its phrase swapped and the context untouched.
CapItem swapped_item(const CapItem& item, const ArticleRules& rules = ArticleRules::bundled());

struct ExtractOptions {
  bool include_propn = false;
};

struct ExtractStats {
  std::size_t sentences = 0;
  std::size_t items = 0;
  std::size_t skipped_arity = 0;          // three or more amod dependents
  std::size_t skipped_not_lexical = 0;    // dependent not ADJ or not in the lexicon
  std::size_t skipped_noncontiguous = 0;  // not a plain "ADJ ADJ NOUN" span

  ExtractStats& operator+=(const ExtractStats& o);
};

std::string make_item_id(std::string_view source_ref, CharSpan phrase_span);

std::vector<CapItem> extract_items(const conllu::Document& doc, const AdjectiveLexicon& lexicon,
                                   const ExtractOptions& options = {}, ExtractStats* stats = nullptr);

/// Extracts from every *.conllu file under `root`, one document per file,
/// in parallel; output follows sorted file order.
std::vector<CapItem> extract_directory(const std::filesystem::path& root,
                                       const AdjectiveLexicon& lexicon,
                                       const ExtractOptions& options, int workers,
                                       ExtractStats* stats = nullptr);

void write_jsonl(std::ostream& out, const std::vector<CapItem>& items);
std::string to_json_line(const CapItem& item);
CapItem from_json_line(std::string_view line, const std::string& where);
/// Reads a CAP file and checks item_id uniqueness.
std::vector<CapItem> read_jsonl(const std::filesystem::path& path);
std::vector<CapItem> read_jsonl(std::istream& in, const std::string& source);

}  // namespace aoplab::cap
