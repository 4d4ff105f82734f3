#include "aoplab/conllu.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "aoplab/text.hpp"

namespace aoplab::conllu {

namespace fs = std::filesystem;

std::string_view base_relation(std::string_view deprel) {
  auto pos = deprel.find(':');
  return pos == std::string_view::npos ? deprel : deprel.substr(0, pos);
}

namespace {

struct RawWord {
  std::string form, lemma, upos, deprel;
  int head_id = 0;  // CoNLL-U 1-based head, 0 = root
  bool space_after = true;
  int mwt = -1;  // index into pending multiword ranges
};

struct RawRange {
  int first = 0, last = 0;
  std::string form;
  bool space_after = true;
};

bool misc_no_space(std::string_view misc) {
  for (auto part : text::split(misc, '|')) {
    if (part == "SpaceAfter=No") return true;
  }
  return false;
}

int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(where + ": expected integer, got '" + std::string(s) + "'");
  return v;
}

class SentenceBuilder {
 public:
  SentenceBuilder(const std::string& source) : source_(source) {}

  void reset() {
    text_.reset();
    sent_id_.clear();
    words_.clear();
    ranges_.clear();
  }

  bool empty() const { return words_.empty(); }

  void comment(std::string_view line) {
    auto body = text::trim(line.substr(1));
    if (body.rfind("text", 0) == 0) {
      auto rest = text::trim(body.substr(4));
      if (!rest.empty() && rest[0] == '=') {
        // keep the text verbatim apart from the single separator space
        auto eq = line.find('=');
        std::string_view t = line.substr(eq + 1);
        if (!t.empty() && t[0] == ' ') t.remove_prefix(1);
        while (!t.empty() && (t.back() == '\r' || t.back() == '\n')) t.remove_suffix(1);
        text_ = std::string(t);
      }
    } else if (body.rfind("sent_id", 0) == 0) {
      auto eq = body.find('=');
      if (eq != std::string_view::npos) sent_id_ = std::string(text::trim(body.substr(eq + 1)));
    }
  }

  void word_line(std::string_view line, std::size_t line_no) {
    const std::string where = source_ + ":" + std::to_string(line_no);
    auto cols = text::split(line, '\t');
    if (cols.size() != 10) throw DataError(where + ": expected 10 tab-separated columns");
    const auto id = cols[0];
    if (id.find('.') != std::string_view::npos) return;  // empty node
    auto dash = id.find('-');
    if (dash != std::string_view::npos) {
      RawRange r;
      r.first = parse_int(id.substr(0, dash), where);
      r.last = parse_int(id.substr(dash + 1), where);
      r.form = std::string(cols[1]);
      r.space_after = !misc_no_space(cols[9]);
      ranges_.push_back(std::move(r));
      return;
    }
    const int idx = parse_int(id, where);
    if (idx != static_cast<int>(words_.size()) + 1)
      throw DataError(where + ": word ids must be consecutive from 1");
    RawWord w;
    w.form = std::string(cols[1]);
    w.lemma = std::string(cols[2]);
    w.upos = std::string(cols[3]);
    w.head_id = cols[6] == "_" ? 0 : parse_int(cols[6], where);
    w.deprel = std::string(cols[7]);
    w.space_after = !misc_no_space(cols[9]);
    if (!ranges_.empty() && idx >= ranges_.back().first && idx <= ranges_.back().last)
      w.mwt = static_cast<int>(ranges_.size()) - 1;
    words_.push_back(std::move(w));
    line_no_ = line_no;
  }

  Sentence finish() {
    const std::string where = source_ + ":" + std::to_string(line_no_);
    Sentence s;
    s.sent_id = sent_id_;
    const int n = static_cast<int>(words_.size());
    for (const auto& w : words_) {
      if (w.head_id < 0 || w.head_id > n) throw DataError(where + ": head index out of range");
    }
    if (!text_) text_ = rebuild_text();
    s.text = *text_;
    s.tokens.reserve(words_.size());
    std::size_t cursor = 0;
    int last_range = -1;
    CharSpan range_span;
    for (const auto& w : words_) {
      Token t;
      t.surface = w.form;
      t.lemma = w.lemma;
      t.upos = w.upos;
      t.head = w.head_id == 0 ? kRoot : w.head_id - 1;
      t.deprel = w.deprel;
      if (w.mwt >= 0) {
        if (w.mwt != last_range) {
          range_span = align(ranges_[static_cast<std::size_t>(w.mwt)].form, cursor, where);
          cursor = range_span.end;
          last_range = w.mwt;
        }
        t.chars = range_span;
      } else {
        t.chars = align(w.form, cursor, where);
        cursor = t.chars.end;
      }
      s.tokens.push_back(std::move(t));
    }
    return s;
  }

 private:
  CharSpan align(const std::string& form, std::size_t cursor, const std::string& where) const {
    const std::string& t = *text_;
    std::size_t pos = cursor;
    while (pos < t.size()) {
      auto w = text::unicode_space_width(t, pos);
      if (!w) break;
      pos += w;
    }
    if (t.compare(pos, form.size(), form) != 0)
      throw DataError(where + ": token '" + form + "' does not align with sentence text at offset " +
                      std::to_string(pos));
    return {pos, pos + form.size()};
  }

  std::string rebuild_text() const {
    std::string out;
    int last_range = -1;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      const auto& w = words_[i];
      bool space = w.space_after;
      if (w.mwt >= 0) {
        if (w.mwt == last_range) continue;
        last_range = w.mwt;
        const auto& r = ranges_[static_cast<std::size_t>(w.mwt)];
        out += r.form;
        space = r.space_after;
      } else {
        out += w.form;
      }
      if (space && i + 1 < words_.size()) out += ' ';
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
  }

  const std::string& source_;
  std::optional<std::string> text_;
  std::string sent_id_;
  std::vector<RawWord> words_;
  std::vector<RawRange> ranges_;
  std::size_t line_no_ = 0;
};

}  // namespace

Document parse(std::istream& in, std::string source) {
  Document doc;
  doc.source = std::move(source);
  SentenceBuilder builder(doc.source);
  std::string line;
  std::size_t line_no = 0;
  bool in_sentence = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in_sentence && !builder.empty()) doc.sentences.push_back(builder.finish());
      builder.reset();
      in_sentence = false;
      continue;
    }
    in_sentence = true;
    if (line[0] == '#') {
      builder.comment(line);
    } else {
      builder.word_line(line, line_no);
    }
  }
  if (in_sentence && !builder.empty()) doc.sentences.push_back(builder.finish());
  return doc;
}

Document parse_string(std::string_view data, std::string source) {
  std::istringstream in{std::string(data)};
  return parse(in, std::move(source));
}

Document parse_file(const fs::path& path, std::string source) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CoNLL-U file " + path.string());
  return parse(in, std::move(source));
}

std::vector<fs::path> list_files(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw DataError("not a file or directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".conllu") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, dir).generic_string() < fs::relative(b, dir).generic_string();
  });
  return out;
}

}  // namespace aoplab::conllu
