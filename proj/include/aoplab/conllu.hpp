#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoplab/common.hpp"

namespace aoplab::conllu {

inline constexpr int kRoot = -1;

struct Token {
  std::string surface;
  std::string lemma;
  std::string upos;
  int head = kRoot;  // 0-based index into Sentence::tokens, kRoot for the root
  std::string deprel;
  CharSpan chars;  // byte offsets into Sentence::text
};

struct Sentence {
  std::string text;
  std::string sent_id;
  std::vector<Token> tokens;  // syntactic words; multiword ranges are folded in
};

/// A parsed CoNLL-U document with the locator used in item provenance.
struct Document {
  std::string source;
  std::vector<Sentence> sentences;
};

/// Base relation of a (possibly subtyped) deprel: "amod:poss" -> "amod".
std::string_view base_relation(std::string_view deprel);

/// Parses a CoNLL-U stream. Sentence text comes from "# text =" when present,
/// otherwise it is rebuilt from forms and SpaceAfter=No. Character spans are
/// aligned against the text; a form that cannot be found is a DataError
/// naming the source and line.
Document parse(std::istream& in, std::string source);
Document parse_string(std::string_view data, std::string source);
Document parse_file(const std::filesystem::path& path, std::string source);

/// All *.conllu files under dir (or dir itself if it is a file), sorted by
/// relative path.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir);

}  // namespace aoplab::conllu
