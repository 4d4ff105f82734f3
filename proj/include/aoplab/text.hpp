#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aoplab::text {

/// Returns the byte offset of the first invalid UTF-8 sequence, if any.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

/// Number of Unicode code points in a valid UTF-8 string.
std::size_t codepoint_length(std::string_view s);

/// ASCII lowercasing; non-ASCII bytes pass through untouched.
std::string to_lower(std::string_view s);
void to_lower_inplace(std::string& s);

bool is_ascii_space(char c);
bool is_ascii_punct(char c);

/// Width in bytes of a Unicode whitespace character starting at s[i], 0 if
/// none. Covers ASCII whitespace, NBSP, U+2000..U+200A, U+2028/2029, U+202F,
/// U+205F, U+3000.
std::size_t unicode_space_width(std::string_view s, std::size_t i);

bool contains_whitespace(std::string_view s);

std::string_view trim(std::string_view s);

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string_view> split(std::string_view s, char delim);

/// Token normalization shared by the counting engine and its target index.
struct NormalizeOptions {
  bool lowercase = true;
  bool strip_punct = true;
};

/// Normalizes one raw whitespace-delimited token into `out`. Returns false
/// when nothing is left (pure punctuation).
bool normalize_token(std::string_view raw, const NormalizeOptions& opts, std::string& out);

/// Calls fn(std::string_view normalized) for every normalized token of a line.
/// The view is only valid for the duration of the call.
template <typename Fn>
void for_each_token(std::string_view line, const NormalizeOptions& opts, std::string& scratch,
                    Fn&& fn) {
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    std::size_t w = unicode_space_width(line, i);
    if (w) {
      i += w;
      continue;
    }
    std::size_t j = i;
    while (j < n && unicode_space_width(line, j) == 0) ++j;
    if (normalize_token(line.substr(i, j - i), opts, scratch)) fn(std::string_view(scratch));
    i = j;
  }
}

/// Tokenizes into owned strings. Convenience for small inputs.
std::vector<std::string> normalize_line(std::string_view line, const NormalizeOptions& opts = {});

/// Capitalizes the first ASCII letter.
std::string capitalize(std::string_view s);

}  // namespace aoplab::text
