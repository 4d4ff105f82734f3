#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aoplab/cap.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(AOPLAB_FIXTURES) / name;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write(const std::filesystem::path& p, const std::string& data) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << data;
}

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "aoplab") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& adjective_pool() {
  static const std::vector<std::string> pool{"big",   "red",   "old",    "small", "wooden", "ugly", "nice",
                                             "blue",  "young", "honest", "tall",  "thin",   "short", "fat",
                                             "happy", "sweet", "little", "brown", "green",  "dark", "unusual",
                                             "one",   "hour",  "European", "Italian", "eager"};
  return pool;
}

inline const std::vector<std::string>& noun_pool() {
  static const std::vector<std::string> pool{"car", "dog", "house", "table", "man", "woman", "ball", "door",
                                             "story", "puppy", "idea", "apple", "umbrella", "hotel"};
  return pool;
}

/// Random item with distinct adjectives and a correct article (or none).
inline aoplab::cap::CapItem random_item(std::mt19937_64& rng, std::size_t serial) {
  const auto& adj = adjective_pool();
  const auto& nouns = noun_pool();
  static const std::vector<std::string> contexts{"", "Yesterday I saw ", "She said that ", "In the garden there was ",
                                                 "The report mentions ", "He painted "};
  aoplab::cap::CapItem item;
  const auto i = std::uniform_int_distribution<std::size_t>(0, adj.size() - 1)(rng);
  auto j = std::uniform_int_distribution<std::size_t>(0, adj.size() - 2)(rng);
  if (j >= i) ++j;
  item.a1 = adj[i];
  item.a2 = adj[j];
  item.noun = nouns[std::uniform_int_distribution<std::size_t>(0, nouns.size() - 1)(rng)];
  item.context_prefix = contexts[std::uniform_int_distribution<std::size_t>(0, contexts.size() - 1)(rng)];
  item.context_suffix = " today.";
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      item.article = aoplab::cap::fix_article("a", item.a1);
      break;
    case 1:
      item.article = std::string("the");
      break;
    default:
      break;
  }
  item.source_ref = "random#" + std::to_string(serial);
  item.item_id = "rand-" + std::to_string(serial);
  return item;
}

/// Whitespace-joined tokens drawn from the item pools plus function words.
inline std::string random_corpus_text(std::mt19937_64& rng, std::size_t n_tokens) {
  static const std::vector<std::string> extra{"the", "a", "an", "i", "saw", "she", "said", "that", "in",
                                              "garden", "there", "was", "today", "yesterday", "he",
                                              "painted", "report", "mentions"};
  std::vector<std::string> vocab = extra;
  for (const auto& a : adjective_pool()) vocab.push_back(a);
  for (const auto& n : noun_pool()) vocab.push_back(n);
  // geometric skew over the vocabulary
  std::geometric_distribution<std::size_t> skew(0.08);
  std::string out;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (i) out += ' ';
    out += vocab[skew(rng) % vocab.size()];
  }
  return out;
}

}  // namespace testing
