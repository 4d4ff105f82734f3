#pragma once

#include <optional>
#include <string>
#include <vector>

namespace testing {

struct GoldenItem {
  const char* item_id;
  const char* source_ref;
  const char* prefix;
  std::optional<std::string> article;
  const char* a1;
  const char* a2;
  const char* noun;
  const char* suffix;
};

/// Expected extraction from treebank/golden25.conllu with lexicon.txt.
inline const std::vector<GoldenItem>& golden_items() {
  static const std::vector<GoldenItem> items{
      {"cap-eff99317d027d7e3", "golden25.conllu#1", "", "The", "big", "red", "car", " stopped."},
      {"cap-72d8810aa002fffa", "golden25.conllu#2", "She bought ", "a", "small", "wooden", "table", " yesterday."},
      {"cap-663ec3bc453bfd89", "golden25.conllu#3", "", "An", "old", "ugly", "dog", " barked at us."},
      {"cap-f37da73682b8f1b2", "golden25.conllu#4", "They live in ", std::nullopt, "large", "white", "houses", "."},
      {"cap-b9467e4ae91c9ad8", "golden25.conllu#5", "He wore a very ", std::nullopt, "nice", "blue", "shirt", "."},
      {"cap-e324bc468af34003", "golden25.conllu#10", "I met ", "a", "nice", "young", "man", "."},
      {"cap-f41f7f95a631df72", "golden25.conllu#11", "I don't like ", std::nullopt, "cheap", "plastic", "toys", "."},
      {"cap-42f1e3aa6c9fa412", "golden25.conllu#12", "She is ", "an", "honest", "young", "woman", "."},
      {"cap-bb1f9feb438d3623", "golden25.conllu#14", "", "A", "tall", "thin", "man", " met a short fat woman."},
      {"cap-0a99a57d76e669ed", "golden25.conllu#14", "A tall thin man met ", "a", "short", "fat", "woman", "."},
      {"cap-e0005b3479c334ac", "golden25.conllu#15", "", "The", "little", "brown", "mouse", " ran away."},
      {"cap-84213c35b931c317", "golden25.conllu#16", "This is the  ", std::nullopt, "big", "blue", "ball", "."},
      {"cap-5ccf646ff139c881", "golden25.conllu#17", "", std::nullopt, "Cold", "dark", "nights", " came."},
      {"cap-06063be83dba38de", "golden25.conllu#19", "It was ", "a", "well-known", "old", "story", "."},
      {"cap-a18e15dc13052957", "golden25.conllu#20", "He kicked ", "a", "red", "big", "ball", "."},
      {"cap-f1aa81689e35d158", "golden25.conllu#21", "The small dog chased ", "the", "big", "red", "ball", "."},
      {"cap-b01c70dc64c14064", "golden25.conllu#22", "The old house with ", "a", "new", "red", "door", "."},
      {"cap-a9b933c2bc5e11de", "golden25.conllu#24", "She has ", "a", "sweet", "little", "puppy", "."},
      {"cap-8db3eface5f0d5d9", "golden25.conllu#25", "", "The", "happy", "young", "couple", " danced."},
  };
  return items;
}

inline const GoldenItem& golden_propn_item() {
  static const GoldenItem item{"cap-45dd4b4d63cf0985", "golden25.conllu#13", "We visited ", "the", "beautiful",
                               "old", "Paris", "."};
  return item;
}

}  // namespace testing
