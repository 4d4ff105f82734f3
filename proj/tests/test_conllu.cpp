#include <doctest.h>

#include "aoplab/conllu.hpp"
#include "support.hpp"

using namespace aoplab;

namespace {

const char* kSimple =
    "# sent_id = s1\n"
    "# text = I saw a big red car.\n"
    "1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tsaw\tsee\tVERB\t_\t_\t0\troot\t_\t_\n"
    "3\ta\ta\tDET\t_\t_\t6\tdet\t_\t_\n"
    "4\tbig\tbig\tADJ\t_\t_\t6\tamod\t_\t_\n"
    "5\tred\tred\tADJ\t_\t_\t6\tamod\t_\t_\n"
    "6\tcar\tcar\tNOUN\t_\t_\t2\tobj\t_\tSpaceAfter=No\n"
    "7\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n"
    "\n";

}  // namespace

TEST_CASE("parses tokens, heads and character spans") {
  const auto doc = conllu::parse_string(kSimple, "mem");
  REQUIRE(doc.sentences.size() == 1);
  const auto& s = doc.sentences[0];
  CHECK(s.sent_id == "s1");
  CHECK(s.text == "I saw a big red car.");
  REQUIRE(s.tokens.size() == 7);
  CHECK(s.tokens[1].head == conllu::kRoot);
  CHECK(s.tokens[3].head == 5);
  CHECK(s.tokens[3].chars == CharSpan{8, 11});
  CHECK(s.tokens[6].chars == CharSpan{19, 20});
  for (const auto& t : s.tokens) CHECK(s.text.substr(t.chars.begin, t.chars.size()) == t.surface);
}

TEST_CASE("base relation strips subtypes") {
  CHECK(conllu::base_relation("amod") == "amod");
  CHECK(conllu::base_relation("amod:emph") == "amod");
  CHECK(conllu::base_relation("nmod:poss") == "nmod");
}

TEST_CASE("text is rebuilt from SpaceAfter when the comment is missing") {
  const std::string data =
      "1\tCold\tcold\tADJ\t_\t_\t2\tamod\t_\t_\n"
      "2\tnights\tnight\tNOUN\t_\t_\t0\troot\t_\tSpaceAfter=No\n"
      "3\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n\n";
  const auto doc = conllu::parse_string(data, "mem");
  CHECK(doc.sentences.at(0).text == "Cold nights.");
}

TEST_CASE("multiword tokens and empty nodes") {
  const std::string data =
      "# text = I don't know.\n"
      "1\tI\tI\tPRON\t_\t_\t4\tnsubj\t_\t_\n"
      "2-3\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "2\tdo\tdo\tAUX\t_\t_\t4\taux\t_\t_\n"
      "3\tn't\tnot\tPART\t_\t_\t4\tadvmod\t_\t_\n"
      "3.1\tx\tx\tX\t_\t_\t_\t_\t4:dep\t_\n"
      "4\tknow\tknow\tVERB\t_\t_\t0\troot\t_\tSpaceAfter=No\n"
      "5\t.\t.\tPUNCT\t_\t_\t4\tpunct\t_\t_\n\n";
  const auto doc = conllu::parse_string(data, "mem");
  const auto& s = doc.sentences.at(0);
  REQUIRE(s.tokens.size() == 5);
  CHECK(s.tokens[1].surface == "do");
  CHECK(s.tokens[1].chars == CharSpan{2, 7});
  CHECK(s.tokens[2].chars == CharSpan{2, 7});
  CHECK(s.tokens[3].chars == CharSpan{8, 12});
}

TEST_CASE("malformed input is a data error naming the line") {
  SUBCASE("too few columns") {
    CHECK_THROWS_AS(conllu::parse_string("1\tx\tx\tX\n\n", "bad.conllu"), DataError);
  }
  SUBCASE("head out of range") {
    CHECK_THROWS_AS(conllu::parse_string("# text = x\n1\tx\tx\tX\t_\t_\t5\tdep\t_\t_\n\n", "bad"), DataError);
  }
  SUBCASE("form absent from text") {
    try {
      (void)conllu::parse_string("# text = abc\n1\txyz\tx\tX\t_\t_\t0\troot\t_\t_\n\n", "bad.conllu");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("bad.conllu") != std::string::npos);
      CHECK(msg.find(":2") != std::string::npos);
    }
  }
  SUBCASE("non-consecutive ids") {
    CHECK_THROWS_AS(conllu::parse_string("# text = a b\n1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n3\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n\n", "bad"),
                    DataError);
  }
}

TEST_CASE("golden fixture parses into 25 sentences") {
  const auto doc = conllu::parse_file(testing::fixture("treebank/golden25.conllu"), "golden25.conllu");
  CHECK(doc.sentences.size() == 25);
  for (const auto& s : doc.sentences) {
    for (const auto& t : s.tokens) CHECK(t.chars.end <= s.text.size());
  }
}
