#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aoplab/predictors.hpp"
#include "support.hpp"

using namespace aoplab;
using namespace aoplab::predictors;

namespace {

// big car x3, red car, big dog, old dog x2, red ball x2, old car
PmiTable fixture_table(double alpha = 0.0) {
  return build_pmi_table({{"big", "car"}, {"big", "car"}, {"Big", "car"}, {"red", "car"}, {"big", "dog"},
                          {"old", "dog"}, {"old", "dog"}, {"red", "ball"}, {"red", "ball"}, {"old", "CAR"}},
                         alpha);
}

std::vector<cap::CapItem> fixture_items() { return cap::read_jsonl(testing::fixture("predictors/items.jsonl")); }

SubjectivityRatings fixture_ratings() { return SubjectivityRatings::load(testing::fixture("predictors/ratings.tsv")); }

int sign(double x) { return (x > 0) - (x < 0); }
int sign(std::int64_t x) { return (x > 0) - (x < 0); }

}  // namespace

TEST_CASE("pmi table counts and closed forms") {
  const auto t = fixture_table();
  CHECK(t.total_amod_count() == 10);
  CHECK(t.pair_count("big", "car") == 3);
  CHECK(t.pair_count("red", "dog") == 0);
  CHECK(t.adjective_types() == 3);
  CHECK(t.noun_types() == 3);
  CHECK(t.joint("old", "dog") == doctest::Approx(0.2));
  CHECK(t.adj_marginal("big") == doctest::Approx(0.4));
  CHECK(t.noun_marginal("car") == doctest::Approx(0.5));
  CHECK(*t.pmi("big", "car") == doctest::Approx(std::log(1.5)).epsilon(1e-15));
  CHECK(*t.pmi("old", "dog") == doctest::Approx(std::log(20.0 / 9.0)).epsilon(1e-15));
  CHECK(*t.pmi("red", "ball") == doctest::Approx(std::log(10.0 / 3.0)).epsilon(1e-15));
  CHECK_FALSE(t.pmi("red", "dog").has_value());
  CHECK_FALSE(t.pmi("nice", "car").has_value());
  CHECK_FALSE(t.pmi("big", "table").has_value());

  const auto s = fixture_table(1.0);
  CHECK(*s.pmi("old", "ball") == doctest::Approx(std::log(19.0 / 30.0)).epsilon(1e-15));
  CHECK(s.joint("big", "car") == doctest::Approx(4.0 / 19.0));
  CHECK_THROWS_AS(build_pmi_table({}), DataError);
}

TEST_CASE("ten-item predictor fixture") {
  const auto items = fixture_items();
  const auto table = fixture_table();
  const auto ratings = fixture_ratings();
  REQUIRE(items.size() == 10);

  const double lengths[] = {0, 0, 0, 0, -1, 2, 0, -6, 0, -2};
  const std::optional<double> pmis[] = {std::log(4.0 / 9.0), std::log(9.0 / 4.0), std::log(3.0 / 8.0),
                                        std::log(4.0 / 9.0), std::nullopt,        std::nullopt,
                                        std::nullopt,        std::nullopt,        std::nullopt,
                                        std::nullopt};
  const std::optional<double> subj[] = {0.125, -0.125, 0.25, -0.25, 0.75, std::nullopt, 0.375, 0.75, -0.375, 0.125};

  const auto scores = score_items(items, &table, &ratings);
  for (std::size_t i = 0; i < items.size(); ++i) {
    INFO(items[i].item_id);
    CHECK(length_score(items[i]) == lengths[i]);
    CHECK(scores[i].length == lengths[i]);
    CHECK(scores[i].pmi.has_value() == pmis[i].has_value());
    if (pmis[i]) CHECK(*scores[i].pmi == doctest::Approx(*pmis[i]).epsilon(1e-14));
    CHECK(scores[i].subjectivity == subj[i]);
  }

  std::vector<std::optional<double>> len_v, pmi_v, subj_v;
  for (const auto& s : scores) {
    len_v.emplace_back(s.length);
    pmi_v.push_back(s.pmi);
    subj_v.push_back(s.subjectivity);
  }
  const auto la = predictor_accuracy(len_v);
  CHECK(la.accuracy == doctest::Approx(0.1));
  CHECK(la.coverage == 1.0);
  const auto pa = predictor_accuracy(pmi_v);
  CHECK(pa.accuracy == doctest::Approx(0.25));
  CHECK(pa.coverage == doctest::Approx(0.4));
  CHECK(pa.n == 4);
  const auto sa = predictor_accuracy(subj_v);
  CHECK(sa.accuracy == doctest::Approx(6.0 / 9.0));
  CHECK(sa.coverage == doctest::Approx(0.9));

  SUBCASE("summary overlap covers items with both optional scores") {
    const auto j = summary_json(scores);
    CHECK(j.find("\"universe\": 4") != std::string::npos);
  }
}

TEST_CASE("length counts code points") {
  cap::CapItem item{"x", "", "", std::nullopt, "na\xc3\xafve", "big", "car", ""};
  CHECK(length_score(item) == -2.0);
}

TEST_CASE("pmi differences agree in sign with integer cross products") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> cnt(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    PmiTable t;
    const char* adjs[] = {"a1", "a2", "a3"};
    const char* nouns[] = {"n1", "n2"};
    for (auto a : adjs)
      for (auto n : nouns)
        if (int c = cnt(rng)) t.add(a, n, static_cast<std::uint64_t>(c));
    t.add("a1", "n1");
    t.add("a2", "n1");
    const auto c1 = static_cast<std::int64_t>(t.pair_count("a1", "n1"));
    const auto c2 = static_cast<std::int64_t>(t.pair_count("a2", "n1"));
    std::int64_t m1 = 0, m2 = 0;
    for (auto n : nouns) {
      m1 += static_cast<std::int64_t>(t.pair_count("a1", n));
      m2 += static_cast<std::int64_t>(t.pair_count("a2", n));
    }
    cap::CapItem item{"x", "", "", std::nullopt, "a1", "a2", "n1", ""};
    const auto score = pmi_score(item, t);
    REQUIRE(score.has_value());
    // PMI(a2,n) - PMI(a1,n) has the sign of c2/m2 - c1/m1
    CHECK(sign(*score) == sign(c2 * m1 - c1 * m2));
  }
}

TEST_CASE("strict positivity") {
  CHECK(predictor_accuracy(std::vector<std::optional<double>>{1.0, -1.0, 0.0}).accuracy ==
        doctest::Approx(1.0 / 3.0));
  CHECK(predictor_accuracy(std::vector<std::optional<double>>{1.0, std::nullopt}).accuracy == 1.0);
  CHECK_THROWS_AS(predictor_accuracy(std::vector<std::optional<double>>{}), DataError);
  CHECK_THROWS_AS(predictor_accuracy(std::vector<std::optional<double>>{std::nullopt}), DataError);
  std::vector<PredictorScore> ps{{"a", Predictor::pmi, 2.0}, {"b", Predictor::pmi, std::nullopt}};
  CHECK(predictor_accuracy(ps).coverage == 0.5);
}

TEST_CASE("overlap partition regions sum to the universe") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 40)(rng);
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    std::set<std::string> universe;
    for (int i = 0; i < n; ++i) universe.insert("i" + std::to_string(i));
    std::map<std::string, std::set<std::string>> sets;
    for (int p = 0; p < k; ++p) {
      auto& s = sets["p" + std::to_string(p)];
      for (const auto& id : universe)
        if (rng() % 2) s.insert(id);
    }
    const auto part = overlap_partition(sets, universe);
    REQUIRE(part.regions.size() == (std::size_t{1} << k));
    std::size_t total = 0;
    for (const auto& r : part.regions) total += r.count;
    CHECK(total == universe.size());
    for (std::size_t b = 0; b < part.predictors.size(); ++b) {
      std::size_t in_set = 0;
      for (std::size_t mask = 0; mask < part.regions.size(); ++mask)
        if (mask & (std::size_t{1} << b)) in_set += part.regions[mask].count;
      CHECK(in_set == sets[part.predictors[b]].size());
    }
  }
  CHECK_THROWS_AS(overlap_partition({{"p", {"zz"}}}, {"a"}), DataError);
  const auto p = overlap_partition({{"x", {"a"}}, {"y", {"a", "b"}}}, {"a", "b", "c"});
  CHECK(p.regions[3].count == 1);
  CHECK(p.regions[3].members == std::vector<std::string>{"x", "y"});
  CHECK(p.union_coverage == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("subjectivity ratings parsing") {
  const auto r = fixture_ratings();
  CHECK(r.size() == 7);
  CHECK(r.get("beautiful") == 1.0);
  CHECK(r.get("BIG") == 0.25);
  CHECK_FALSE(r.get("wooden").has_value());
  CHECK(SubjectivityRatings::parse("big\t1\n", "mem").size() == 1);
  CHECK_THROWS_AS(SubjectivityRatings::parse("big\t1\nred\tx\n", "mem"), DataError);
  CHECK_THROWS_AS(SubjectivityRatings::parse("big\tnan\n", "mem"), DataError);
  CHECK_THROWS_AS(SubjectivityRatings::load("/nonexistent.tsv"), DataError);
}

TEST_CASE("amod pairs from a treebank") {
  const auto doc = conllu::parse_file(testing::fixture("treebank/golden25.conllu"), "golden25.conllu");
  const auto pairs = amod_pairs(doc);
  CHECK(pairs.front() == std::pair<std::string, std::string>{"big", "car"});
  CHECK(std::count(pairs.begin(), pairs.end(), std::pair<std::string, std::string>{"little", "mouse"}) == 1);
  const auto t1 = pmi_table_from_conllu(testing::fixture("treebank"), 0.0, 1);
  const auto t4 = pmi_table_from_conllu(testing::fixture("treebank"), 0.0, 4);
  CHECK(t1.pairs() == t4.pairs());
  CHECK(t1.total_amod_count() == pairs.size());
}

TEST_CASE("predictor scores round trip") {
  const auto table = fixture_table();
  const auto ratings = fixture_ratings();
  const auto scores = score_items(fixture_items(), &table, &ratings);
  testing::TempDir dir;
  std::ostringstream out;
  write_jsonl(out, scores);
  testing::write(dir / "p.jsonl", out.str());
  const auto back = read_jsonl(dir / "p.jsonl");
  REQUIRE(back.size() == scores.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].item_id == scores[i].item_id);
    CHECK(back[i].length == scores[i].length);
    CHECK(back[i].pmi == scores[i].pmi);
    CHECK(back[i].subjectivity == scores[i].subjectivity);
  }
  const auto none = score_items(fixture_items(), nullptr, nullptr);
  CHECK_FALSE(none[0].pmi.has_value());
  CHECK_FALSE(none[0].subjectivity.has_value());
}
