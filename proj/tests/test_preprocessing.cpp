#include <doctest.h>
#include <algorithm>
#include <map>
#include <set>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/preprocessing.hpp"

using namespace sentinel;

TEST_CASE("normalization fixtures") {
  const Normalizer norm(NormRuleSet::defaults());
  const auto cases = fixtures::load_normalization_cases();
  REQUIRE(cases.size() >= 20);
  for (const auto& [input, expected] : cases) {
    CAPTURE(input);
    CHECK(norm(input) == expected);
  }
}

TEST_CASE("normalization is idempotent and ASCII-only") {
  const Normalizer norm(NormRuleSet::defaults());
  for (const auto& [input, expected] : fixtures::load_normalization_cases()) {
    const std::string once = norm(input);
    CAPTURE(input);
    CHECK(norm(once) == once);
    for (char c : once) CHECK(static_cast<unsigned char>(c) < 0x80);
  }
}

TEST_CASE("long-word limit is configurable") {
  auto rules = NormRuleSet::defaults();
  rules.long_word_limit = 5;
  CHECK(normalize_text("short longer", rules) == "short 00LW");
}

TEST_CASE("shipped data files match the built-in defaults") {
  NormRuleSet from_files;
  from_files.load_abbreviations_file(std::string(SENTINEL_DATA_DIR) + "/abbreviations.tsv");
  from_files.load_emoticons_file(std::string(SENTINEL_DATA_DIR) + "/emoticons.txt");
  const auto defaults = NormRuleSet::defaults();
  CHECK(from_files.abbreviations == defaults.abbreviations);
  CHECK(from_files.emoticon_patterns == defaults.emoticon_patterns);
}

TEST_CASE("abbreviation files extend the map and reject bad keys") {
  auto rules = NormRuleSet::defaults();
  std::istringstream extra("# comment\nasap\tas soon as possible\n\n");
  rules.load_abbreviations(extra);
  CHECK(normalize_text("ASAP pls", rules) == "as soon as possible please");

  std::istringstream bad("Caps\tnope\n");
  CHECK_THROWS_AS(rules.load_abbreviations(bad), ConfigError);
  std::istringstream no_tab("missing tab\n");
  CHECK_THROWS_AS(rules.load_abbreviations(no_tab), ConfigError);
}

TEST_CASE("invalid emoticon pattern is a configuration error") {
  NormRuleSet rules;
  rules.emoticon_patterns = {"[unclosed"};
  CHECK_THROWS_AS(Normalizer{rules}, ConfigError);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("hello, world") == std::vector<std::string>{"hello", ",", "world"});
  CHECK(tokenize("00NUM?") == std::vector<std::string>{"00NUM", "?"});
  CHECK(tokenize("a...b") == std::vector<std::string>{"a", ".", ".", ".", "b"});
}

TEST_CASE("build_vocabulary") {
  SUBCASE("minimum term frequency cut") {
    std::vector<std::string> doc(9, "rare");
    for (int i = 0; i < 10; ++i) doc.push_back("common");
    auto v = build_vocabulary({doc, {"other"}}, 10);
    CHECK_FALSE(v.find("rare"));
    CHECK(v.find("common"));
    CHECK(v.size() == Vocabulary::kReservedCount + 1);
  }
  SUBCASE("min_tf 1 keeps everything") {
    auto v = build_vocabulary({tokenize("a a b")}, 1);
    CHECK(v.find("a"));
    CHECK(v.find("b"));
  }
  SUBCASE("reserved symbols always present") {
    auto v = build_vocabulary({{"x"}}, 5);
    CHECK(v.size() == Vocabulary::kReservedCount);
    CHECK(v.lookup("<pad>") == Vocabulary::kPad);
    CHECK(v.lookup("<unk>") == Vocabulary::kUnk);
    CHECK(v.lookup("<eos>") == Vocabulary::kEos);
    CHECK(v.lookup("00NUM") == Vocabulary::kNum);
    CHECK(v.lookup("00LW") == Vocabulary::kLongWord);
    CHECK(v.lookup("00URL") == Vocabulary::kUrl);
  }
  SUBCASE("token in every document has zero weight and ranks last") {
    // "all": tf 3, df 3 -> weight 0. "two": tf 2, df 2 -> 2 ln(3/2). "one": tf 1, df 1 -> ln 3.
    std::vector<std::vector<std::string>> docs = {{"all", "two", "one"}, {"all", "two"}, {"all"}};
    auto v = build_vocabulary(docs, 1);
    REQUIRE(v.size() == Vocabulary::kReservedCount + 3);
    // 2 ln 1.5 = 0.811 < ln 3 = 1.099
    CHECK(v.token(6) == "one");
    CHECK(v.token(7) == "two");
    CHECK(v.token(8) == "all");
  }
  SUBCASE("ties are broken lexicographically") {
    auto v = build_vocabulary({{"zeta", "alpha"}, {"beta"}}, 1);
    // alpha, zeta: tf 1 df 1, weight ln 2; beta the same
    CHECK(v.token(6) == "alpha");
    CHECK(v.token(7) == "beta");
    CHECK(v.token(8) == "zeta");
  }
  CHECK_THROWS_AS(build_vocabulary({}, 1), UsageError);
  CHECK_THROWS_AS(build_vocabulary({{"a"}}, 0), UsageError);
}

TEST_CASE("vocabulary ordering is a total order on random corpora") {
  std::vector<std::vector<std::string>> docs;
  unsigned state = 7;
  for (int d = 0; d < 30; ++d) {
    std::vector<std::string> doc;
    for (int i = 0; i < 20; ++i) {
      state = state * 1103515245u + 12345u;
      doc.push_back("w" + std::to_string((state >> 16) % 25));
    }
    docs.push_back(doc);
  }
  auto v = build_vocabulary(docs, 3);
  auto again = build_vocabulary(docs, 3);
  CHECK(v == again);
  std::map<std::string, std::pair<double, double>> stats;
  for (const auto& doc : docs) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : doc) stats[t].first += 1;
    for (const auto& t : seen) stats[t].second += 1;
  }
  for (std::size_t i = Vocabulary::kReservedCount + 1; i < v.size(); ++i) {
    const auto& a = stats[v.token(static_cast<TokenId>(i - 1))];
    const auto& b = stats[v.token(static_cast<TokenId>(i))];
    CHECK(a.first >= 3);
    const double wa = a.first * std::log(30.0 / a.second);
    const double wb = b.first * std::log(30.0 / b.second);
    CHECK(wa >= wb);
  }
}

TEST_CASE("encode") {
  auto v = build_vocabulary({{"hello", "world"}}, 1);
  CHECK(encode({}, v, 50) == std::vector<TokenId>{Vocabulary::kEos});
  CHECK(encode({"unseen"}, v, 50) == std::vector<TokenId>{Vocabulary::kUnk, Vocabulary::kEos});

  std::vector<std::string> sixty;
  for (int i = 0; i < 60; ++i) sixty.push_back(i % 2 ? "hello" : "world");
  auto ids = encode(sixty, v, 50);
  CHECK(ids.size() == 50);
  CHECK(ids.back() == v.lookup(sixty[49]));
  CHECK(std::find(ids.begin(), ids.end(), Vocabulary::kEos) == ids.end());

  CHECK(encode({"hello"}, v, 1).size() == 1);
  CHECK_THROWS_AS(encode({"hello"}, v, 0), UsageError);
}

TEST_CASE("vocabulary reconstruction validates the reserved prefix") {
  auto v = build_vocabulary({{"a", "b"}}, 1);
  CHECK(Vocabulary::from_tokens(v.tokens(), 1) == v);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}, 1), FormatError);
  auto dup = v.tokens();
  dup.push_back("a");
  CHECK_THROWS_AS(Vocabulary::from_tokens(dup, 1), FormatError);
}
