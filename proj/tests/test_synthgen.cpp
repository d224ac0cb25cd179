#include <doctest.h>

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "fixtures.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/preprocessing.hpp"
#include "sentinel/synthgen.hpp"

using namespace sentinel;

TEST_CASE("same seed gives identical bytes") {
  SynthSpec spec;
  spec.seed = 42;
  spec.conversations = 120;
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(a.xml() == b.xml());
  CHECK(a.truth() == b.truth());
  spec.seed = 43;
  CHECK(generate(spec).xml() != a.xml());
}

TEST_CASE("no predators at fraction zero") {
  SynthSpec spec;
  spec.conversations = 50;
  spec.predator_fraction = 0.0;
  const auto c = generate(spec);
  CHECK(c.predators.empty());
  CHECK(c.truth().empty());
}

TEST_CASE("500 conversations at 5% plant 25 positives") {
  SynthSpec spec;
  spec.seed = 7;
  const auto c = generate(spec);
  std::istringstream xml(c.xml());
  const auto parsed = parse_pan_corpus(xml);
  CHECK(parsed.skipped.empty());
  REQUIRE(parsed.conversations.size() == 500);
  CHECK(parsed.conversations == c.conversations);

  std::istringstream truth(c.truth());
  const auto predators = parse_ground_truth(truth);
  CHECK(predators == c.predators);
  std::size_t positives = 0;
  for (const auto& lc : label_conversations(parsed.conversations, predators)) positives += lc.positive ? 1 : 0;
  CHECK(positives == 25);
}

TEST_CASE("positive count is round(n x fraction)") {
  for (std::size_t n : {1, 7, 33, 101}) {
    for (double f : {0.05, 0.1, 0.5}) {
      SynthSpec spec;
      spec.conversations = n;
      spec.predator_fraction = f;
      spec.seed = n;
      const auto c = generate(spec);
      std::size_t positives = 0;
      for (const auto& lc : label_conversations(c.conversations, c.predators)) positives += lc.positive ? 1 : 0;
      CHECK(positives == static_cast<std::size_t>(std::llround(static_cast<double>(n) * f)));
    }
  }
}

TEST_CASE("pools are disjoint and markers stay where planted") {
  SynthSpec spec;
  spec.seed = 3;
  spec.conversations = 200;
  spec.predator_fraction = 0.1;
  const auto c = generate(spec);
  std::unordered_set<std::string> bg(c.pools.background.begin(), c.pools.background.end());
  std::unordered_set<std::string> pm(c.pools.predator.begin(), c.pools.predator.end());
  std::unordered_set<std::string> vm(c.pools.victim.begin(), c.pools.victim.end());
  CHECK(bg.size() == spec.background_pool);
  CHECK(pm.size() == spec.predator_markers);
  CHECK(vm.size() == spec.victim_markers);
  for (const auto& w : pm) CHECK((bg.count(w) == 0 && vm.count(w) == 0));
  for (const auto& w : vm) CHECK(bg.count(w) == 0);

  // pool words survive normalization unchanged
  const Normalizer norm(NormRuleSet::defaults());
  for (const auto* pool : {&c.pools.background, &c.pools.predator, &c.pools.victim}) {
    for (const auto& w : *pool) CHECK(norm(w) == w);
  }

  std::size_t predator_markers = 0;
  for (const auto& lc : label_conversations(c.conversations, c.predators)) {
    for (const auto& m : lc.conversation.messages) {
      for (const auto& tok : tokenize(norm(m.text))) {
        if (pm.count(tok)) {
          CHECK(c.predators.count(m.author) == 1);
          ++predator_markers;
        }
        if (vm.count(tok)) CHECK(lc.positive);
      }
    }
    if (lc.positive) CHECK(lc.conversation.messages.size() >= spec.min_positive_length);
  }
  CHECK(predator_markers > 0);
}

TEST_CASE("pool seed alone fixes the word pools") {
  SynthSpec a;
  a.seed = 1;
  a.pool_seed = 9;
  SynthSpec b = a;
  b.seed = 2;
  const auto pa = make_pools(a);
  const auto pb = make_pools(b);
  CHECK(pa.background == pb.background);
  CHECK(pa.predator == pb.predator);
  CHECK(pa.victim == pb.victim);
  b.pool_seed = 10;
  CHECK(make_pools(b).background != pa.background);
}

TEST_CASE("positive and negative lengths share one tail") {
  SynthSpec spec;
  spec.seed = 5;
  spec.conversations = 4000;
  spec.predator_fraction = 0.5;
  const auto c = generate(spec);
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (const auto& lc : label_conversations(c.conversations, c.predators)) {
    const auto len = static_cast<double>(lc.conversation.messages.size());
    if (lc.positive) {
      pos_sum += len;
      ++pos_n;
    } else if (len >= static_cast<double>(spec.min_positive_length)) {
      neg_sum += len;
      ++neg_n;
    }
  }
  // geometric tails are memoryless: both conditional means are min - 1 + mean
  const double expected = static_cast<double>(spec.min_positive_length) - 1.0 + spec.mean_length;
  CHECK(pos_sum / static_cast<double>(pos_n) == doctest::Approx(expected).epsilon(0.08));
  CHECK(neg_sum / static_cast<double>(neg_n) == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec spec;
  spec.predator_fraction = 1.0;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  spec = {};
  spec.conversations = 0;
  CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("files are written") {
  const auto dir = fixtures::scratch_dir("synthgen");
  SynthSpec spec;
  spec.conversations = 20;
  spec.predator_fraction = 0.2;
  const auto c = generate(spec);
  write_synth_corpus(c, dir / "c.xml", dir / "t.txt");
  CHECK(parse_pan_corpus_file(dir / "c.xml").conversations == c.conversations);
  CHECK(parse_ground_truth_file(dir / "t.txt") == c.predators);
}
