#include <doctest.h>

#include "sentinel/errors.hpp"
#include "sentinel/metrics.hpp"

using namespace sentinel;

namespace {

std::set<std::string> ids(const std::string& prefix, int n, int start = 0) {
  std::set<std::string> out;
  for (int i = start; i < start + n; ++i) out.insert(prefix + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("confusion counts") {
  auto c = confusion({"a", "b"}, {"a", "b"}, {"a", "b", "c"});
  CHECK(c == ConfusionCounts{2, 0, 1, 0});
  auto none = confusion({}, {"a"}, {"a", "b"});
  CHECK(none.tp == 0);
  CHECK(none.fp == 0);
  CHECK_THROWS_AS(confusion({"z"}, {"a"}, {"a"}), UsageError);
  CHECK_THROWS_AS(confusion({}, {"z"}, {"a"}), UsageError);

  // 206 retrieved, all relevant, against 254 predators
  auto truth = ids("p", 254);
  auto predicted = ids("p", 206);
  auto universe = truth;
  universe.merge(ids("n", 1000));
  auto table8 = confusion(predicted, truth, universe);
  CHECK(table8.tp == 206);
  CHECK(table8.fp == 0);
  CHECK(table8.fn == 48);
  CHECK(table8.tn == 1000);

  CHECK(confusion(std::vector<bool>{true, false, true}, std::vector<bool>{true, true, false}) ==
        ConfusionCounts{1, 1, 0, 1});
  CHECK_THROWS_AS(confusion(std::vector<bool>{true}, std::vector<bool>{}), UsageError);
}

TEST_CASE("F-beta against the published rankings") {
  CHECK(format_metric(f_beta(0.9804, 0.7874, 1.0)) == "0.8734");
  CHECK(format_metric(f_beta(0.9804, 0.7874, 0.5)) == "0.9346");
  CHECK(format_metric(f_beta(1.0, 0.8110, 1.0)) == "0.8956");
  CHECK(format_metric(f_beta(1.0, 0.8110, 0.5)) == "0.9555");
  for (double beta : {0.1, 0.5, 1.0, 2.0, 10.0}) CHECK(*f_beta(1.0, 1.0, beta) == 1.0);

  // from counts: 204 retrieved, 200 relevant, 254 predators
  auto s1 = precision_recall_f({200, 4, 0, 54}, 1.0);
  auto s05 = precision_recall_f({200, 4, 0, 54}, 0.5);
  CHECK(format_metric(s1.precision) == "0.9804");
  CHECK(format_metric(s1.recall) == "0.7874");
  CHECK(format_metric(s1.f) == "0.8734");
  CHECK(format_metric(s05.f) == "0.9346");

  auto t8 = precision_recall_f({206, 0, 218488, 48}, 1.0);
  CHECK(format_metric(t8.precision) == "1.0000");
  CHECK(format_metric(t8.recall) == "0.8110");
}

TEST_CASE("undefined metrics are absent") {
  auto empty = precision_recall_f({0, 0, 5, 3}, 1.0);
  CHECK_FALSE(empty.precision);
  CHECK(*empty.recall == 0.0);
  CHECK_FALSE(empty.f);
  auto zero = precision_recall_f({0, 2, 5, 3}, 1.0);
  CHECK(*zero.precision == 0.0);
  CHECK_FALSE(zero.f);
  CHECK(format_metric(std::nullopt) == "—");
  CHECK_THROWS_AS(f_beta(0.5, 0.5, 0.0), UsageError);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({3, 0, 4, 0}) == 1.0);
  CHECK(accuracy({0, 2, 0, 1}) == 0.0);
  CHECK_THROWS_AS(accuracy({}), UsageError);
}

TEST_CASE("F-beta properties") {
  for (double p = 0.05; p <= 1.0; p += 0.05) {
    for (double r = 0.05; r <= 1.0; r += 0.05) {
      for (double beta : {0.5, 1.0, 2.0}) {
        const double f = *f_beta(p, r, beta);
        CHECK(f >= std::min(p, r) - 1e-12);
        CHECK(f <= std::max(p, r) + 1e-12);
        CHECK(*f_beta(p + 0.01, r, beta) >= f);
        CHECK(*f_beta(p, r + 0.01, beta) >= f);
      }
      CHECK(std::abs(*f_beta(p, r, 0.01) - p) < 1e-2);
      CHECK(std::abs(*f_beta(p, r, 100.0) - r) < 1e-2);
    }
  }
}

TEST_CASE("round half even") {
  CHECK(round_half_even(0.12345, 4) == doctest::Approx(0.1234));
  CHECK(round_half_even(0.12355, 4) == doctest::Approx(0.1236));
  CHECK(round_half_even(0.123451, 4) == doctest::Approx(0.1235));
  CHECK(format_metric(0.5) == "0.5000");
}

TEST_CASE("evaluation table layout") {
  auto table = evaluation_table({{"predators", {206, 0, 1000, 48}}, {"empty", {0, 0, 3, 0}}});
  CHECK(table.find("RETR.") != std::string::npos);
  CHECK(table.find("F0.5") != std::string::npos);
  CHECK(table.find("0.8110") != std::string::npos);
  CHECK(table.find("—") != std::string::npos);
}
