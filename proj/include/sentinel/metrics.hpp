#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sentinel {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t retrieved() const { return tp + fp; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Set-based counts; predicted and truth must both be subsets of universe.
ConfusionCounts confusion(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                          const std::set<std::string>& universe);

// Element-wise counts over aligned binary decisions.
ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// Undefined values are absent rather than zero.
struct PrfScores {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f;
};

std::optional<double> f_beta(std::optional<double> precision, std::optional<double> recall, double beta);
PrfScores precision_recall_f(const ConfusionCounts& counts, double beta);
double accuracy(const ConfusionCounts& counts);

// Half-to-even rounding at `decimals` places.
double round_half_even(double value, int decimals);
// Four decimals, or an em dash when absent.
std::string format_metric(std::optional<double> value);

struct EvaluationRow {
  std::string name;
  ConfusionCounts counts;
};

// Aligned text table: RETR., REL., P, R, F1, F0.5, plus accuracy.
std::string evaluation_table(const std::vector<EvaluationRow>& rows);

}  // namespace sentinel
