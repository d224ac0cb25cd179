#include "sentinel/metrics.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {

ConfusionCounts confusion(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                          const std::set<std::string>& universe) {
  for (const auto* set : {&predicted, &truth}) {
    for (const auto& id : *set) {
      if (!universe.count(id)) throw UsageError("confusion: '" + id + "' is not in the universe");
    }
  }
  ConfusionCounts c;
  for (const auto& id : universe) {
    const bool p = predicted.count(id) != 0;
    const bool t = truth.count(id) != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) {
    throw UsageError("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::optional<double> f_beta(std::optional<double> precision, std::optional<double> recall, double beta) {
  if (!(beta > 0.0)) throw UsageError("f_beta: beta must be positive");
  if (!precision || !recall) return std::nullopt;
  const double p = *precision, r = *recall;
  if (p == 0.0 && r == 0.0) return std::nullopt;
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (b2 * p + r);
}

PrfScores precision_recall_f(const ConfusionCounts& counts, double beta) {
  PrfScores s;
  if (counts.tp + counts.fp > 0) s.precision = double(counts.tp) / double(counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0) s.recall = double(counts.tp) / double(counts.tp + counts.fn);
  s.f = f_beta(s.precision, s.recall, beta);
  return s;
}

double accuracy(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw UsageError("accuracy: empty universe");
  return double(counts.tp + counts.tn) / double(counts.total());
}

double round_half_even(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double scaled = value * scale;
  // Snap values that sit a few ulps off an exact half so that 0.12345 is
  // treated as the tie it is written as.
  const double floor_v = std::floor(scaled);
  double r;
  if (std::abs(scaled - floor_v - 0.5) < 1e-9) {
    r = std::nearbyint(floor_v + 0.5);
  } else {
    r = std::nearbyint(scaled);
  }
  std::fesetround(saved);
  return r / scale;
}

std::string format_metric(std::optional<double> value) {
  if (!value) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", round_half_even(*value, 4));
  return buf;
}

std::string evaluation_table(const std::vector<EvaluationRow>& rows) {
  std::ostringstream out;
  auto cell = [&](const std::string& s, int width) {
    // em dash is one column wide but three bytes long
    const int visible = s == "—" ? 1 : static_cast<int>(s.size());
    out << std::string(static_cast<std::size_t>(std::max(0, width - visible)), ' ') << s;
  };
  out << std::left << std::setw(16) << "Run";
  for (const char* h : {"RETR.", "REL.", "P", "R", "F1", "F0.5", "Acc."}) cell(h, 9);
  out << '\n';
  for (const auto& row : rows) {
    out << std::left << std::setw(16) << row.name;
    cell(std::to_string(row.counts.retrieved()), 9);
    cell(std::to_string(row.counts.tp), 9);
    const auto one = precision_recall_f(row.counts, 1.0);
    const auto half = precision_recall_f(row.counts, 0.5);
    cell(format_metric(one.precision), 9);
    cell(format_metric(one.recall), 9);
    cell(format_metric(one.f), 9);
    cell(format_metric(half.f), 9);
    cell(row.counts.total() ? format_metric(accuracy(row.counts)) : format_metric(std::nullopt), 9);
    out << '\n';
  }
  return out.str();
}

}  // namespace sentinel
