#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sentinel/core_math.hpp"
#include "sentinel/language_model.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

// A conversation as one sentence vector per message.
template <class Scalar>
struct ConversationSequence {
  std::string id;
  std::vector<RowVec<Scalar>> vectors;
  std::optional<bool> label;
};

// Returns nullopt when the conversation has no messages left to vectorize.
template <class Scalar>
std::optional<ConversationSequence<Scalar>> vectorize_conversation(
    const std::string& id, const std::vector<std::vector<TokenId>>& messages, const LanguageModel<Scalar>& lm,
    std::optional<bool> label = std::nullopt) {
  ConversationSequence<Scalar> seq{id, {}, label};
  for (const auto& ids : messages) {
    if (ids.empty()) continue;
    seq.vectors.push_back(sentence_vector(lm, std::span<const TokenId>(ids)).values);
  }
  if (seq.vectors.empty()) return std::nullopt;
  return seq;
}

template <class Scalar>
struct Chunk {
  std::string conversation_id;
  std::size_t part = 0;
  Tensor<Scalar> matrix;  // chunk_len x H, rows >= valid_len are zero
  std::size_t valid_len = 0;
  bool label = false;

  std::size_t chunk_len() const { return static_cast<std::size_t>(matrix.rows()); }
};

template <class Scalar>
std::vector<Chunk<Scalar>> chunk_and_pad(const ConversationSequence<Scalar>& seq, std::size_t chunk_len = 100) {
  if (chunk_len == 0) throw UsageError("chunk_and_pad: chunk_len must be positive");
  if (seq.vectors.empty()) throw UsageError("chunk_and_pad: conversation " + seq.id + " has no vectors");
  const auto dim = seq.vectors.front().size();
  std::vector<Chunk<Scalar>> out;
  for (std::size_t begin = 0, part = 0; begin < seq.vectors.size(); begin += chunk_len, ++part) {
    Chunk<Scalar> chunk;
    chunk.conversation_id = seq.id;
    chunk.part = part;
    chunk.valid_len = std::min(chunk_len, seq.vectors.size() - begin);
    chunk.label = seq.label.value_or(false);
    chunk.matrix = Tensor<Scalar>::Zero(static_cast<Eigen::Index>(chunk_len), dim);
    for (std::size_t r = 0; r < chunk.valid_len; ++r) {
      const auto& v = seq.vectors[begin + r];
      if (v.size() != dim) {
        throw ShapeError("chunk_and_pad: vector of size " + std::to_string(v.size()) + " in a sequence of size " +
                         std::to_string(dim));
      }
      chunk.matrix.row(static_cast<Eigen::Index>(r)) = v;
    }
    out.push_back(std::move(chunk));
  }
  return out;
}

// LSTM -> LSTM -> sigmoid head on the last state.
template <class Scalar>
struct ScdParams {
  LstmLayer<Scalar> lower;  // input_dim -> H
  LstmLayer<Scalar> upper;  // H -> H
  Tensor<Scalar> head_w;    // H x 1
  Tensor<Scalar> head_b;    // 1 x 1

  template <class Fn>
  void visit(Fn&& fn) {
    lower.visit("lower.", fn);
    upper.visit("upper.", fn);
    fn("head_w", head_w);
    fn("head_b", head_b);
  }

  ParamRefs<Scalar> params() {
    ParamRefs<Scalar> out;
    visit([&](const std::string&, Tensor<Scalar>& t) { out.push_back(&t); });
    return out;
  }

  ScdParams zeros_like() const {
    return {lower.zeros_like(), upper.zeros_like(), Tensor<Scalar>::Zero(head_w.rows(), 1),
            Tensor<Scalar>::Zero(1, 1)};
  }

  template <class Other>
  ScdParams<Other> cast() const {
    return {lower.template cast<Other>(), upper.template cast<Other>(), head_w.template cast<Other>(),
            head_b.template cast<Other>()};
  }
};

struct ScdShape {
  std::size_t input_dim = 200;
  std::size_t hidden_dim = 200;
  bool has_bias = true;
  bool masked = true;  // read the state at the last valid step instead of the last padded one
};

template <class Scalar>
struct ScdModel {
  ScdParams<Scalar> params;
  bool masked = true;

  std::size_t input_dim() const { return params.lower.input_dim; }
  std::size_t hidden_dim() const { return params.lower.hidden_dim; }

  static ScdModel create(const ScdShape& shape, Rng& rng) {
    ScdModel m;
    m.masked = shape.masked;
    m.params.lower = LstmLayer<Scalar>::random(shape.input_dim, shape.hidden_dim, shape.has_bias, rng);
    m.params.upper = LstmLayer<Scalar>::random(shape.hidden_dim, shape.hidden_dim, shape.has_bias, rng);
    m.params.head_w.resize(static_cast<Eigen::Index>(shape.hidden_dim), 1);
    init_uniform(m.params.head_w, shape.hidden_dim, rng);
    m.params.head_b = Tensor<Scalar>::Zero(1, 1);
    return m;
  }

  template <class Other>
  ScdModel<Other> cast() const {
    return {params.template cast<Other>(), masked};
  }
};

namespace detail {

template <class Scalar>
std::vector<RowVec<Scalar>> chunk_steps(const Chunk<Scalar>& chunk, std::size_t input_dim, bool masked) {
  if (static_cast<std::size_t>(chunk.matrix.cols()) != input_dim) {
    throw ShapeError("scd: chunk " + shape_string(chunk.matrix.rows(), chunk.matrix.cols()) + " does not match input dimension " +
                     std::to_string(input_dim));
  }
  if (chunk.valid_len == 0 || chunk.valid_len > chunk.chunk_len()) {
    throw UsageError("scd: chunk valid_len " + std::to_string(chunk.valid_len) + " outside [1, " +
                     std::to_string(chunk.chunk_len()) + "]");
  }
  const std::size_t steps = masked ? chunk.valid_len : chunk.chunk_len();
  std::vector<RowVec<Scalar>> xs;
  xs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(chunk.matrix.row(static_cast<Eigen::Index>(t)));
  return xs;
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace detail

// Binary cross-entropy of one chunk, optionally accumulating gradients.
// Also reports the logit through `logit_out`.
template <class Scalar>
double scd_chunk_loss(const ScdParams<Scalar>& params, const Chunk<Scalar>& chunk, bool masked,
                      ScdParams<Scalar>* grads = nullptr, double* logit_out = nullptr) {
  const auto xs = detail::chunk_steps(chunk, params.lower.input_dim, masked);
  const auto h = params.lower.hidden_dim;
  const auto lower = sequence_forward(xs, LstmState<Scalar>::zeros(h), params.lower);
  const auto upper = sequence_forward(lower.hidden_states(), LstmState<Scalar>::zeros(h), params.upper);
  const RowVec<Scalar>& last = upper.steps.back().s;
  const double z = static_cast<double>((last * params.head_w)(0, 0) + params.head_b(0, 0));
  if (logit_out) *logit_out = z;
  const double y = chunk.label ? 1.0 : 0.0;
  const double loss = detail::softplus(z) - y * z;
  if (grads) {
    const auto dz = static_cast<Scalar>(sigmoid_scalar(z) - y);
    grads->head_w.noalias() += last.transpose() * dz;
    grads->head_b(0, 0) += dz;
    std::vector<RowVec<Scalar>> d_upper(upper.size(), RowVec<Scalar>::Zero(static_cast<Eigen::Index>(h)));
    d_upper.back() = dz * params.head_w.transpose();
    const auto d_lower = sequence_backward(upper, params.upper, d_upper, grads->upper);
    sequence_backward(lower, params.lower, d_lower, grads->lower);
  }
  return loss;
}

template <class Scalar>
double chunk_probability(const ScdModel<Scalar>& model, const Chunk<Scalar>& chunk) {
  double z = 0.0;
  scd_chunk_loss(model.params, chunk, model.masked, static_cast<ScdParams<Scalar>*>(nullptr), &z);
  return sigmoid_scalar(z);
}

struct ScdPrediction {
  std::vector<double> probabilities;
  double max_probability = 0.0;
  bool verdict = false;
};

inline ScdPrediction aggregate_chunks(std::vector<double> probabilities, double threshold = 0.5) {
  ScdPrediction out;
  out.probabilities = std::move(probabilities);
  if (!out.probabilities.empty()) {
    out.max_probability = *std::max_element(out.probabilities.begin(), out.probabilities.end());
    out.verdict = out.max_probability >= threshold;
  }
  return out;
}

template <class Scalar>
ScdPrediction predict_scd(const ScdModel<Scalar>& model, const std::vector<Chunk<Scalar>>& chunks,
                          double threshold = 0.5) {
  if (chunks.empty()) throw UsageError("predict_scd: no chunks");
  std::vector<double> probs;
  probs.reserve(chunks.size());
  for (const auto& c : chunks) probs.push_back(chunk_probability(model, c));
  return aggregate_chunks(std::move(probs), threshold);
}

struct ScdTrainConfig {
  std::size_t epochs = 5;
  std::size_t batch = 16;
  double lr = 0.1;
  double clip = 5.0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double negative_ratio = 5.0;  // negatives kept per positive each epoch; <= 0 keeps all
  double validation_fraction = 0.2;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

struct ScdSplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  PrfScores prf;
};

struct ScdEpochLog {
  std::size_t epoch = 0;
  ScdSplitMetrics train;
  std::optional<ScdSplitMetrics> validation;

  std::string line() const {
    std::ostringstream out;
    auto put = [&](const char* name, const ScdSplitMetrics& m) {
      out << ' ' << name << "_loss=" << format_metric(m.loss) << ' ' << name
          << "_acc=" << format_metric(m.accuracy) << ' ' << name << "_p=" << format_metric(m.prf.precision)
          << ' ' << name << "_r=" << format_metric(m.prf.recall) << ' ' << name
          << "_f1=" << format_metric(m.prf.f);
    };
    out << "epoch=" << epoch;
    put("train", train);
    if (validation) put("val", *validation);
    return out.str();
  }
};

struct ScdTrainResult {
  std::vector<ScdEpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

namespace detail {

inline ScdSplitMetrics split_metrics(const std::vector<bool>& labels, const std::vector<double>& probs,
                                     double loss_sum, double threshold) {
  std::vector<bool> predicted(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) predicted[i] = probs[i] >= threshold;
  const auto counts = confusion(predicted, labels);
  ScdSplitMetrics m;
  m.loss = labels.empty() ? 0.0 : loss_sum / static_cast<double>(labels.size());
  m.accuracy = labels.empty() ? 0.0 : accuracy(counts);
  m.prf = precision_recall_f(counts, 1.0);
  return m;
}

template <class Scalar>
ScdSplitMetrics evaluate_chunks(const ScdModel<Scalar>& model, const std::vector<const Chunk<Scalar>*>& chunks,
                                double threshold) {
  std::vector<bool> labels;
  std::vector<double> probs;
  double loss = 0.0;
  for (const auto* c : chunks) {
    double z = 0.0;
    loss += scd_chunk_loss(model.params, *c, model.masked, static_cast<ScdParams<Scalar>*>(nullptr), &z);
    labels.push_back(c->label);
    probs.push_back(sigmoid_scalar(z));
  }
  return split_metrics(labels, probs, loss, threshold);
}

// Holds out whole conversations, stratified by label, keeping at least one
// conversation of each class for training.
template <class Scalar>
void stratified_split(const std::vector<Chunk<Scalar>>& chunks, double fraction, Rng& rng,
                      std::vector<const Chunk<Scalar>*>& train, std::vector<const Chunk<Scalar>*>& validation) {
  std::vector<std::string> ids[2];
  std::vector<std::string> seen;
  for (const auto& c : chunks) {
    if (std::find(seen.begin(), seen.end(), c.conversation_id) == seen.end()) {
      seen.push_back(c.conversation_id);
      ids[c.label ? 1 : 0].push_back(c.conversation_id);
    }
  }
  std::vector<std::string> held;
  for (auto& group : ids) {
    rng.shuffle(std::span<std::string>(group));
    if (group.size() < 2) continue;
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group.size())));
    take = std::min(take, group.size() - 1);
    held.insert(held.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(held.begin(), held.end());
  for (const auto& c : chunks) {
    (std::binary_search(held.begin(), held.end(), c.conversation_id) ? validation : train).push_back(&c);
  }
}

}  // namespace detail

// Minibatch training on chunk labels. Each epoch keeps every positive
// training chunk and a fresh sample of negatives. The parameters of the
// epoch with the best validation F1 (ties: lower validation loss) are
// kept; without a validation split the training metrics decide.
template <class Scalar>
ScdTrainResult train_scd(ScdModel<Scalar>& model, const std::vector<Chunk<Scalar>>& chunks,
                         const ScdTrainConfig& config, std::ostream* progress = nullptr) {
  std::size_t positives = 0;
  for (const auto& c : chunks) positives += c.label ? 1 : 0;
  if (positives == 0 || positives == chunks.size()) {
    throw UsageError("train_scd: training chunks must contain both classes (" + std::to_string(positives) +
                     " positive of " + std::to_string(chunks.size()) + ")");
  }
  if (config.batch == 0) throw UsageError("train_scd: batch must be positive");
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw UsageError("train_scd: validation_fraction must be in [0, 1)");
  }
  for (const auto& c : chunks) detail::chunk_steps(c, model.input_dim(), model.masked);

  Rng rng(config.seed);
  std::vector<const Chunk<Scalar>*> train;
  std::vector<const Chunk<Scalar>*> validation;
  detail::stratified_split(chunks, config.validation_fraction, rng, train, validation);
  std::vector<const Chunk<Scalar>*> pos;
  std::vector<const Chunk<Scalar>*> neg;
  for (const auto* c : train) (c->label ? pos : neg).push_back(c);

  Adam<Scalar> adam;
  auto params = model.params.params();
  auto grads = model.params.zeros_like();
  auto grad_refs = grads.params();

  ScdTrainResult result;
  std::optional<ScdParams<Scalar>> best;
  std::pair<double, double> best_key{-1.0, 0.0};  // (F1, -loss)
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<const Chunk<Scalar>*> sample = pos;
    rng.shuffle(std::span<const Chunk<Scalar>*>(neg));
    std::size_t keep = neg.size();
    if (config.negative_ratio > 0.0) {
      keep = std::min(keep, static_cast<std::size_t>(std::ceil(config.negative_ratio * static_cast<double>(pos.size()))));
    }
    sample.insert(sample.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(keep));
    rng.shuffle(std::span<const Chunk<Scalar>*>(sample));

    std::vector<bool> labels;
    std::vector<double> probs;
    double loss_sum = 0.0;
    std::size_t in_batch = 0;
    auto apply = [&] {
      if (in_batch == 0) return;
      const auto inv = static_cast<Scalar>(1.0 / static_cast<double>(in_batch));
      for (auto* g : grad_refs) *g *= inv;
      if (config.optimizer == OptimizerKind::Adam) {
        adam.step(params, grad_refs, config.lr, config.clip);
      } else {
        sgd_step(params, grad_refs, config.lr, config.clip);
      }
      for (auto* g : grad_refs) g->setZero();
      in_batch = 0;
      ++step;
    };
    for (const auto* c : sample) {
      double z = 0.0;
      const double loss = scd_chunk_loss(model.params, *c, model.masked, &grads, &z);
      if (!std::isfinite(loss)) {
        throw NumericError("train_scd: non-finite loss (lr=" + std::to_string(config.lr) +
                           ", step=" + std::to_string(step) + ", chunk=" + c->conversation_id + ")");
      }
      loss_sum += loss;
      labels.push_back(c->label);
      probs.push_back(sigmoid_scalar(z));
      if (++in_batch == config.batch) apply();
    }
    apply();
    if (!all_finite(params)) {
      throw NumericError("train_scd: parameters became non-finite (lr=" + std::to_string(config.lr) +
                         ", step=" + std::to_string(step) + ")");
    }

    ScdEpochLog entry;
    entry.epoch = epoch;
    entry.train = detail::split_metrics(labels, probs, loss_sum, config.threshold);
    if (!validation.empty()) entry.validation = detail::evaluate_chunks(model, validation, config.threshold);
    const ScdSplitMetrics& judged = entry.validation ? *entry.validation : entry.train;
    const std::pair<double, double> key{judged.prf.f.value_or(0.0), -judged.loss};
    if (!best || key > best_key) {
      best = model.params;
      best_key = key;
      result.best_epoch = epoch;
    }
    if (progress) *progress << entry.line() << '\n';
    result.log.push_back(std::move(entry));
  }
  if (best) model.params = std::move(*best);
  return result;
}

}  // namespace sentinel
