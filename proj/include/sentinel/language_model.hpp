#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sentinel/core_math.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/preprocessing.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

// embedding -> LSTM -> LSTM -> softmax over the vocabulary.
template <class Scalar>
struct LanguageModelParams {
  Tensor<Scalar> embedding;       // |V| x d
  LstmLayer<Scalar> lower;        // d -> H
  LstmLayer<Scalar> upper;        // H -> H
  Tensor<Scalar> output_weights;  // H x |V|
  Tensor<Scalar> output_bias;     // 1 x |V|

  template <class Fn>
  void visit(Fn&& fn) {
    fn("embedding", embedding);
    lower.visit("lower.", fn);
    upper.visit("upper.", fn);
    fn("output_weights", output_weights);
    fn("output_bias", output_bias);
  }

  ParamRefs<Scalar> params() {
    ParamRefs<Scalar> out;
    visit([&](const std::string&, Tensor<Scalar>& t) { out.push_back(&t); });
    return out;
  }

  LanguageModelParams zeros_like() const {
    return {Tensor<Scalar>::Zero(embedding.rows(), embedding.cols()), lower.zeros_like(), upper.zeros_like(),
            Tensor<Scalar>::Zero(output_weights.rows(), output_weights.cols()),
            Tensor<Scalar>::Zero(output_bias.rows(), output_bias.cols())};
  }

  template <class Other>
  LanguageModelParams<Other> cast() const {
    return {embedding.template cast<Other>(), lower.template cast<Other>(), upper.template cast<Other>(),
            output_weights.template cast<Other>(), output_bias.template cast<Other>()};
  }
};

struct LmShape {
  std::size_t embed_dim = 200;
  std::size_t hidden_dim = 200;
  bool has_bias = true;
};

template <class Scalar>
struct LanguageModel {
  Vocabulary vocab;
  LanguageModelParams<Scalar> params;

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(params.embedding.cols()); }
  std::size_t hidden_dim() const { return params.upper.hidden_dim; }

  // Embedding uniform in +-1/sqrt(d), LSTM layers per LstmLayer::random,
  // output weights uniform in +-1/sqrt(H), output bias zero.
  static LanguageModel create(Vocabulary vocab, const LmShape& shape, Rng& rng) {
    LanguageModel m = zeros(std::move(vocab), shape);
    init_uniform(m.params.embedding, shape.embed_dim, rng);
    m.params.lower = LstmLayer<Scalar>::random(shape.embed_dim, shape.hidden_dim, shape.has_bias, rng);
    m.params.upper = LstmLayer<Scalar>::random(shape.hidden_dim, shape.hidden_dim, shape.has_bias, rng);
    init_uniform(m.params.output_weights, shape.hidden_dim, rng);
    return m;
  }

  static LanguageModel zeros(Vocabulary vocab, const LmShape& shape) {
    const auto v = static_cast<Eigen::Index>(vocab.size());
    const auto d = static_cast<Eigen::Index>(shape.embed_dim);
    const auto h = static_cast<Eigen::Index>(shape.hidden_dim);
    LanguageModel m{std::move(vocab), {}};
    m.params.embedding = Tensor<Scalar>::Zero(v, d);
    m.params.lower = LstmLayer<Scalar>::zeros(shape.embed_dim, shape.hidden_dim, shape.has_bias);
    m.params.upper = LstmLayer<Scalar>::zeros(shape.hidden_dim, shape.hidden_dim, shape.has_bias);
    m.params.output_weights = Tensor<Scalar>::Zero(h, v);
    m.params.output_bias = Tensor<Scalar>::Zero(1, v);
    return m;
  }

  template <class Other>
  LanguageModel<Other> cast() const {
    return {vocab, params.template cast<Other>()};
  }
};

template <class Scalar>
struct LmStates {
  LstmState<Scalar> lower;
  LstmState<Scalar> upper;

  static LmStates zeros(std::size_t hidden) {
    return {LstmState<Scalar>::zeros(hidden), LstmState<Scalar>::zeros(hidden)};
  }
};

template <class Scalar>
struct LmForwardResult {
  std::vector<RowVec<Scalar>> probabilities;  // step t: distribution of token t+1
  LmStates<Scalar> final_states;
};

template <class Scalar>
struct SentenceVector {
  RowVec<Scalar> values;
  std::size_t source_len = 0;
};

namespace detail {

inline void check_indices(std::span<const TokenId> ids, std::size_t vocab_size) {
  for (TokenId id : ids) {
    if (id >= vocab_size) {
      throw UsageError("token index " + std::to_string(id) + " out of range for vocabulary of " +
                       std::to_string(vocab_size));
    }
  }
}

template <class Scalar>
struct LmWindowPass {
  LstmTrace<Scalar> lower;
  LstmTrace<Scalar> upper;
  Tensor<Scalar> logits;  // T x |V|
};

template <class Scalar>
LmWindowPass<Scalar> lm_window_forward(const LanguageModelParams<Scalar>& p, std::span<const TokenId> inputs,
                                       const LmStates<Scalar>& init) {
  std::vector<RowVec<Scalar>> xs;
  xs.reserve(inputs.size());
  for (TokenId id : inputs) xs.push_back(p.embedding.row(id));
  LmWindowPass<Scalar> pass;
  pass.lower = sequence_forward(xs, init.lower, p.lower);
  pass.upper = sequence_forward(pass.lower.hidden_states(), init.upper, p.upper);
  Tensor<Scalar> top(static_cast<Eigen::Index>(inputs.size()), p.output_weights.rows());
  for (std::size_t t = 0; t < inputs.size(); ++t) top.row(static_cast<Eigen::Index>(t)) = pass.upper.steps[t].s;
  pass.logits = top * p.output_weights;
  pass.logits.rowwise() += p.output_bias.row(0);
  return pass;
}

}  // namespace detail

// Summed next-token cross-entropy over one window. `state` carries in and
// out; gradients of the summed loss are accumulated into `grads` if given.
template <class Scalar>
double lm_window_loss(const LanguageModelParams<Scalar>& p, std::span<const TokenId> inputs,
                      std::span<const TokenId> targets, LmStates<Scalar>& state,
                      LanguageModelParams<Scalar>* grads = nullptr) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw UsageError("lm_window_loss: need equal, non-empty input and target windows");
  }
  auto pass = detail::lm_window_forward(p, inputs, state);
  const auto steps = static_cast<Eigen::Index>(inputs.size());
  double loss = 0.0;
  Tensor<Scalar> d_logits(steps, pass.logits.cols());
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto target = targets[static_cast<std::size_t>(t)];
    loss += cross_entropy_from_logits(pass.logits.row(t), target);
    if (grads) {
      d_logits.row(t) = softmax(pass.logits.row(t));
      d_logits(t, target) -= Scalar(1);
    }
  }
  state = {pass.lower.final_state(), pass.upper.final_state()};
  if (!grads) return loss;

  Tensor<Scalar> top(steps, p.output_weights.rows());
  for (Eigen::Index t = 0; t < steps; ++t) top.row(t) = pass.upper.steps[static_cast<std::size_t>(t)].s;
  grads->output_weights.noalias() += top.transpose() * d_logits;
  grads->output_bias += d_logits.colwise().sum();
  const Tensor<Scalar> d_top = d_logits * p.output_weights.transpose();

  std::vector<RowVec<Scalar>> d_upper(inputs.size());
  for (Eigen::Index t = 0; t < steps; ++t) d_upper[static_cast<std::size_t>(t)] = d_top.row(t);
  const auto d_lower = sequence_backward(pass.upper, p.upper, d_upper, grads->upper);
  const auto d_embed = sequence_backward(pass.lower, p.lower, d_lower, grads->lower);
  for (std::size_t t = 0; t < inputs.size(); ++t) grads->embedding.row(inputs[t]) += d_embed[t];
  return loss;
}

// Step t emits the softmax distribution over the token following inputs[t].
template <class Scalar>
LmForwardResult<Scalar> lm_forward(std::span<const TokenId> indices, const LanguageModel<Scalar>& model,
                                   std::optional<LmStates<Scalar>> init = std::nullopt) {
  if (indices.empty()) throw UsageError("lm_forward: empty input");
  detail::check_indices(indices, model.vocab_size());
  const auto start = init.value_or(LmStates<Scalar>::zeros(model.hidden_dim()));
  auto pass = detail::lm_window_forward(model.params, indices, start);
  LmForwardResult<Scalar> out;
  for (Eigen::Index t = 0; t < pass.logits.rows(); ++t) out.probabilities.push_back(softmax(pass.logits.row(t)));
  out.final_states = {pass.lower.final_state(), pass.upper.final_state()};
  return out;
}

// Top-layer hidden state after the last token, from a zero initial state.
template <class Scalar>
SentenceVector<Scalar> sentence_vector(const LanguageModel<Scalar>& model, std::span<const TokenId> indices) {
  if (indices.empty()) throw UsageError("sentence_vector: empty input");
  detail::check_indices(indices, model.vocab_size());
  const auto& p = model.params;
  auto lower = LstmState<Scalar>::zeros(model.hidden_dim());
  auto upper = LstmState<Scalar>::zeros(model.hidden_dim());
  for (TokenId id : indices) {
    lower = cell_step(p.embedding.row(id), lower, p.lower);
    upper = cell_step(lower.s, upper, p.upper);
  }
  return {upper.s, indices.size()};
}

// exp(mean next-token cross-entropy); each document is unrolled from a zero
// state, so a document of n tokens contributes n - 1 predictions.
template <class Scalar>
double perplexity(const LanguageModel<Scalar>& model, const std::vector<std::vector<TokenId>>& corpus,
                  std::size_t window = 50) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& doc : corpus) {
    if (doc.size() < 2) continue;
    detail::check_indices(doc, model.vocab_size());
    auto state = LmStates<Scalar>::zeros(model.hidden_dim());
    const std::span<const TokenId> ids(doc);
    for (std::size_t begin = 0; begin + 1 < doc.size(); begin += window) {
      const std::size_t len = std::min(window, doc.size() - 1 - begin);
      total += lm_window_loss(model.params, ids.subspan(begin, len), ids.subspan(begin + 1, len), state);
      count += len;
    }
  }
  if (count == 0) throw UsageError("perplexity: corpus has no next-token predictions");
  return std::exp(total / static_cast<double>(count));
}

enum class OptimizerKind { Sgd, Adam };

struct LmTrainConfig {
  std::size_t window = 35;
  std::size_t epochs = 5;
  std::size_t batch = 8;  // windows per parameter update
  double lr = 1.0;
  double clip = 5.0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  std::uint64_t seed = 0;
};

struct LmEpochLog {
  std::size_t epoch = 0;
  double train_ppl = 0.0;
  std::optional<double> val_ppl;

  std::string line() const {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << "epoch=" << epoch << " train_ppl=" << train_ppl << " val_ppl=";
    if (val_ppl) {
      out << *val_ppl;
    } else {
      out << "-";
    }
    return out.str();
  }
};

// Truncated BPTT over fixed windows: the state carries from one window to
// the next inside a document and resets between documents. Documents are
// visited in a seeded shuffled order each epoch. The reported training
// perplexity is the running mean over the epoch.
template <class Scalar>
std::vector<LmEpochLog> train_lm(LanguageModel<Scalar>& model, const std::vector<std::vector<TokenId>>& corpus,
                                 const LmTrainConfig& config,
                                 const std::vector<std::vector<TokenId>>* validation = nullptr,
                                 std::ostream* progress = nullptr) {
  if (corpus.empty()) throw UsageError("train_lm: empty corpus");
  if (config.window == 0 || config.batch == 0) throw UsageError("train_lm: window and batch must be positive");
  for (const auto& doc : corpus) detail::check_indices(doc, model.vocab_size());

  Rng rng(config.seed);
  Adam<Scalar> adam;
  auto params = model.params.params();
  auto grads = model.params.zeros_like();
  auto grad_refs = grads.params();
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<LmEpochLog> log;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    std::size_t batch_windows = 0;
    std::size_t batch_tokens = 0;

    auto apply = [&] {
      if (batch_tokens == 0) return;
      const auto inv = static_cast<Scalar>(1.0 / static_cast<double>(batch_tokens));
      for (auto* g : grad_refs) *g *= inv;
      if (config.optimizer == OptimizerKind::Adam) {
        adam.step(params, grad_refs, config.lr, config.clip);
      } else {
        sgd_step(params, grad_refs, config.lr, config.clip);
      }
      for (auto* g : grad_refs) g->setZero();
      batch_windows = 0;
      batch_tokens = 0;
      ++step;
    };

    for (std::size_t di : order) {
      const auto& doc = corpus[di];
      if (doc.size() < 2) continue;
      const std::span<const TokenId> ids(doc);
      auto state = LmStates<Scalar>::zeros(model.hidden_dim());
      for (std::size_t begin = 0; begin + 1 < doc.size(); begin += config.window) {
        const std::size_t len = std::min(config.window, doc.size() - 1 - begin);
        const double loss = lm_window_loss(model.params, ids.subspan(begin, len), ids.subspan(begin + 1, len),
                                           state, &grads);
        if (!std::isfinite(loss)) {
          throw NumericError("train_lm: non-finite loss (lr=" + std::to_string(config.lr) +
                             ", step=" + std::to_string(step) + ", window=" + std::to_string(config.window) + ")");
        }
        epoch_loss += loss;
        epoch_tokens += len;
        batch_tokens += len;
        if (++batch_windows == config.batch) apply();
      }
    }
    apply();
    if (!all_finite(params)) {
      throw NumericError("train_lm: parameters became non-finite (lr=" + std::to_string(config.lr) +
                         ", step=" + std::to_string(step) + ", window=" + std::to_string(config.window) + ")");
    }

    LmEpochLog entry;
    entry.epoch = epoch;
    entry.train_ppl = epoch_tokens ? std::exp(epoch_loss / static_cast<double>(epoch_tokens)) : 1.0;
    if (validation && !validation->empty()) entry.val_ppl = perplexity(model, *validation, config.window);
    if (progress) *progress << entry.line() << '\n';
    log.push_back(entry);
  }
  return log;
}

}  // namespace sentinel
