#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentinel/core_math.hpp"
#include "sentinel/corpus_io.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

using TokenLines = std::vector<std::vector<std::string>>;

// Unigram and adjacent-bigram features ("a b"), bigrams never span lines.
class FeatureVocab {
 public:
  FeatureVocab() = default;

  // Features in the given order; duplicates throw FormatError.
  static FeatureVocab from_features(std::vector<std::string> names, std::size_t min_frequency = 1,
                                    bool bigrams = true);

  std::optional<std::size_t> find(const std::string& feature) const;
  const std::string& feature(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& features() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t min_frequency() const { return min_frequency_; }
  bool bigrams() const { return bigrams_; }

  bool operator==(const FeatureVocab& other) const {
    return names_ == other.names_ && min_frequency_ == other.min_frequency_ && bigrams_ == other.bigrams_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_frequency_ = 1;
  bool bigrams_ = true;
};

// Every feature occurrence in order: per line, its unigrams then its bigrams.
std::vector<std::string> extract_features(const TokenLines& lines, bool bigrams = true);

// Keeps features occurring at least min_frequency times over all units,
// ordered by descending count, then lexicographically.
FeatureVocab build_feature_vocab(const std::vector<TokenLines>& units, std::size_t min_frequency = 5,
                                 bool bigrams = true);

// In-vocabulary feature ids of every occurrence; tokens counts all tokens.
struct FeatureBag {
  std::vector<std::size_t> ids;
  std::size_t tokens = 0;
};

FeatureBag feature_bag(const TokenLines& lines, const FeatureVocab& vocab);

enum class AuthorClass { P = 0, V = 1, N = 2 };

inline constexpr std::size_t kAuthorClasses = 3;

char class_letter(AuthorClass c);
AuthorClass class_from_letter(char letter);
AuthorClass class_from_role(AuthorRole role);

struct SentimentScore {
  double p = 0.0;
  double v = 0.0;
  double n = 0.0;

  double operator[](AuthorClass c) const { return c == AuthorClass::P ? p : c == AuthorClass::V ? v : n; }
};

// Argmax; exact ties resolve towards N, then V, then P.
AuthorClass predicted_class(const SentimentScore& s);

// Arithmetic mean renormalized to sum 1.
SentimentScore average_author_scores(std::span<const SentimentScore> scores);

template <class Scalar>
struct ShallowParams {
  Tensor<Scalar> embedding;  // |F| x k
  Tensor<Scalar> class_w;    // k x 3, classes ordered P, V, N
  Tensor<Scalar> class_b;    // 1 x 3

  template <class Fn>
  void visit(Fn&& fn) {
    fn("embedding", embedding);
    fn("class_w", class_w);
    fn("class_b", class_b);
  }

  ParamRefs<Scalar> params() { return {&embedding, &class_w, &class_b}; }

  ShallowParams zeros_like() const {
    return {Tensor<Scalar>::Zero(embedding.rows(), embedding.cols()),
            Tensor<Scalar>::Zero(class_w.rows(), class_w.cols()), Tensor<Scalar>::Zero(1, 3)};
  }

  template <class Other>
  ShallowParams<Other> cast() const {
    return {embedding.template cast<Other>(), class_w.template cast<Other>(), class_b.template cast<Other>()};
  }
};

template <class Scalar>
struct ShallowModel {
  FeatureVocab vocab;
  ShallowParams<Scalar> params;

  std::size_t dim() const { return static_cast<std::size_t>(params.embedding.cols()); }

  static ShallowModel create(FeatureVocab vocab, std::size_t dim, Rng& rng) {
    if (dim == 0) throw UsageError("ShallowModel: embedding dimension must be positive");
    ShallowModel m;
    m.params.embedding.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
    init_uniform(m.params.embedding, dim, rng);
    m.params.class_w.resize(static_cast<Eigen::Index>(dim), 3);
    init_uniform(m.params.class_w, dim, rng);
    m.params.class_b = Tensor<Scalar>::Zero(1, 3);
    m.vocab = std::move(vocab);
    return m;
  }

  template <class Other>
  ShallowModel<Other> cast() const {
    return {vocab, params.template cast<Other>()};
  }
};

template <class Scalar>
RowVec<Scalar> mean_embedding(const ShallowParams<Scalar>& params, const std::vector<std::size_t>& ids) {
  RowVec<Scalar> h = RowVec<Scalar>::Zero(params.embedding.cols());
  if (ids.empty()) return h;
  for (std::size_t id : ids) h += params.embedding.row(static_cast<Eigen::Index>(id));
  return h / static_cast<Scalar>(ids.size());
}

// Mean embedding over in-vocabulary features; the zero vector if none are known.
template <class Scalar>
RowVec<Scalar> featurize(const ShallowModel<Scalar>& model, const TokenLines& lines) {
  const auto bag = feature_bag(lines, model.vocab);
  if (bag.tokens == 0) throw UsageError("featurize: no tokens");
  return mean_embedding(model.params, bag.ids);
}

template <class Scalar>
SentimentScore score(const ShallowParams<Scalar>& params, const RowVec<Scalar>& features) {
  const RowVec<Scalar> logits = affine(features, params.class_w, params.class_b);
  const RowVec<double> p = softmax(RowVec<double>(logits.template cast<double>()));
  return {p(0), p(1), p(2)};
}

template <class Scalar>
SentimentScore score(const ShallowModel<Scalar>& model, const RowVec<Scalar>& features) {
  return score(model.params, features);
}

// Cross-entropy of one unit with gradients. The embedding gradient is
// returned as d_hidden; each feature row receives d_hidden / |ids|.
template <class Scalar>
double author_unit_backward(const ShallowParams<Scalar>& params, const std::vector<std::size_t>& ids,
                            AuthorClass label, RowVec<Scalar>* d_hidden, ShallowParams<Scalar>* head_grads) {
  const RowVec<Scalar> h = mean_embedding(params, ids);
  const RowVec<Scalar> logits = affine(h, params.class_w, params.class_b);
  const auto target = static_cast<Eigen::Index>(label);
  const double loss = cross_entropy_from_logits(logits, target);
  if (d_hidden || head_grads) {
    RowVec<Scalar> d_logits = softmax(RowVec<double>(logits.template cast<double>())).template cast<Scalar>();
    d_logits(target) -= Scalar(1);
    if (head_grads) {
      head_grads->class_w.noalias() += h.transpose() * d_logits;
      head_grads->class_b += d_logits;
    }
    if (d_hidden) *d_hidden = d_logits * params.class_w.transpose();
  }
  return loss;
}

// Dense-gradient form, used for verification.
template <class Scalar>
double author_unit_loss(const ShallowParams<Scalar>& params, const std::vector<std::size_t>& ids,
                        AuthorClass label, ShallowParams<Scalar>* grads = nullptr) {
  if (!grads) return author_unit_backward<Scalar>(params, ids, label, nullptr, nullptr);
  RowVec<Scalar> dh;
  const double loss = author_unit_backward(params, ids, label, &dh, grads);
  if (!ids.empty()) {
    const RowVec<Scalar> share = dh / static_cast<Scalar>(ids.size());
    for (std::size_t id : ids) grads->embedding.row(static_cast<Eigen::Index>(id)) += share;
  }
  return loss;
}

// One author's lines within one conversation.
struct AuthorUnit {
  std::string author;
  std::string conversation_id;
  TokenLines lines;
  std::optional<AuthorClass> label;
};

struct AuthorTrainConfig {
  std::size_t epochs = 5;
  double lr = 0.1;
  double normal_ratio = 5.0;  // Normal units kept per P/V unit each epoch; <= 0 keeps all
  std::uint64_t seed = 0;
};

struct AuthorEpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t units = 0;

  std::string line() const;
};

// Per-unit SGD with sparse embedding updates. Each epoch keeps every P and V
// unit and a fresh sample of N units.
template <class Scalar>
std::vector<AuthorEpochLog> train_author(ShallowModel<Scalar>& model, const std::vector<AuthorUnit>& units,
                                         const AuthorTrainConfig& config, std::ostream* progress = nullptr) {
  std::array<std::vector<std::size_t>, kAuthorClasses> by_class;
  std::vector<FeatureBag> bags;
  bags.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    if (!u.label) throw UsageError("train_author: unit " + u.author + "/" + u.conversation_id + " has no label");
    bags.push_back(feature_bag(u.lines, model.vocab));
    if (bags.back().tokens == 0) {
      throw UsageError("train_author: unit " + u.author + "/" + u.conversation_id + " has no tokens");
    }
    by_class[static_cast<std::size_t>(*u.label)].push_back(i);
  }
  for (std::size_t c = 0; c < kAuthorClasses; ++c) {
    if (by_class[c].empty()) {
      throw UsageError(std::string("train_author: no training units of class ") +
                       class_letter(static_cast<AuthorClass>(c)));
    }
  }

  Rng rng(config.seed);
  auto& normal = by_class[static_cast<std::size_t>(AuthorClass::N)];
  const std::size_t signal = by_class[0].size() + by_class[1].size();
  auto head = model.params.zeros_like();
  head.embedding.resize(0, 0);
  const auto lr = static_cast<Scalar>(config.lr);
  std::vector<AuthorEpochLog> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> sample = by_class[0];
    sample.insert(sample.end(), by_class[1].begin(), by_class[1].end());
    rng.shuffle(std::span<std::size_t>(normal));
    std::size_t keep = normal.size();
    if (config.normal_ratio > 0.0) {
      keep = std::min(keep, static_cast<std::size_t>(std::ceil(config.normal_ratio * static_cast<double>(signal))));
    }
    sample.insert(sample.end(), normal.begin(), normal.begin() + static_cast<std::ptrdiff_t>(keep));
    rng.shuffle(std::span<std::size_t>(sample));

    AuthorEpochLog entry;
    entry.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t i : sample) {
      const auto& ids = bags[i].ids;
      const AuthorClass label = *units[i].label;
      head.class_w.setZero();
      head.class_b.setZero();
      RowVec<Scalar> dh;
      const double loss = author_unit_backward(model.params, ids, label, &dh, &head);
      if (!std::isfinite(loss)) {
        throw NumericError("train_author: non-finite loss (lr=" + std::to_string(config.lr) +
                           ", epoch=" + std::to_string(epoch) + ", unit=" + units[i].author + ")");
      }
      entry.loss += loss;
      const RowVec<Scalar> h = mean_embedding(model.params, ids);
      if (predicted_class(score(model.params, h)) == label) ++correct;
      if (!ids.empty()) {
        const RowVec<Scalar> step = dh * (lr / static_cast<Scalar>(ids.size()));
        for (std::size_t id : ids) model.params.embedding.row(static_cast<Eigen::Index>(id)) -= step;
      }
      model.params.class_w -= lr * head.class_w;
      model.params.class_b -= lr * head.class_b;
    }
    if (!all_finite(model.params.params())) {
      throw NumericError("train_author: parameters became non-finite (lr=" + std::to_string(config.lr) +
                         ", epoch=" + std::to_string(epoch) + ")");
    }
    entry.units = sample.size();
    entry.loss /= static_cast<double>(sample.size());
    entry.accuracy = static_cast<double>(correct) / static_cast<double>(sample.size());
    if (progress) *progress << entry.line() << '\n';
    log.push_back(entry);
  }
  return log;
}

struct AuthorVerdict {
  std::string author;
  SentimentScore score;
  AuthorClass predicted = AuthorClass::N;
  std::size_t conversations = 0;
};

// One verdict per author, in order of first appearance among the units.
// Units without tokens are skipped.
template <class Scalar>
std::vector<AuthorVerdict> score_authors(const ShallowModel<Scalar>& model, const std::vector<AuthorUnit>& units) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<SentimentScore>> per_author;
  for (const auto& u : units) {
    const auto bag = feature_bag(u.lines, model.vocab);
    if (bag.tokens == 0) continue;
    auto [it, inserted] = per_author.try_emplace(u.author);
    if (inserted) order.push_back(u.author);
    it->second.push_back(score(model.params, mean_embedding(model.params, bag.ids)));
  }
  std::vector<AuthorVerdict> out;
  out.reserve(order.size());
  for (const auto& a : order) {
    const auto& scores = per_author.at(a);
    AuthorVerdict v;
    v.author = a;
    v.score = average_author_scores(scores);
    v.predicted = predicted_class(v.score);
    v.conversations = scores.size();
    out.push_back(std::move(v));
  }
  return out;
}

// Units from filtered conversations: one per (author, conversation), with
// every message of that author tokenized. Labels come from the roles map
// when given.
std::vector<AuthorUnit> make_author_units(const std::vector<LabeledConversation>& conversations,
                                          const std::map<std::string, AuthorRole>* roles = nullptr);

struct Identification {
  std::set<std::string> predators;
  std::vector<std::string> anomalies;  // suspicious conversations with no scored participant
};

// For each suspicious conversation, the participant with the highest P
// score is flagged when their predicted class is P. A tie for the highest
// P score flags nobody.
Identification identify_predators(const std::set<std::string>& suspicious,
                                  const std::vector<AuthorVerdict>& verdicts,
                                  const std::vector<Conversation>& conversations);

// "author<TAB>p<TAB>v<TAB>n<TAB>class" lines.
void write_author_scores(std::ostream& out, const std::vector<AuthorVerdict>& verdicts);
std::vector<AuthorVerdict> parse_author_scores(std::istream& in);

}  // namespace sentinel
