#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sentinel/scd_classifier.hpp"

using namespace sentinel;

namespace {

ConversationSequence<double> ramp_sequence(const std::string& id, std::size_t n, std::size_t dim, bool label) {
  ConversationSequence<double> seq{id, {}, label};
  for (std::size_t i = 0; i < n; ++i) {
    RowVec<double> v(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) v(static_cast<Eigen::Index>(j)) = 0.01 * static_cast<double>(i + 1) + static_cast<double>(j);
    seq.vectors.push_back(v);
  }
  return seq;
}

Chunk<double> random_chunk(Rng& rng, std::size_t len, std::size_t valid, std::size_t dim, bool label) {
  Chunk<double> c{"c", 0, Tensor<double>::Zero(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(dim)), valid, label};
  for (std::size_t r = 0; r < valid; ++r)
    for (std::size_t j = 0; j < dim; ++j) c.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rng.uniform(-1.0, 1.0);
  return c;
}

// Positive conversations carry a fixed pattern in every valid row.
std::vector<Chunk<double>> separable_chunks(Rng& rng, std::size_t count, std::size_t len, std::size_t dim) {
  std::vector<Chunk<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const bool positive = i % 4 == 0;
    const std::size_t valid = 1 + rng.below(len);
    auto c = random_chunk(rng, len, valid, dim, positive);
    for (std::size_t r = 0; r < valid; ++r) {
      c.matrix.row(static_cast<Eigen::Index>(r)) *= 0.3;
      if (positive) c.matrix(static_cast<Eigen::Index>(r), 0) += 1.5;
    }
    c.conversation_id = "conv" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST_CASE("chunk_and_pad splits and pads") {
  SUBCASE("short conversation") {
    auto chunks = chunk_and_pad(ramp_sequence("a", 5, 3, true));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].valid_len == 5);
    CHECK(chunks[0].matrix.rows() == 100);
    CHECK(chunks[0].matrix.bottomRows(95).isZero(0.0));
    CHECK(chunks[0].label);
  }
  SUBCASE("exact fit") {
    auto chunks = chunk_and_pad(ramp_sequence("a", 100, 3, false));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].valid_len == 100);
    CHECK_FALSE(chunks[0].label);
  }
  SUBCASE("long conversation reconstructs exactly") {
    auto seq = ramp_sequence("a", 250, 3, true);
    auto chunks = chunk_and_pad(seq);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].valid_len == 100);
    CHECK(chunks[1].valid_len == 100);
    CHECK(chunks[2].valid_len == 50);
    std::vector<RowVec<double>> rebuilt;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      CHECK(chunks[k].part == k);
      CHECK(chunks[k].conversation_id == "a");
      CHECK(chunks[k].matrix.bottomRows(100 - static_cast<Eigen::Index>(chunks[k].valid_len)).isZero(0.0));
      for (std::size_t r = 0; r < chunks[k].valid_len; ++r) rebuilt.push_back(chunks[k].matrix.row(static_cast<Eigen::Index>(r)));
    }
    REQUIRE(rebuilt.size() == seq.vectors.size());
    for (std::size_t i = 0; i < rebuilt.size(); ++i) CHECK(rebuilt[i] == seq.vectors[i]);
  }
  CHECK_THROWS_AS(chunk_and_pad(ramp_sequence("a", 5, 3, true), 0), UsageError);
}

TEST_CASE("vectorize_conversation gives one vector per message") {
  std::vector<std::string> tokens(Vocabulary::reserved().begin(), Vocabulary::reserved().end());
  for (int i = 0; i < 4; ++i) tokens.push_back("w" + std::to_string(i));
  Rng rng(3);
  auto lm = LanguageModel<double>::create(Vocabulary::from_tokens(tokens, 1), {4, 5, true}, rng);
  const std::vector<std::vector<TokenId>> messages = {{6, 7, 2}, {8, 2}, {6, 7, 2}};
  auto seq = vectorize_conversation("x", messages, lm, true);
  REQUIRE(seq);
  REQUIRE(seq->vectors.size() == 3);
  CHECK(seq->vectors[0] == seq->vectors[2]);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    CHECK(seq->vectors[i] == sentence_vector(lm, std::span<const TokenId>(messages[i])).values);
  }
  CHECK_FALSE(vectorize_conversation("y", {{}, {}}, lm).has_value());
}

TEST_CASE("predictions and verdicts") {
  Rng rng(5);
  auto model = ScdModel<double>::create({3, 4, true, true}, rng);
  model.params.head_w.setZero();
  auto chunk = random_chunk(rng, 6, 4, 3, false);
  CHECK(chunk_probability(model, chunk) == 0.5);

  auto agg = aggregate_chunks({0.9, 0.2}, 0.5);
  CHECK(agg.verdict);
  CHECK(agg.max_probability == 0.9);
  CHECK_FALSE(aggregate_chunks({0.9, 0.2}, 0.95).verdict);

  // verdict is monotone in the threshold
  model = ScdModel<double>::create({3, 4, true, true}, rng);
  std::vector<Chunk<double>> chunks = {random_chunk(rng, 6, 6, 3, false), random_chunk(rng, 6, 2, 3, false)};
  bool was_positive = true;
  for (double t = 0.0; t <= 1.0; t += 0.01) {
    auto p = predict_scd(model, chunks, t);
    for (double q : p.probabilities) CHECK((q > 0.0 && q < 1.0));
    if (!was_positive) CHECK_FALSE(p.verdict);
    was_positive = p.verdict;
  }
  CHECK_THROWS_AS(predict_scd(model, {}, 0.5), UsageError);
}

TEST_CASE("masked mode ignores padding") {
  Rng rng(6);
  auto masked = ScdModel<double>::create({3, 4, true, true}, rng);
  auto seq = ramp_sequence("a", 7, 3, true);
  const double padded = chunk_probability(masked, chunk_and_pad(seq, 100)[0]);
  const double exact = chunk_probability(masked, chunk_and_pad(seq, 7)[0]);
  CHECK(padded == exact);
  auto unmasked = masked;
  unmasked.masked = false;
  CHECK(chunk_probability(unmasked, chunk_and_pad(seq, 7)[0]) == exact);
  CHECK(chunk_probability(unmasked, chunk_and_pad(seq, 100)[0]) != exact);
}

TEST_CASE("scd gradients match finite differences") {
  for (bool bias : {true, false}) for (bool masked : {true, false}) for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CAPTURE(bias);
    CAPTURE(masked);
    CAPTURE(seed);
    Rng rng(seed);
    auto model = ScdModel<double>::create({3, 4, bias, masked}, rng);
    const auto chunk = random_chunk(rng, 6, 4, 3, seed % 2 == 0);
    auto grads = model.params.zeros_like();
    scd_chunk_loss(model.params, chunk, masked, &grads);
    auto loss = [&] { return scd_chunk_loss(model.params, chunk, masked); };
    CHECK(gradient_check(loss, model.params.params(), grads.params(), 3e-4) < 1e-4);
  }
}

TEST_CASE("training with zero epochs returns the initial model") {
  Rng rng(7);
  auto chunks = separable_chunks(rng, 12, 6, 3);
  auto model = ScdModel<double>::create({3, 4, true, true}, rng);
  const auto before = model.params.head_w;
  ScdTrainConfig cfg;
  cfg.epochs = 0;
  auto result = train_scd(model, chunks, cfg);
  CHECK(result.log.empty());
  CHECK(result.best_epoch == 0);
  CHECK(model.params.head_w == before);
}

TEST_CASE("single-class training data is rejected") {
  Rng rng(8);
  std::vector<Chunk<double>> chunks = {random_chunk(rng, 6, 3, 3, false), random_chunk(rng, 6, 3, 3, false)};
  auto model = ScdModel<double>::create({3, 4, true, true}, rng);
  CHECK_THROWS_AS(train_scd(model, chunks, ScdTrainConfig{}), UsageError);
}

TEST_CASE("separable chunks are learned") {
  Rng rng(9);
  auto chunks = separable_chunks(rng, 160, 6, 3);
  auto model = ScdModel<double>::create({3, 8, true, true}, rng);
  ScdTrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch = 4;
  cfg.lr = 0.5;
  cfg.seed = 11;
  std::ostringstream progress;
  auto result = train_scd(model, chunks, cfg, &progress);
  REQUIRE(result.log.size() == 30);
  CHECK(progress.str().rfind("epoch=1 train_loss=", 0) == 0);

  std::vector<bool> truth;
  std::vector<bool> predicted;
  for (const auto& c : chunks) {
    truth.push_back(c.label);
    predicted.push_back(chunk_probability(model, c) >= 0.5);
  }
  const auto f1 = precision_recall_f(confusion(predicted, truth), 1.0).f;
  REQUIRE(f1);
  CHECK(*f1 >= 0.99);

  // the kept parameters come from the epoch with the best validation F1
  REQUIRE(result.best_epoch >= 1);
  const auto& best = result.log[result.best_epoch - 1];
  REQUIRE(best.validation);
  for (const auto& e : result.log) CHECK(e.validation->prf.f.value_or(0.0) <= best.validation->prf.f.value_or(0.0));
}
