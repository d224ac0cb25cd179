#include <doctest.h>

#include <cstring>

#include "fixtures.hpp"
#include "sentinel/model_store.hpp"

using namespace sentinel;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t reference_crc32(const std::string& bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

Vocabulary small_vocab() {
  std::vector<std::string> tokens(Vocabulary::reserved().begin(), Vocabulary::reserved().end());
  for (const char* t : {"hello", "world", "odd token", "100%"}) tokens.emplace_back(t);
  return Vocabulary::from_tokens(tokens, 2);
}

template <class Params>
void expect_bit_equal(Params a, Params b) {
  std::vector<Tensor<float>> left;
  a.visit([&](const std::string&, Tensor<float>& t) { left.push_back(t); });
  std::size_t i = 0;
  b.visit([&](const std::string& name, Tensor<float>& t) {
    CAPTURE(name);
    REQUIRE(t.rows() == left[i].rows());
    REQUIRE(t.cols() == left[i].cols());
    CHECK(std::memcmp(t.data(), left[i].data(), sizeof(float) * static_cast<std::size_t>(t.size())) == 0);
    ++i;
  });
  CHECK(i == left.size());
}

}  // namespace

TEST_CASE("container bytes are laid out exactly") {
  Container c;
  c.kind = "demo";
  c.set("note", "a b");
  c.strings.push_back({"t", {"x", ""}});
  Tensor<float> t(1, 2);
  t << 1.0f, -2.5f;
  c.tensors.emplace_back("w", t);

  const std::string manifest = "kind demo\nmeta note a%20b\nstrings t 2\nx\n%\ntensor w 2 1 2 f32\n";
  // 1.0f = 0x3F800000, -2.5f = 0xC0200000
  const std::string payload = le32(0x3F800000u) + le32(0xC0200000u);
  const std::string expected = std::string("SNTLMODL") + le32(1) + le32(static_cast<std::uint32_t>(manifest.size())) +
                               manifest + payload + le32(reference_crc32(payload));
  CHECK(serialize_container(c) == expected);

  auto back = parse_container(expected);
  CHECK(back.kind == "demo");
  CHECK(back.get("note") == "a b");
  CHECK(back.table("t") == std::vector<std::string>{"x", ""});
  CHECK(back.tensor("w") == t);
}

TEST_CASE("crc matches the reference implementation") {
  CHECK(reference_crc32("123456789") == 0xCBF43926u);
  Container c;
  c.kind = "k";
  Tensor<float> t(3, 3);
  for (int i = 0; i < 9; ++i) t.data()[i] = static_cast<float>(i) * 0.37f - 1.0f;
  c.tensors.emplace_back("m", t);
  const auto bytes = serialize_container(c);
  std::string payload;
  for (int i = 0; i < 9; ++i) {
    std::uint32_t u;
    std::memcpy(&u, &t.data()[i], 4);
    payload += le32(u);
  }
  CHECK(bytes.substr(bytes.size() - 4) == le32(reference_crc32(payload)));
}

TEST_CASE("model round trips are bit identical") {
  const auto dir = fixtures::scratch_dir("model_store");
  Rng rng(1);

  SUBCASE("vocabulary") {
    auto v = small_vocab();
    save_model(v, dir / "v.bin");
    CHECK(load_vocabulary(dir / "v.bin") == v);
  }
  SUBCASE("language model and size arithmetic") {
    auto m = LanguageModel<float>::create(small_vocab(), {3, 4, true}, rng);
    const auto bytes = save_model(m, dir / "lm.bin");
    CHECK(bytes == std::filesystem::file_size(dir / "lm.bin"));
    const auto raw = fixtures::read_file(dir / "lm.bin");
    const std::uint64_t manifest = static_cast<unsigned char>(raw[12]) | static_cast<unsigned char>(raw[13]) << 8 |
                                   static_cast<unsigned char>(raw[14]) << 16 |
                                   static_cast<std::uint64_t>(static_cast<unsigned char>(raw[15])) << 24;
    // |V|=10, d=3, H=4: embedding 30, lower 4*(12+16+4), upper 4*(16+16+4), output 40 + 10
    const std::uint64_t floats = 30 + 4 * (12 + 16 + 4) + 4 * (16 + 16 + 4) + 40 + 10;
    CHECK(bytes == 16 + manifest + floats * 4 + 4);
    auto back = load_language_model(dir / "lm.bin");
    CHECK(back.vocab == m.vocab);
    CHECK(back.embed_dim() == 3);
    expect_bit_equal(m.params, back.params);
  }
  SUBCASE("language model without bias") {
    auto m = LanguageModel<float>::create(small_vocab(), {3, 4, false}, rng);
    save_model(m, dir / "lm.bin");
    auto back = load_language_model(dir / "lm.bin");
    CHECK_FALSE(back.params.lower.has_bias);
    expect_bit_equal(m.params, back.params);
  }
  SUBCASE("scd model") {
    auto m = ScdModel<float>::create({5, 3, true, false}, rng);
    save_model(m, dir / "scd.bin");
    auto back = load_scd_model(dir / "scd.bin");
    CHECK_FALSE(back.masked);
    CHECK(back.input_dim() == 5);
    expect_bit_equal(m.params, back.params);
  }
  SUBCASE("author model") {
    auto m = ShallowModel<float>::create(FeatureVocab::from_features({"a", "a b", "b"}, 5), 4, rng);
    save_model(m, dir / "author.bin");
    auto back = load_author_model(dir / "author.bin");
    CHECK(back.vocab == m.vocab);
    expect_bit_equal(m.params, back.params);
  }
  SUBCASE("sentence vector sequences") {
    std::vector<ConversationSequence<float>> seqs;
    for (int i = 0; i < 3; ++i) {
      ConversationSequence<float> s{"conv" + std::to_string(i), {}, {}};
      if (i == 0) s.label = true;
      if (i == 1) s.label = false;
      for (int k = 0; k <= i; ++k) s.vectors.push_back(RowVec<float>::Constant(2, static_cast<float>(i * 10 + k)));
      seqs.push_back(s);
    }
    save_model(seqs, dir / "vec.bin");
    auto back = load_sequences(dir / "vec.bin");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].id == seqs[i].id);
      CHECK(back[i].label == seqs[i].label);
      CHECK(back[i].vectors == seqs[i].vectors);
    }
  }
  CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 1);  // no temporary files left
}

TEST_CASE("load rejects damaged containers") {
  const auto dir = fixtures::scratch_dir("model_store_bad");
  Rng rng(2);
  auto m = ScdModel<float>::create({3, 2, true, true}, rng);
  const auto path = dir / "m.bin";
  save_model(m, path);
  const auto good = fixtures::read_file(path);

  SUBCASE("truncated") {
    for (std::size_t cut : {good.size() - 1, good.size() / 2, std::size_t{12}}) {
      fixtures::write_file(path, good.substr(0, cut));
      CHECK_THROWS_AS(load_scd_model(path), CorruptionError);
    }
  }
  SUBCASE("flipped payload bit") {
    auto bad = good;
    bad[bad.size() - 10] ^= 0x01;
    fixtures::write_file(path, bad);
    CHECK_THROWS_AS(load_scd_model(path), CorruptionError);
  }
  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] = 'X';
    fixtures::write_file(path, bad);
    CHECK_THROWS_AS(load_scd_model(path), FormatError);
  }
  SUBCASE("newer version") {
    auto bad = good;
    bad[8] = 2;
    fixtures::write_file(path, bad);
    try {
      load_scd_model(path);
      FAIL("expected VersionError");
    } catch (const VersionError& e) {
      const std::string what = e.what();
      CHECK(what.find("version 2") != std::string::npos);
      CHECK(what.find("version 1") != std::string::npos);
    }
  }
  SUBCASE("wrong kind") {
    save_model(small_vocab(), path);
    CHECK_THROWS_AS(load_scd_model(path), FormatError);
  }
  SUBCASE("oversized declarations are rejected before allocation") {
    const std::string manifest = "kind scd\ntensor huge 2 4294967295 4294967295 f32\n";
    const std::string bytes = std::string("SNTLMODL") + le32(1) + le32(static_cast<std::uint32_t>(manifest.size())) +
                              manifest + le32(0);
    CHECK_THROWS_AS(parse_container(bytes), FormatError);
    const std::string small = "kind scd\ntensor t 2 1000 1000 f32\n";
    const std::string b2 = std::string("SNTLMODL") + le32(1) + le32(static_cast<std::uint32_t>(small.size())) + small + le32(0);
    CHECK_THROWS_AS(parse_container(b2, 1 << 20), FormatError);
    CHECK_THROWS_AS(parse_container(b2), CorruptionError);
  }
  SUBCASE("missing file and unwritable destination") {
    CHECK_THROWS_AS(load_scd_model(dir / "absent.bin"), IoError);
    CHECK_THROWS_AS(save_model(m, dir / "no_such_dir" / "m.bin"), IoError);
    CHECK_THROWS_AS(save_model(m, std::filesystem::path("/proc/sentinel_model.bin")), IoError);
  }
}
