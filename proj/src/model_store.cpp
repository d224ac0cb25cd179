#include "sentinel/model_store.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {
namespace {

constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kChecksumBytes = 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(bytes[at + i])} << (8 * i);
  return v;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in pieces
  constexpr std::size_t kPiece = 1u << 30;
  for (std::size_t at = 0; at < bytes.size(); at += kPiece) {
    const auto n = std::min(kPiece, bytes.size() - at);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + at), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::string escape(std::string_view s) {
  if (s.empty()) return "%";
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : s) {
    const auto b = static_cast<unsigned char>(ch);
    if (b < 0x21 || b > 0x7E || b == '%') {
      out.push_back('%');
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xF]);
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string unescape(std::string_view s) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out.push_back(s[i]);
      continue;
    }
    const bool room = i + 2 < s.size();
    const int hi = room ? hex_value(s[i + 1]) : -1;
    const int lo = room ? hex_value(s[i + 2]) : -1;
    if (hi < 0 || lo < 0) throw FormatError("container manifest: bad escape in '" + std::string(s) + "'");
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t at = 0;
  while (at <= line.size()) {
    const auto next = line.find(' ', at);
    const auto end = next == std::string_view::npos ? line.size() : next;
    out.push_back(line.substr(at, end - at));
    if (next == std::string_view::npos) break;
    at = next + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError(std::string("container manifest: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

struct TensorDecl {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

std::string bool_text(bool b) { return b ? "1" : "0"; }

template <class Params>
void add_tensors(Container& c, Params params) {
  params.visit([&](const std::string& name, Tensor<float>& t) { c.tensors.emplace_back(name, t); });
}

template <class Params>
void fill_tensors(const Container& c, Params& params) {
  std::size_t expected = 0;
  params.visit([&](const std::string& name, Tensor<float>& t) {
    const auto& src = c.tensor(name);
    if (src.rows() != t.rows() || src.cols() != t.cols()) {
      throw FormatError("container: tensor " + name + " is " + shape_string(src.rows(), src.cols()) +
                        ", expected " + shape_string(t.rows(), t.cols()));
    }
    t = src;
    ++expected;
  });
  if (expected != c.tensors.size()) {
    throw FormatError("container: " + std::to_string(c.tensors.size()) + " tensors for a " + c.kind +
                      " that has " + std::to_string(expected));
  }
}

void expect_kind(const Container& c, const std::string& kind) {
  if (c.kind != kind) throw FormatError("container: expected kind " + kind + ", found " + c.kind);
}

}  // namespace

const std::string& Container::get(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw FormatError("container: missing meta key " + key);
}

std::size_t Container::get_count(const std::string& key) const {
  return static_cast<std::size_t>(parse_u64(get(key), key.c_str()));
}

bool Container::get_flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "1") return true;
  if (v == "0") return false;
  throw FormatError("container: meta " + key + " must be 0 or 1, found '" + v + "'");
}

const std::vector<std::string>& Container::table(const std::string& name) const {
  for (const auto& [n, t] : strings) {
    if (n == name) return t;
  }
  throw FormatError("container: missing string table " + name);
}

const Tensor<float>& Container::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("container: missing tensor " + name);
}

std::string serialize_container(const Container& c) {
  std::string manifest = "kind " + escape(c.kind) + "\n";
  for (const auto& [k, v] : c.meta) manifest += "meta " + escape(k) + " " + escape(v) + "\n";
  for (const auto& [name, table] : c.strings) {
    manifest += "strings " + escape(name) + " " + std::to_string(table.size()) + "\n";
    for (const auto& s : table) manifest += escape(s) + "\n";
  }
  std::string payload;
  for (const auto& [name, t] : c.tensors) {
    manifest += "tensor " + escape(name) + " 2 " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + " f32\n";
    for (Eigen::Index i = 0; i < t.size(); ++i) put_u32(payload, std::bit_cast<std::uint32_t>(t.data()[i]));
  }
  if (manifest.size() > UINT32_MAX) throw UsageError("container: manifest exceeds 4 GiB");
  std::string out(kContainerMagic, sizeof kContainerMagic);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out += manifest;
  out += payload;
  put_u32(out, crc32_of(payload));
  return out;
}

Container parse_container(std::string_view bytes, std::uint64_t size_cap) {
  const std::string_view magic(kContainerMagic, sizeof kContainerMagic);
  if (bytes.substr(0, std::min(bytes.size(), magic.size())) != magic.substr(0, std::min(bytes.size(), magic.size()))) {
    throw FormatError("container: bad magic");
  }
  if (bytes.size() < kHeaderBytes + kChecksumBytes) {
    throw CorruptionError("container: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version > kContainerVersion) {
    throw VersionError("container: file version " + std::to_string(version) + " is newer than supported version " +
                       std::to_string(kContainerVersion));
  }
  if (version == 0) throw FormatError("container: invalid version 0");
  const std::uint64_t manifest_len = get_u32(bytes, 12);
  if (kHeaderBytes + manifest_len + kChecksumBytes > bytes.size()) {
    throw CorruptionError("container: truncated manifest (" + std::to_string(manifest_len) + " bytes declared)");
  }
  const std::string_view manifest = bytes.substr(kHeaderBytes, manifest_len);
  if (!manifest.empty() && manifest.back() != '\n') throw FormatError("container: manifest not newline-terminated");

  std::vector<std::string_view> lines;
  for (std::size_t at = 0; at < manifest.size();) {
    const auto nl = manifest.find('\n', at);
    lines.push_back(manifest.substr(at, nl - at));
    at = nl + 1;
  }

  Container c;
  std::vector<TensorDecl> decls;
  std::set<std::string> table_names;
  std::set<std::string> tensor_names;
  std::uint64_t payload_len = 0;
  bool have_kind = false;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    const auto where = " at manifest line " + std::to_string(li + 1);
    if (f[0] == "kind" && f.size() == 2 && !have_kind) {
      c.kind = unescape(f[1]);
      have_kind = true;
    } else if (f[0] == "meta" && f.size() == 3) {
      c.meta.emplace_back(unescape(f[1]), unescape(f[2]));
    } else if (f[0] == "strings" && f.size() == 3) {
      auto name = unescape(f[1]);
      const auto count = parse_u64(f[2], "string count");
      if (count > lines.size() - li - 1) throw CorruptionError("container: string table " + name + " runs past manifest");
      if (!table_names.insert(name).second) throw FormatError("container: duplicate string table " + name);
      std::vector<std::string> table;
      table.reserve(count);
      for (std::uint64_t k = 0; k < count; ++k) table.push_back(unescape(lines[++li]));
      c.strings.emplace_back(std::move(name), std::move(table));
    } else if (f[0] == "tensor" && f.size() == 6 && f[2] == "2" && f[5] == "f32") {
      TensorDecl d{unescape(f[1]), parse_u64(f[3], "rows"), parse_u64(f[4], "cols")};
      if (!tensor_names.insert(d.name).second) throw FormatError("container: duplicate tensor " + d.name);
      if (d.rows != 0 && d.cols > size_cap / 4 / d.rows) {
        throw FormatError("container: tensor " + d.name + " exceeds the size cap");
      }
      payload_len += d.rows * d.cols * 4;
      if (payload_len > size_cap) throw FormatError("container: payload exceeds the size cap");
      decls.push_back(std::move(d));
    } else {
      throw FormatError("container: unrecognized entry" + where);
    }
  }
  if (!have_kind) throw FormatError("container: manifest has no kind");

  const std::uint64_t expected = kHeaderBytes + manifest_len + payload_len + kChecksumBytes;
  if (bytes.size() < expected) {
    throw CorruptionError("container: truncated (" + std::to_string(bytes.size()) + " of " +
                          std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    throw CorruptionError("container: " + std::to_string(bytes.size() - expected) + " trailing bytes");
  }
  const std::string_view payload = bytes.substr(kHeaderBytes + manifest_len, payload_len);
  const std::uint32_t stored = get_u32(bytes, kHeaderBytes + manifest_len + payload_len);
  if (stored != crc32_of(payload)) throw CorruptionError("container: checksum mismatch");

  std::size_t at = 0;
  for (auto& d : decls) {
    Tensor<float> t(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i, at += 4) t.data()[i] = std::bit_cast<float>(get_u32(payload, at));
    c.tensors.emplace_back(std::move(d.name), std::move(t));
  }
  return c;
}

std::uint64_t save_container(const Container& c, const std::filesystem::path& path) {
  const std::string bytes = serialize_container(c);
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot write " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
  return bytes.size();
}

Container load_container(const std::filesystem::path& path, std::uint64_t size_cap) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot read " + path.string() + ": " + ec.message());
  if (size > size_cap + kHeaderBytes + kChecksumBytes + (std::uint64_t{UINT32_MAX})) {
    throw FormatError("container: " + path.string() + " exceeds the size cap");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes(size, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::uint64_t>(in.gcount()) != size) throw IoError("cannot read " + path.string());
  return parse_container(bytes, size_cap);
}

Container to_container(const Vocabulary& vocab) {
  Container c;
  c.kind = "vocabulary";
  c.set("min_term_frequency", std::to_string(vocab.min_term_frequency()));
  c.strings.emplace_back("tokens", vocab.tokens());
  return c;
}

Vocabulary vocabulary_from(const Container& c) {
  expect_kind(c, "vocabulary");
  return Vocabulary::from_tokens(c.table("tokens"), c.get_count("min_term_frequency"));
}

Container to_container(const LanguageModel<float>& model) {
  Container c;
  c.kind = "language_model";
  c.set("min_term_frequency", std::to_string(model.vocab.min_term_frequency()));
  c.set("embed_dim", std::to_string(model.embed_dim()));
  c.set("hidden_dim", std::to_string(model.hidden_dim()));
  c.set("has_bias", bool_text(model.params.lower.has_bias));
  c.strings.emplace_back("vocabulary", model.vocab.tokens());
  add_tensors(c, model.params);
  return c;
}

LanguageModel<float> language_model_from(const Container& c) {
  expect_kind(c, "language_model");
  auto vocab = Vocabulary::from_tokens(c.table("vocabulary"), c.get_count("min_term_frequency"));
  auto m = LanguageModel<float>::zeros(std::move(vocab),
                                       {c.get_count("embed_dim"), c.get_count("hidden_dim"), c.get_flag("has_bias")});
  fill_tensors(c, m.params);
  return m;
}

Container to_container(const ScdModel<float>& model) {
  Container c;
  c.kind = "scd";
  c.set("input_dim", std::to_string(model.input_dim()));
  c.set("hidden_dim", std::to_string(model.hidden_dim()));
  c.set("has_bias", bool_text(model.params.lower.has_bias));
  c.set("masked", bool_text(model.masked));
  add_tensors(c, model.params);
  return c;
}

ScdModel<float> scd_model_from(const Container& c) {
  expect_kind(c, "scd");
  const auto in = c.get_count("input_dim");
  const auto h = c.get_count("hidden_dim");
  const bool bias = c.get_flag("has_bias");
  ScdModel<float> m;
  m.masked = c.get_flag("masked");
  m.params = {LstmLayer<float>::zeros(in, h, bias), LstmLayer<float>::zeros(h, h, bias),
              Tensor<float>::Zero(static_cast<Eigen::Index>(h), 1), Tensor<float>::Zero(1, 1)};
  fill_tensors(c, m.params);
  return m;
}

Container to_container(const ShallowModel<float>& model) {
  Container c;
  c.kind = "author";
  c.set("min_frequency", std::to_string(model.vocab.min_frequency()));
  c.set("dim", std::to_string(model.dim()));
  c.set("bigrams", bool_text(model.vocab.bigrams()));
  c.strings.emplace_back("features", model.vocab.features());
  add_tensors(c, model.params);
  return c;
}

ShallowModel<float> author_model_from(const Container& c) {
  expect_kind(c, "author");
  ShallowModel<float> m;
  m.vocab = FeatureVocab::from_features(c.table("features"), c.get_count("min_frequency"), c.get_flag("bigrams"));
  const auto k = static_cast<Eigen::Index>(c.get_count("dim"));
  m.params = {Tensor<float>::Zero(static_cast<Eigen::Index>(m.vocab.size()), k), Tensor<float>::Zero(k, 3),
              Tensor<float>::Zero(1, 3)};
  fill_tensors(c, m.params);
  return m;
}

Container to_container(const std::vector<ConversationSequence<float>>& sequences) {
  Container c;
  c.kind = "vectors";
  const Eigen::Index dim = sequences.empty() ? 0 : sequences.front().vectors.front().size();
  std::vector<std::string> ids, labels, lengths;
  Eigen::Index rows = 0;
  for (const auto& s : sequences) rows += static_cast<Eigen::Index>(s.vectors.size());
  Tensor<float> all(rows, dim);
  Eigen::Index r = 0;
  for (const auto& s : sequences) {
    ids.push_back(s.id);
    labels.push_back(s.label ? (*s.label ? "1" : "0") : "-");
    lengths.push_back(std::to_string(s.vectors.size()));
    for (const auto& v : s.vectors) {
      if (v.size() != dim) throw ShapeError("vectors container: mixed vector sizes in " + s.id);
      all.row(r++) = v;
    }
  }
  c.set("dim", std::to_string(dim));
  c.strings.emplace_back("conversation_ids", std::move(ids));
  c.strings.emplace_back("labels", std::move(labels));
  c.strings.emplace_back("lengths", std::move(lengths));
  c.tensors.emplace_back("vectors", std::move(all));
  return c;
}

std::vector<ConversationSequence<float>> sequences_from(const Container& c) {
  expect_kind(c, "vectors");
  const auto& ids = c.table("conversation_ids");
  const auto& labels = c.table("labels");
  const auto& lengths = c.table("lengths");
  const auto& all = c.tensor("vectors");
  if (labels.size() != ids.size() || lengths.size() != ids.size()) {
    throw FormatError("vectors container: table sizes disagree");
  }
  if (static_cast<std::size_t>(all.cols()) != c.get_count("dim")) throw FormatError("vectors container: bad dim");
  std::vector<ConversationSequence<float>> out;
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ConversationSequence<float> s;
    s.id = ids[i];
    if (labels[i] == "1") {
      s.label = true;
    } else if (labels[i] == "0") {
      s.label = false;
    } else if (labels[i] != "-") {
      throw FormatError("vectors container: bad label '" + labels[i] + "'");
    }
    const auto n = static_cast<Eigen::Index>(parse_u64(lengths[i], "length"));
    if (n == 0 || r + n > all.rows()) throw FormatError("vectors container: lengths exceed stored rows");
    for (Eigen::Index k = 0; k < n; ++k) s.vectors.push_back(all.row(r++));
    out.push_back(std::move(s));
  }
  if (r != all.rows()) throw FormatError("vectors container: unused rows");
  return out;
}

}  // namespace sentinel
