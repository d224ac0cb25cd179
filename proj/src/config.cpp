#include "sentinel/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include "sentinel/errors.hpp"

namespace sentinel {
namespace {

// size_t and uint64_t may be the same type, so the seed gets its own slot kind.
struct SeedSlot {
  std::uint64_t* value;
};

using Slot = std::variant<std::filesystem::path*, std::size_t*, SeedSlot, double*, bool*, std::string*>;

struct Key {
  const char* section;
  const char* name;
  Slot slot;
};

std::vector<Key> keys(PipelineConfig& c) {
  return {
      {"paths", "train_corpus", &c.paths.train_corpus},
      {"paths", "train_truth", &c.paths.train_truth},
      {"paths", "test_corpus", &c.paths.test_corpus},
      {"paths", "test_truth", &c.paths.test_truth},
      {"paths", "out_dir", &c.paths.out_dir},
      {"paths", "abbreviations", &c.paths.abbreviations},
      {"paths", "emoticons", &c.paths.emoticons},
      {"preprocess", "min_tf", &c.preprocess.min_tf},
      {"preprocess", "long_word_limit", &c.preprocess.long_word_limit},
      {"preprocess", "collapse_elongation", &c.preprocess.collapse_elongation},
      {"preprocess", "max_sentence_len", &c.preprocess.max_sentence_len},
      {"lm", "embed_dim", &c.lm.embed_dim},
      {"lm", "hidden_dim", &c.lm.hidden_dim},
      {"lm", "bias", &c.lm.bias},
      {"lm", "window", &c.lm.window},
      {"lm", "epochs", &c.lm.epochs},
      {"lm", "batch", &c.lm.batch},
      {"lm", "lr", &c.lm.lr},
      {"lm", "clip", &c.lm.clip},
      {"lm", "optimizer", &c.lm.optimizer},
      {"scd", "hidden_dim", &c.scd.hidden_dim},
      {"scd", "bias", &c.scd.bias},
      {"scd", "masked", &c.scd.masked},
      {"scd", "chunk_len", &c.scd.chunk_len},
      {"scd", "threshold", &c.scd.threshold},
      {"scd", "negative_ratio", &c.scd.negative_ratio},
      {"scd", "validation_fraction", &c.scd.validation_fraction},
      {"scd", "epochs", &c.scd.epochs},
      {"scd", "batch", &c.scd.batch},
      {"scd", "lr", &c.scd.lr},
      {"scd", "clip", &c.scd.clip},
      {"scd", "optimizer", &c.scd.optimizer},
      {"author", "dim", &c.author.dim},
      {"author", "bigrams", &c.author.bigrams},
      {"author", "min_feature_freq", &c.author.min_feature_freq},
      {"author", "epochs", &c.author.epochs},
      {"author", "lr", &c.author.lr},
      {"author", "normal_ratio", &c.author.normal_ratio},
      {"synth", "conversations", &c.synth.conversations},
      {"synth", "test_conversations", &c.synth.test_conversations},
      {"synth", "predator_fraction", &c.synth.predator_fraction},
      {"synth", "marker_density", &c.synth.marker_density},
      {"synth", "victim_marker_density", &c.synth.victim_marker_density},
      {"synth", "noise_rate", &c.synth.noise_rate},
      {"run", "seed", SeedSlot{&c.seed}},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& v, T& out) {
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && ptr == v.data() + v.size() && !v.empty();
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void assign(const Slot& slot, const std::string& value, const std::filesystem::path& base, const std::string& where) {
  auto bad = [&](const char* expected) {
    throw ConfigError("config: " + where + ": expected " + expected + ", found '" + value + "'");
  };
  std::visit(Overloaded{
                 [&](std::filesystem::path* p) {
                   const std::filesystem::path v(value);
                   *p = v.empty() || v.is_absolute() || base.empty() ? v : base / v;
                 },
                 [&](std::size_t* p) {
                   if (!parse_number(value, *p)) bad("a non-negative integer");
                 },
                 [&](SeedSlot p) {
                   if (!parse_number(value, *p.value)) bad("a non-negative integer");
                 },
                 [&](double* p) {
                   if (!parse_number(value, *p) || !std::isfinite(*p)) bad("a number");
                 },
                 [&](bool* p) {
                   if (value == "true" || value == "1") {
                     *p = true;
                   } else if (value == "false" || value == "0") {
                     *p = false;
                   } else {
                     bad("true or false");
                   }
                 },
                 [&](std::string* p) { *p = value; },
             },
             slot);
}

// Shortest decimal text that reads back to the same double.
std::string render_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    if (parse_number(std::string(buf), back) && back == v) break;
  }
  return buf;
}

std::string render(const Slot& slot) {
  return std::visit(Overloaded{
                        [](std::filesystem::path* p) { return p->string(); },
                        [](std::size_t* p) { return std::to_string(*p); },
                        [](SeedSlot p) { return std::to_string(*p.value); },
                        [](double* p) { return render_double(*p); },
                        [](bool* p) { return std::string(*p ? "true" : "false"); },
                        [](std::string* p) { return *p; },
                    },
                    slot);
}

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  for (const auto* opt : {&c.lm.optimizer, &c.scd.optimizer}) {
    if (*opt != "sgd" && *opt != "adam") fail("optimizer must be sgd or adam, found '" + *opt + "'");
  }
  if (c.preprocess.min_tf == 0) fail("preprocess.min_tf must be at least 1");
  if (c.preprocess.max_sentence_len == 0) fail("preprocess.max_sentence_len must be positive");
  if (c.lm.embed_dim == 0 || c.lm.hidden_dim == 0 || c.scd.hidden_dim == 0 || c.author.dim == 0) {
    fail("dimensions must be positive");
  }
  if (c.lm.window == 0 || c.lm.batch == 0 || c.scd.batch == 0) fail("window and batch sizes must be positive");
  if (c.scd.chunk_len == 0) fail("scd.chunk_len must be positive");
  if (!(c.scd.threshold >= 0.0 && c.scd.threshold <= 1.0)) fail("scd.threshold must be in [0, 1]");
  if (!(c.scd.validation_fraction >= 0.0 && c.scd.validation_fraction < 1.0)) {
    fail("scd.validation_fraction must be in [0, 1)");
  }
  if (c.author.min_feature_freq == 0) fail("author.min_feature_freq must be at least 1");
  for (double lr : {c.lm.lr, c.scd.lr, c.author.lr}) {
    if (!(lr >= 0.0)) fail("learning rates must be non-negative");
  }
}

}  // namespace

void PipelineConfig::apply_strict_paper() {
  lm.bias = false;
  scd.bias = false;
  scd.masked = false;
}

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  const auto table = keys(c);
  std::set<std::string> sections;
  for (const auto& k : table) sections.insert(k.section);
  std::set<std::string> seen;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no);
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: " + where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError("config: " + where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: " + where + ": expected key = value");
    if (section.empty()) throw ConfigError("config: " + where + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* match = nullptr;
    for (const auto& k : table) {
      if (section == k.section && key == k.name) match = &k;
    }
    if (!match) throw ConfigError("config: " + where + ": unknown key " + section + "." + key);
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError("config: " + where + ": duplicate key " + section + "." + key);
    }
    assign(match->slot, value, base_dir, where + " (" + section + "." + key + ")");
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  return parse_config(in, path.parent_path());
}

std::string to_ini(const PipelineConfig& config) {
  PipelineConfig copy = config;
  std::ostringstream out;
  std::string section;
  for (const auto& k : keys(copy)) {
    if (section != k.section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    const auto value = render(k.slot);
    out << k.name << (value.empty() ? " =" : " = ") << value << '\n';
  }
  return out.str();
}

}  // namespace sentinel
