#include "sentinel/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "sentinel/errors.hpp"
#include "sentinel/preprocessing.hpp"
#include "sentinel/random.hpp"

namespace sentinel {
namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string syllable(std::size_t i) {
  return {kConsonants[i / kVowels.size()], kVowels[i % kVowels.size()]};
}

std::string hex_id(Rng& rng) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng.next_u64()),
                static_cast<unsigned long long>(rng.next_u64()));
  return buf;
}

void validate(const SynthSpec& s) {
  auto fail = [](const std::string& what) { throw ConfigError("synth: " + what); };
  if (s.conversations == 0) fail("conversations must be positive");
  if (!(s.predator_fraction >= 0.0 && s.predator_fraction < 1.0)) fail("predator_fraction must be in [0, 1)");
  if (s.background_pool == 0) fail("background_pool must be positive");
  if (s.predator_fraction > 0.0 && (s.predator_markers == 0 || s.victim_markers == 0)) {
    fail("marker pools must be non-empty");
  }
  for (double d : {s.marker_density, s.victim_marker_density, s.noise_rate}) {
    if (!(d >= 0.0 && d <= 1.0)) fail("densities and noise_rate must be in [0, 1]");
  }
  if (!(s.mean_length >= 1.0)) fail("mean_length must be at least 1");
  if (s.max_length == 0 || s.min_positive_length == 0 || s.min_positive_length > s.max_length) {
    fail("inconsistent length bounds");
  }
  if (!(s.conversations_per_predator >= 1.0)) fail("conversations_per_predator must be at least 1");
}

// Geometric over 1..max with the given mean (before truncation).
std::size_t geometric(Rng& rng, double mean, std::size_t max) {
  if (mean <= 1.0) return 1;
  const double p = 1.0 / mean;
  const double u = 1.0 - rng.uniform();  // (0, 1]
  const auto extra = static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-p)));
  return std::min<std::size_t>(1 + extra, max);
}

class MessageWriter {
 public:
  MessageWriter(const SynthSpec& spec, const SynthPools& pools, Rng& rng)
      : spec_(spec), pools_(pools), rng_(rng) {
    for (const auto& [k, v] : NormRuleSet::defaults().abbreviations) abbreviations_.push_back(k);
  }

  std::string line(const std::vector<std::string>* markers, double density) {
    const std::size_t n = 3 + rng_.below(8);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) {
      if (markers && rng_.bernoulli(density)) {
        words.push_back((*markers)[rng_.below(markers->size())]);
      } else {
        words.push_back(pools_.background[rng_.below(pools_.background.size())]);
      }
    }
    if (rng_.bernoulli(spec_.noise_rate)) add_noise(words);
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

 private:
  void add_noise(std::vector<std::string>& words) {
    static const char* kEmoticons[] = {":)", ":-(", ";)", ":D"};
    const std::size_t at = rng_.below(words.size() + 1);
    std::string extra;
    switch (rng_.below(6)) {
      case 0:
        extra = std::to_string(rng_.below(1000));
        break;
      case 1:
        extra = "http://example.com/p" + std::to_string(rng_.below(100));
        break;
      case 2:
        extra = kEmoticons[rng_.below(4)];
        break;
      case 3:
        extra = abbreviations_[rng_.below(abbreviations_.size())];
        break;
      case 4: {
        auto& w = words[rng_.below(words.size())];
        w += std::string(3, w.back());
        return;
      }
      default: {
        auto& w = words[rng_.below(words.size())];
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
        return;
      }
    }
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), extra);
  }

  const SynthSpec& spec_;
  const SynthPools& pools_;
  Rng& rng_;
  std::vector<std::string> abbreviations_;
};

std::string clock(std::size_t minute) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu:%02zu", (minute / 60) % 24, minute % 60);
  return buf;
}

}  // namespace

std::string SynthCorpus::truth() const {
  std::ostringstream out;
  write_id_list(out, predators);
  return out.str();
}

SynthPools make_pools(const SynthSpec& spec) {
  validate(spec);
  const std::size_t syllables = kConsonants.size() * kVowels.size();
  const std::size_t needed = spec.background_pool + spec.predator_markers + spec.victim_markers;
  if (needed > syllables * syllables * syllables) throw ConfigError("synth: token pools too large");
  std::unordered_set<std::string> reserved;
  for (const auto& [k, v] : NormRuleSet::defaults().abbreviations) reserved.insert(k);

  Rng rng(derive_seed(spec.pool_seed, "synth.pools"));
  std::vector<std::size_t> order(syllables * syllables * syllables);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::string> words;
  for (std::size_t i : order) {
    if (words.size() == needed) break;
    // two syllables for most words, three for a minority
    std::string w = syllable(i % syllables) + syllable((i / syllables) % syllables);
    if (i / (syllables * syllables) % 4 == 0) w += syllable(i / (syllables * syllables));
    if (reserved.count(w) || std::find(words.begin(), words.end(), w) != words.end()) continue;
    words.push_back(std::move(w));
  }
  SynthPools pools;
  auto take = [&](std::size_t n, std::size_t from) {
    return std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(from),
                                    words.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  pools.background = take(spec.background_pool, 0);
  pools.predator = take(spec.predator_markers, spec.background_pool);
  pools.victim = take(spec.victim_markers, spec.background_pool + spec.predator_markers);
  return pools;
}

SynthCorpus generate(const SynthSpec& spec) {
  SynthCorpus out;
  out.pools = make_pools(spec);
  Rng rng(derive_seed(spec.seed, "synth.corpus"));
  MessageWriter writer(spec, out.pools, rng);

  const auto positives = static_cast<std::size_t>(std::llround(static_cast<double>(spec.conversations) * spec.predator_fraction));
  std::vector<std::uint8_t> is_positive(spec.conversations, 0);
  std::fill(is_positive.begin(), is_positive.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  rng.shuffle(std::span<std::uint8_t>(is_positive));

  std::vector<std::string> predators;
  const auto predator_count =
      positives == 0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(positives) / spec.conversations_per_predator)));
  for (std::size_t i = 0; i < predator_count; ++i) predators.push_back(hex_id(rng));
  std::vector<std::string> normals;
  for (std::size_t i = 0; i < std::max<std::size_t>(4, spec.conversations); ++i) normals.push_back(hex_id(rng));

  std::size_t positive_index = 0;
  for (std::size_t ci = 0; ci < spec.conversations; ++ci) {
    Conversation conv;
    conv.id = hex_id(rng);
    std::vector<std::string> authors;
    std::string predator;
    std::string victim;
    std::size_t length = 0;
    if (is_positive[ci]) {
      predator = predators[positive_index++ % predators.size()];
      victim = hex_id(rng);
      authors = {predator, victim};
      length = std::min(spec.max_length, spec.min_positive_length - 1 + geometric(rng, spec.mean_length, spec.max_length));
    } else {
      const double r = rng.uniform();
      const std::size_t participants = r < 0.2 ? 1 : r < 0.8 ? 2 : 3;
      while (authors.size() < participants) {
        const auto& a = normals[rng.below(normals.size())];
        if (std::find(authors.begin(), authors.end(), a) == authors.end()) authors.push_back(a);
      }
      length = geometric(rng, spec.mean_length, spec.max_length);
    }
    std::size_t speaker = rng.below(authors.size());
    std::size_t minute = rng.below(24 * 60);
    for (std::size_t line = 1; line <= length; ++line) {
      if (line > 1 && authors.size() > 1 && rng.bernoulli(0.7)) {
        speaker = (speaker + 1 + rng.below(authors.size() - 1)) % authors.size();
      }
      const auto& author = authors[speaker];
      std::string text;
      if (!predator.empty() && author == predator) {
        text = writer.line(&out.pools.predator, spec.marker_density);
      } else if (!victim.empty() && author == victim) {
        text = writer.line(&out.pools.victim, spec.victim_marker_density);
      } else {
        text = writer.line(nullptr, 0.0);
      }
      minute += rng.below(3);
      conv.messages.push_back({author, line, clock(minute), std::move(text)});
    }
    if (!predator.empty()) out.predators.insert(predator);
    out.conversations.push_back(std::move(conv));
  }
  return out;
}

void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& xml_path,
                        const std::filesystem::path& truth_path) {
  write_pan_corpus_file(xml_path, corpus.conversations);
  std::ofstream truth(truth_path);
  if (!truth) throw IoError("cannot write " + truth_path.string());
  truth << corpus.truth();
  if (!truth) throw IoError("cannot write " + truth_path.string());
}

}  // namespace sentinel
