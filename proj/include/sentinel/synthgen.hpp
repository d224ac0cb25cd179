#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sentinel/corpus_io.hpp"

namespace sentinel {

// Synthetic chat corpus with planted predator conversations. Tokens are
// neutral pseudo-words from three disjoint pools.
struct SynthSpec {
  std::uint64_t seed = 0;
  std::uint64_t pool_seed = 0;  // shared by corpora that must use the same words
  std::size_t conversations = 500;
  double predator_fraction = 0.05;
  std::size_t background_pool = 400;
  std::size_t predator_markers = 6;
  std::size_t victim_markers = 4;
  double marker_density = 0.7;          // share of predator-line tokens drawn from the predator pool
  double victim_marker_density = 0.5;   // same for victim lines
  double mean_length = 16.0;            // messages per conversation, geometric
  // Positive lengths follow the same geometric tail from this point on, so
  // length carries no signal above it.
  std::size_t min_positive_length = 6;
  std::size_t max_length = 500;
  double conversations_per_predator = 2.0;
  double noise_rate = 0.1;  // messages carrying a number, URL, emoticon, abbreviation or elongation
};

struct SynthPools {
  std::vector<std::string> background;
  std::vector<std::string> predator;
  std::vector<std::string> victim;
};

struct SynthCorpus {
  std::vector<Conversation> conversations;
  std::set<std::string> predators;
  SynthPools pools;

  std::string xml() const { return serialize_pan_corpus(conversations); }
  std::string truth() const;
};

SynthPools make_pools(const SynthSpec& spec);

// Pure function of the spec: the same spec gives the same bytes.
SynthCorpus generate(const SynthSpec& spec);

void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& xml_path,
                        const std::filesystem::path& truth_path);

}  // namespace sentinel
