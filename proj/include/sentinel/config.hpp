#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace sentinel {

// Every setting of a run. Values map one-to-one onto INI keys; see
// config_reference() for the full list with defaults.
struct PipelineConfig {
  struct Paths {
    std::filesystem::path train_corpus;
    std::filesystem::path train_truth;
    std::filesystem::path test_corpus;
    std::filesystem::path test_truth;
    std::filesystem::path out_dir = "out";
    std::filesystem::path abbreviations;  // empty: built-in table
    std::filesystem::path emoticons;      // empty: built-in patterns
  } paths;

  struct Preprocess {
    std::size_t min_tf = 10;
    std::size_t long_word_limit = 30;
    bool collapse_elongation = true;
    std::size_t max_sentence_len = 50;
  } preprocess;

  struct Lm {
    std::size_t embed_dim = 200;
    std::size_t hidden_dim = 200;
    bool bias = true;
    std::size_t window = 35;
    std::size_t epochs = 5;
    std::size_t batch = 8;
    double lr = 1.0;
    double clip = 5.0;
    std::string optimizer = "sgd";
  } lm;

  struct Scd {
    std::size_t hidden_dim = 200;
    bool bias = true;
    bool masked = true;
    std::size_t chunk_len = 100;
    double threshold = 0.5;
    double negative_ratio = 5.0;
    double validation_fraction = 0.2;
    std::size_t epochs = 5;
    std::size_t batch = 16;
    double lr = 0.1;
    double clip = 5.0;
    std::string optimizer = "sgd";
  } scd;

  struct Author {
    std::size_t dim = 100;
    bool bigrams = true;
    std::size_t min_feature_freq = 5;
    std::size_t epochs = 5;
    double lr = 0.1;
    double normal_ratio = 5.0;
  } author;

  struct Synth {
    std::size_t conversations = 500;
    std::size_t test_conversations = 500;
    double predator_fraction = 0.05;
    double marker_density = 0.7;
    double victim_marker_density = 0.5;
    double noise_rate = 0.1;
  } synth;

  std::uint64_t seed = 0;

  // Disables LSTM biases and SCD masking.
  void apply_strict_paper();
};

// Relative paths are resolved against base_dir. Unknown sections or keys,
// duplicates and malformed values throw ConfigError.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical INI text of every key; parse_config(to_ini(c)) == c.
std::string to_ini(const PipelineConfig& config);

}  // namespace sentinel
