#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentinel/author_classifier.hpp"
#include "sentinel/language_model.hpp"
#include "sentinel/preprocessing.hpp"
#include "sentinel/scd_classifier.hpp"

namespace sentinel {

inline constexpr char kContainerMagic[8] = {'S', 'N', 'T', 'L', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint64_t kDefaultSizeCap = std::uint64_t{4} << 30;

// Kind-tagged bag of float32 tensors, string tables and metadata.
struct Container {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, std::vector<std::string>>> strings;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  void set(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }
  const std::string& get(const std::string& key) const;
  std::size_t get_count(const std::string& key) const;
  bool get_flag(const std::string& key) const;
  const std::vector<std::string>& table(const std::string& name) const;
  const Tensor<float>& tensor(const std::string& name) const;
};

std::string serialize_container(const Container& c);
Container parse_container(std::string_view bytes, std::uint64_t size_cap = kDefaultSizeCap);

// Atomic write (temporary file, then rename); returns the byte count.
std::uint64_t save_container(const Container& c, const std::filesystem::path& path);
Container load_container(const std::filesystem::path& path, std::uint64_t size_cap = kDefaultSizeCap);

Container to_container(const Vocabulary& vocab);
Container to_container(const LanguageModel<float>& model);
Container to_container(const ScdModel<float>& model);
Container to_container(const ShallowModel<float>& model);
Container to_container(const std::vector<ConversationSequence<float>>& sequences);

Vocabulary vocabulary_from(const Container& c);
LanguageModel<float> language_model_from(const Container& c);
ScdModel<float> scd_model_from(const Container& c);
ShallowModel<float> author_model_from(const Container& c);
std::vector<ConversationSequence<float>> sequences_from(const Container& c);

template <class T>
std::uint64_t save_model(const T& model, const std::filesystem::path& path) {
  return save_container(to_container(model), path);
}

inline Vocabulary load_vocabulary(const std::filesystem::path& p) { return vocabulary_from(load_container(p)); }
inline LanguageModel<float> load_language_model(const std::filesystem::path& p) {
  return language_model_from(load_container(p));
}
inline ScdModel<float> load_scd_model(const std::filesystem::path& p) { return scd_model_from(load_container(p)); }
inline ShallowModel<float> load_author_model(const std::filesystem::path& p) {
  return author_model_from(load_container(p));
}
inline std::vector<ConversationSequence<float>> load_sequences(const std::filesystem::path& p) {
  return sequences_from(load_container(p));
}

}  // namespace sentinel
