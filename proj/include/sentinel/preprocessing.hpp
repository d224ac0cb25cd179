#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sentinel {

inline constexpr std::string_view kNumberSymbol = "00NUM";
inline constexpr std::string_view kLongWordSymbol = "00LW";
inline constexpr std::string_view kUrlSymbol = "00URL";

// Normalization tables. Abbreviation keys are lowercase single tokens;
// emoticon patterns are ECMAScript regular expressions matched against whole
// whitespace-delimited tokens.
struct NormRuleSet {
  std::map<std::string, std::string> abbreviations;
  std::vector<std::string> emoticon_patterns;
  std::size_t long_word_limit = 30;
  bool collapse_elongation = true;

  static NormRuleSet defaults();

  // "short<TAB>expansion" per line, '#' starts a comment. Entries override
  // existing keys.
  void load_abbreviations(std::istream& in);
  void load_abbreviations_file(const std::string& path);
  // One pattern per line, '#' comments; replaces the current list.
  void load_emoticons(std::istream& in);
  void load_emoticons_file(const std::string& path);
};

// Compiled form of a rule set. Rules run in a fixed order:
// non-ASCII strip, emoticon removal, URL, long word, number, lowercase,
// elongation collapse + abbreviation expansion.
class Normalizer {
 public:
  explicit Normalizer(NormRuleSet rules);
  std::string operator()(std::string_view raw) const;
  const NormRuleSet& rules() const { return rules_; }

 private:
  NormRuleSet rules_;
  std::optional<std::regex> emoticon_;
};

std::string normalize_text(std::string_view raw, const NormRuleSet& rules);

// Whitespace split; every ASCII punctuation character becomes its own token.
std::vector<std::string> tokenize(std::string_view normalized);

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kNum = 3;
  static constexpr TokenId kLongWord = 4;
  static constexpr TokenId kUrl = 5;
  static constexpr std::size_t kReservedCount = 6;
  static const std::array<std::string, kReservedCount>& reserved();

  Vocabulary();
  // Rebuilds a vocabulary from its ordered token list (reserved prefix required).
  static Vocabulary from_tokens(std::vector<std::string> tokens, std::size_t min_term_frequency);

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(const std::string& token) const;
  TokenId lookup(const std::string& token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t min_term_frequency() const { return min_tf_; }

  friend Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>&, std::size_t);
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_ && min_tf_ == other.min_tf_; }

 private:
  void push(std::string token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_tf_ = 1;
};

// One document per conversation (or review). Tokens with corpus frequency
// below min_tf are dropped; survivors are ordered by tf * ln(N / df)
// descending, ties lexicographic, after the reserved symbols.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents, std::size_t min_tf);

// Unknown tokens map to UNK, EOS is appended, and the result is truncated to
// max_len. Never pads.
std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len);

}  // namespace sentinel
