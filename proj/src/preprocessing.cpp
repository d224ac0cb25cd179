#include "sentinel/preprocessing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {

namespace {

// Keep in sync with data/abbreviations.tsv.
constexpr std::pair<const char*, const char*> kDefaultAbbreviations[] = {
    {"2day", "today"},   {"b4", "before"},       {"bc", "because"},       {"brb", "be right back"},
    {"btw", "by the way"}, {"cos", "because"},   {"cuz", "because"},      {"gonna", "going to"},
    {"gotta", "got to"}, {"gr8", "great"},        {"hru", "how are you"}, {"idk", "i do not know"},
    {"im", "i am"},      {"kinda", "kind of"},    {"l8r", "later"},       {"luv", "love"},
    {"msg", "message"},  {"omg", "oh my god"},    {"pls", "please"},      {"plz", "please"},
    {"ppl", "people"},   {"r", "are"},            {"thx", "thanks"},      {"tmr", "tomorrow"},
    {"tmrw", "tomorrow"}, {"u", "you"},           {"ur", "your"},         {"wanna", "want to"},
    {"wat", "what"},     {"y", "why"},            {"ya", "you"},          {"yr", "year"},
    {"yrs", "years"},
};

// Keep in sync with data/emoticons.txt.
constexpr const char* kDefaultEmoticons[] = {
    R"([:;=][-o^']?[)(\]\[dDpP/\\|*3oO@$<>{}]+)",
    R"([xX][-^']?[dDpP)(]+)",
    R"([)(\]\[]+[-o^']?[:;=])",
    R"([:;=]'-?[)(]+)",
    R"(</?3+)",
    R"(\^[_.-]*\^)",
    R"([oO0-][_.][oO0-])",
    R"([tT;]_+[tT;])",
};

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_ascii_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool is_reserved_symbol(std::string_view core) {
  return core == kNumberSymbol || core == kLongWordSymbol || core == kUrlSymbol;
}

// A token split into leading punctuation, core, trailing punctuation. Signs
// stay attached to the core so "-3" is a number.
struct TokenParts {
  std::string lead, core, trail;
  std::string join() const { return lead + core + trail; }
};

TokenParts split_token(const std::string& tok) {
  std::size_t b = 0, e = tok.size();
  while (b < e && is_ascii_punct(tok[b]) && tok[b] != '+' && tok[b] != '-') ++b;
  while (e > b && is_ascii_punct(tok[e - 1])) --e;
  return {tok.substr(0, b), tok.substr(b, e - b), tok.substr(e)};
}

bool is_number(const std::string& s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (digits == 0) return false;
  if (i < s.size() && s[i] == '.') {
    ++i;
    std::size_t frac = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++frac;
    if (frac == 0) return false;
  }
  return i == s.size();
}

bool starts_with_ci(const std::string& s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool is_url(const std::string& tok) {
  std::size_t b = 0;
  while (b < tok.size() && is_ascii_punct(tok[b])) ++b;
  const std::string rest = tok.substr(b);
  return starts_with_ci(rest, "http://") || starts_with_ci(rest, "https://") ||
         starts_with_ci(rest, "ftp://") || starts_with_ci(rest, "www.");
}

// Runs of three or more identical letters collapse to one.
std::string collapse_elongation(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::size_t run = j - i;
    const bool letter = std::isalpha(static_cast<unsigned char>(s[i])) != 0;
    out.append((letter && run >= 3) ? 1 : run, s[i]);
    i = j;
  }
  return out;
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

NormRuleSet NormRuleSet::defaults() {
  NormRuleSet rules;
  for (const auto& [k, v] : kDefaultAbbreviations) rules.abbreviations.emplace(k, v);
  for (const char* p : kDefaultEmoticons) rules.emoticon_patterns.emplace_back(p);
  return rules;
}

void NormRuleSet::load_abbreviations(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ConfigError("abbreviation file line " + std::to_string(line_no) + ": expected short<TAB>expansion");
    }
    const std::string key = trim(line.substr(0, tab));
    const std::string value = trim(line.substr(tab + 1));
    if (key.empty() || value.empty() || key != lowercase(key) ||
        std::any_of(key.begin(), key.end(), is_ascii_space)) {
      throw ConfigError("abbreviation file line " + std::to_string(line_no) +
                        ": key must be a single lowercase token");
    }
    abbreviations[key] = value;
  }
}

void NormRuleSet::load_abbreviations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open abbreviation file " + path);
  load_abbreviations(in);
}

void NormRuleSet::load_emoticons(std::istream& in) {
  std::vector<std::string> patterns;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    line = trim(line);
    if (!line.empty()) patterns.push_back(line);
  }
  emoticon_patterns = std::move(patterns);
}

void NormRuleSet::load_emoticons_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open emoticon file " + path);
  load_emoticons(in);
}

Normalizer::Normalizer(NormRuleSet rules) : rules_(std::move(rules)) {
  if (!rules_.emoticon_patterns.empty()) {
    std::string combined;
    for (const auto& p : rules_.emoticon_patterns) {
      if (!combined.empty()) combined += '|';
      combined += "(?:" + p + ")";
    }
    try {
      emoticon_.emplace(combined, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError(std::string("invalid emoticon pattern: ") + e.what());
    }
  }
}

std::string Normalizer::operator()(std::string_view raw) const {
  std::string ascii;
  ascii.reserve(raw.size());
  for (char c : raw) {
    if (static_cast<unsigned char>(c) < 0x80) ascii.push_back(c);
  }

  std::string out;
  for (std::string tok : split_whitespace(ascii)) {
    if (emoticon_ && std::regex_match(tok, *emoticon_)) continue;

    TokenParts parts;
    if (is_url(tok)) {
      parts = split_token(tok);
      parts = {parts.lead, std::string(kUrlSymbol), ""};
    } else {
      parts = split_token(tok);
      if (parts.core.size() > rules_.long_word_limit) {
        parts.core = kLongWordSymbol;
      } else if (is_number(parts.core)) {
        parts.core = kNumberSymbol;
      }
    }
    if (!is_reserved_symbol(parts.core)) {
      parts.core = lowercase(parts.core);
      parts.lead = lowercase(parts.lead);
      parts.trail = lowercase(parts.trail);
      if (rules_.collapse_elongation) parts.core = collapse_elongation(parts.core);
      if (auto it = rules_.abbreviations.find(parts.core); it != rules_.abbreviations.end()) {
        parts.core = it->second;
      }
    }
    const std::string joined = parts.join();
    if (joined.empty()) continue;
    if (!out.empty()) out += ' ';
    out += joined;
  }
  return out;
}

std::string normalize_text(std::string_view raw, const NormRuleSet& rules) { return Normalizer(rules)(raw); }

std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> out;
  for (const std::string& piece : split_whitespace(normalized)) {
    std::string word;
    for (char c : piece) {
      if (is_ascii_punct(c)) {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
        out.emplace_back(1, c);
      } else {
        word.push_back(c);
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

const std::array<std::string, Vocabulary::kReservedCount>& Vocabulary::reserved() {
  static const std::array<std::string, kReservedCount> names = {
      "<pad>", "<unk>", "<eos>", std::string(kNumberSymbol), std::string(kLongWordSymbol), std::string(kUrlSymbol)};
  return names;
}

Vocabulary::Vocabulary() {
  for (const auto& r : reserved()) push(r);
}

void Vocabulary::push(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::size_t min_term_frequency) {
  if (tokens.size() < kReservedCount || !std::equal(reserved().begin(), reserved().end(), tokens.begin())) {
    throw FormatError("vocabulary does not start with the reserved symbols");
  }
  Vocabulary v;
  v.min_tf_ = min_term_frequency;
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
    if (v.index_.count(tokens[i]) != 0) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    v.push(std::move(tokens[i]));
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::lookup(const std::string& token) const { return find(token).value_or(kUnk); }

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents, std::size_t min_tf) {
  if (documents.empty()) throw UsageError("build_vocabulary: empty corpus");
  if (min_tf < 1) throw UsageError("build_vocabulary: min_tf must be at least 1");

  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // tf, df
  for (const auto& doc : documents) {
    std::set<std::string_view> seen;
    for (const auto& tok : doc) {
      auto& [tf, df] = counts[tok];
      ++tf;
      if (seen.insert(tok).second) ++df;
    }
  }

  Vocabulary vocab;
  vocab.min_tf_ = min_tf;
  const double n_docs = static_cast<double>(documents.size());
  std::vector<std::pair<double, const std::string*>> ranked;
  for (const auto& [tok, c] : counts) {
    if (c.first < min_tf || vocab.find(tok)) continue;
    const double weight = static_cast<double>(c.first) * std::log(n_docs / static_cast<double>(c.second));
    ranked.emplace_back(weight, &tok);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  for (const auto& [w, tok] : ranked) vocab.push(*tok);
  return vocab;
}

std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw UsageError("encode: max_len must be at least 1");
  std::vector<TokenId> out;
  out.reserve(std::min(tokens.size() + 1, max_len));
  for (const auto& t : tokens) {
    if (out.size() == max_len) return out;
    out.push_back(vocab.lookup(t));
  }
  if (out.size() < max_len) out.push_back(Vocabulary::kEos);
  return out;
}

}  // namespace sentinel
