#include "sentinel/author_classifier.hpp"

#include <cstdio>
#include <istream>

#include "sentinel/metrics.hpp"
#include "sentinel/preprocessing.hpp"

namespace sentinel {

FeatureVocab FeatureVocab::from_features(std::vector<std::string> names, std::size_t min_frequency, bool bigrams) {
  FeatureVocab v;
  v.min_frequency_ = min_frequency;
  v.bigrams_ = bigrams;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw FormatError("feature vocabulary: empty feature at index " + std::to_string(i));
    if (!v.index_.emplace(names[i], i).second) {
      throw FormatError("feature vocabulary: duplicate feature '" + names[i] + "'");
    }
  }
  v.names_ = std::move(names);
  return v;
}

std::optional<std::size_t> FeatureVocab::find(const std::string& feature) const {
  auto it = index_.find(feature);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> extract_features(const TokenLines& lines, bool bigrams) {
  std::vector<std::string> out;
  for (const auto& line : lines) {
    out.insert(out.end(), line.begin(), line.end());
    if (!bigrams) continue;
    for (std::size_t i = 1; i < line.size(); ++i) out.push_back(line[i - 1] + ' ' + line[i]);
  }
  return out;
}

FeatureVocab build_feature_vocab(const std::vector<TokenLines>& units, std::size_t min_frequency, bool bigrams) {
  if (min_frequency == 0) throw UsageError("build_feature_vocab: min_frequency must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& unit : units) {
    for (auto& f : extract_features(unit, bigrams)) ++counts[f];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [f, n] : counts) {
    if (n >= min_frequency) kept.emplace_back(f, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> names;
  names.reserve(kept.size());
  for (auto& [f, n] : kept) names.push_back(std::move(f));
  return FeatureVocab::from_features(std::move(names), min_frequency, bigrams);
}

FeatureBag feature_bag(const TokenLines& lines, const FeatureVocab& vocab) {
  FeatureBag bag;
  for (const auto& line : lines) bag.tokens += line.size();
  for (const auto& f : extract_features(lines, vocab.bigrams())) {
    if (auto id = vocab.find(f)) bag.ids.push_back(*id);
  }
  return bag;
}

char class_letter(AuthorClass c) {
  switch (c) {
    case AuthorClass::P:
      return 'P';
    case AuthorClass::V:
      return 'V';
    case AuthorClass::N:
      return 'N';
  }
  return '?';
}

AuthorClass class_from_letter(char letter) {
  switch (letter) {
    case 'P':
      return AuthorClass::P;
    case 'V':
      return AuthorClass::V;
    case 'N':
      return AuthorClass::N;
    default:
      throw FormatError(std::string("unknown author class '") + letter + "'");
  }
}

AuthorClass class_from_role(AuthorRole role) {
  switch (role) {
    case AuthorRole::Predator:
      return AuthorClass::P;
    case AuthorRole::Victim:
      return AuthorClass::V;
    case AuthorRole::Normal:
      break;
  }
  return AuthorClass::N;
}

AuthorClass predicted_class(const SentimentScore& s) {
  AuthorClass best = AuthorClass::N;
  for (AuthorClass c : {AuthorClass::V, AuthorClass::P}) {
    if (s[c] > s[best]) best = c;
  }
  return best;
}

SentimentScore average_author_scores(std::span<const SentimentScore> scores) {
  if (scores.empty()) throw UsageError("average_author_scores: no scores");
  SentimentScore mean;
  for (const auto& s : scores) {
    mean.p += s.p;
    mean.v += s.v;
    mean.n += s.n;
  }
  const double total = mean.p + mean.v + mean.n;
  if (!(total > 0.0)) throw NumericError("average_author_scores: scores do not sum to a positive value");
  return {mean.p / total, mean.v / total, mean.n / total};
}

std::string AuthorEpochLog::line() const {
  std::ostringstream out;
  out << "epoch=" << epoch << " units=" << units << " train_loss=" << format_metric(loss)
      << " train_acc=" << format_metric(accuracy);
  return out.str();
}

std::vector<AuthorUnit> make_author_units(const std::vector<LabeledConversation>& conversations,
                                          const std::map<std::string, AuthorRole>* roles) {
  std::vector<AuthorUnit> units;
  for (const auto& doc : group_by_author(conversations)) {
    std::optional<AuthorClass> label;
    if (roles) {
      auto it = roles->find(doc.author);
      if (it != roles->end()) label = class_from_role(it->second);
    }
    for (const auto& ac : doc.conversations) {
      AuthorUnit unit{doc.author, ac.conversation_id, {}, label};
      for (const auto& line : ac.lines) {
        auto tokens = tokenize(line);
        if (!tokens.empty()) unit.lines.push_back(std::move(tokens));
      }
      if (!unit.lines.empty()) units.push_back(std::move(unit));
    }
  }
  return units;
}

Identification identify_predators(const std::set<std::string>& suspicious,
                                  const std::vector<AuthorVerdict>& verdicts,
                                  const std::vector<Conversation>& conversations) {
  std::unordered_map<std::string, const AuthorVerdict*> by_author;
  for (const auto& v : verdicts) by_author.emplace(v.author, &v);

  Identification out;
  std::set<std::string> seen;
  for (const auto& conv : conversations) {
    if (!suspicious.count(conv.id) || !seen.insert(conv.id).second) continue;
    std::set<std::string> participants;
    for (const auto& m : conv.messages) participants.insert(m.author);
    const AuthorVerdict* top = nullptr;
    bool tied = false;
    for (const auto& a : participants) {
      auto it = by_author.find(a);
      if (it == by_author.end()) continue;
      const AuthorVerdict* v = it->second;
      if (!top || v->score.p > top->score.p) {
        top = v;
        tied = false;
      } else if (v->score.p == top->score.p) {
        tied = true;
      }
    }
    if (!top) {
      out.anomalies.push_back(conv.id);
      continue;
    }
    if (!tied && top->predicted == AuthorClass::P) out.predators.insert(top->author);
  }
  for (const auto& id : suspicious) {
    if (!seen.count(id)) out.anomalies.push_back(id);
  }
  return out;
}

void write_author_scores(std::ostream& out, const std::vector<AuthorVerdict>& verdicts) {
  char buf[128];
  for (const auto& v : verdicts) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\t%.17g", v.score.p, v.score.v, v.score.n);
    out << v.author << '\t' << buf << '\t' << class_letter(v.predicted) << '\n';
  }
}

std::vector<AuthorVerdict> parse_author_scores(std::istream& in) {
  std::vector<AuthorVerdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    AuthorVerdict v;
    std::string cls;
    if (!std::getline(fields, v.author, '\t') || !(fields >> v.score.p >> v.score.v >> v.score.n >> cls) ||
        cls.size() != 1) {
      throw FormatError("author scores: malformed line " + std::to_string(line_no));
    }
    v.predicted = class_from_letter(cls[0]);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace sentinel
