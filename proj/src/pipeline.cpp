#include "sentinel/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sentinel/author_classifier.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/language_model.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/model_store.hpp"
#include "sentinel/preprocessing.hpp"
#include "sentinel/random.hpp"
#include "sentinel/scd_classifier.hpp"
#include "sentinel/synthgen.hpp"

namespace sentinel {
namespace {

namespace fs = std::filesystem;

fs::path out_path(const PipelineConfig& c, const char* name) { return c.paths.out_dir / name; }

// Which stage writes each artifact, for error messages.
const std::map<std::string, std::string>& producers() {
  static const std::map<std::string, std::string> m = {
      {artifact::kTrainNormalized, "preprocess"}, {artifact::kTestNormalized, "preprocess"},
      {artifact::kVocab, "build-vocab"},          {artifact::kLm, "train-lm"},
      {artifact::kLmEval, "eval-lm"},             {artifact::kTrainVectors, "vectorize"},
      {artifact::kEvalVectors, "vectorize"},      {artifact::kScd, "train-scd"},
      {artifact::kVerdicts, "eval-scd"},          {artifact::kAuthor, "train-author"},
      {artifact::kScores, "score-authors"},
  };
  return m;
}

fs::path require(const PipelineConfig& c, const char* name, const std::string& stage) {
  auto p = out_path(c, name);
  if (!fs::exists(p)) {
    throw UsageError(stage + ": missing " + p.string() + "; run `sentinel " + producers().at(name) + "` first");
  }
  return p;
}

const fs::path& require_setting(const fs::path& value, const char* key, const std::string& stage) {
  if (value.empty()) throw UsageError(stage + ": paths." + std::string(key) + " is not set");
  return value;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

NormRuleSet rules_from(const PipelineConfig& c) {
  auto rules = NormRuleSet::defaults();
  if (!c.paths.abbreviations.empty()) rules.load_abbreviations_file(c.paths.abbreviations.string());
  if (!c.paths.emoticons.empty()) rules.load_emoticons_file(c.paths.emoticons.string());
  rules.long_word_limit = c.preprocess.long_word_limit;
  rules.collapse_elongation = c.preprocess.collapse_elongation;
  return rules;
}

OptimizerKind optimizer_from(const std::string& name) {
  return name == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
}

std::set<std::string> truth_for(const PipelineConfig& c, const std::string& split) {
  const auto& path = split == "test" ? c.paths.test_truth : c.paths.train_truth;
  if (path.empty()) return {};
  return parse_ground_truth_file(path);
}

bool has_truth(const PipelineConfig& c, const std::string& split) {
  return !(split == "test" ? c.paths.test_truth : c.paths.train_truth).empty();
}

std::vector<LabeledConversation> load_split(const PipelineConfig& c, const std::string& split,
                                            const std::string& stage) {
  const auto path = require(c, split == "test" ? artifact::kTestNormalized : artifact::kTrainNormalized, stage);
  return label_conversations(parse_pan_corpus_file(path).conversations, truth_for(c, split));
}

std::vector<std::vector<TokenId>> encode_messages(const Conversation& conv, const Vocabulary& vocab,
                                                  std::size_t max_len) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& m : conv.messages) out.push_back(encode(tokenize(m.text), vocab, max_len));
  return out;
}

// One document per conversation: its encoded messages back to back, each
// ending in EOS, so the LM state carries across message boundaries.
std::vector<std::vector<TokenId>> encode_corpus(const std::vector<LabeledConversation>& convs,
                                                const Vocabulary& vocab, std::size_t max_len) {
  std::vector<std::vector<TokenId>> docs;
  for (const auto& lc : convs) {
    std::vector<TokenId> doc;
    for (const auto& m : encode_messages(lc.conversation, vocab, max_len)) doc.insert(doc.end(), m.begin(), m.end());
    if (doc.size() >= 2) docs.push_back(std::move(doc));
  }
  return docs;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---- stages ----

void stage_preprocess(const PipelineConfig& c, std::ostream& log) {
  const std::string stage = "preprocess";
  fs::create_directories(c.paths.out_dir);
  const Normalizer normalize(rules_from(c));
  auto one = [&](const std::string& split, const fs::path& corpus, const char* out_name, const char* report_name) {
    auto parsed = parse_pan_corpus_file(corpus);
    for (auto& conv : parsed.conversations) {
      for (auto& m : conv.messages) m.text = normalize(m.text);
    }
    const auto truth = truth_for(c, split);
    auto filtered = filter_corpus(label_conversations(parsed.conversations, truth), truth);
    std::vector<Conversation> kept;
    kept.reserve(filtered.conversations.size());
    for (auto& lc : filtered.conversations) kept.push_back(std::move(lc.conversation));
    write_pan_corpus_file(out_path(c, out_name), kept);
    std::string report = filtered.report.to_table();
    report += "skipped records: " + std::to_string(parsed.skipped.size()) + "\n";
    write_text(out_path(c, report_name), report);
    log << stage << ": " << split << " " << kept.size() << " conversations kept, " << parsed.skipped.size()
        << " records skipped\n";
  };
  one("train", require_setting(c.paths.train_corpus, "train_corpus", stage), artifact::kTrainNormalized,
      artifact::kTrainFilter);
  if (!c.paths.test_corpus.empty()) {
    one("test", c.paths.test_corpus, artifact::kTestNormalized, artifact::kTestFilter);
  }
}

void stage_build_vocab(const PipelineConfig& c, std::ostream& log) {
  const auto convs = load_split(c, "train", "build-vocab");
  std::vector<std::vector<std::string>> docs;
  for (const auto& lc : convs) {
    for (const auto& m : lc.conversation.messages) docs.push_back(tokenize(m.text));
  }
  const auto vocab = build_vocabulary(docs, c.preprocess.min_tf);
  save_model(vocab, out_path(c, artifact::kVocab));
  log << "build-vocab: " << vocab.size() << " entries from " << docs.size() << " messages\n";
}

void stage_train_lm(const PipelineConfig& c, std::ostream& log) {
  auto vocab = load_vocabulary(require(c, artifact::kVocab, "train-lm"));
  const auto corpus = encode_corpus(load_split(c, "train", "train-lm"), vocab, c.preprocess.max_sentence_len);
  Rng rng(derive_seed(c.seed, "train-lm.init"));
  auto model = LanguageModel<float>::create(std::move(vocab), {c.lm.embed_dim, c.lm.hidden_dim, c.lm.bias}, rng);
  LmTrainConfig tc;
  tc.window = c.lm.window;
  tc.epochs = c.lm.epochs;
  tc.batch = c.lm.batch;
  tc.lr = c.lm.lr;
  tc.clip = c.lm.clip;
  tc.optimizer = optimizer_from(c.lm.optimizer);
  tc.seed = derive_seed(c.seed, "train-lm.order");
  std::ostringstream epochs;
  for (const auto& e : train_lm(model, corpus, tc)) {
    epochs << e.line() << '\n';
    log << "train-lm: " << e.line() << '\n';
  }
  write_text(out_path(c, artifact::kLmLog), epochs.str());
  save_model(model, out_path(c, artifact::kLm));
}

void stage_eval_lm(const PipelineConfig& c, std::ostream& log) {
  const auto model = load_language_model(require(c, artifact::kLm, "eval-lm"));
  const auto split = evaluation_split(c);
  const auto corpus = encode_corpus(load_split(c, split, "eval-lm"), model.vocab, c.preprocess.max_sentence_len);
  const double ppl = perplexity(model, corpus, c.lm.window);
  const std::string line = "perplexity " + split + " " + fixed(ppl, 4) + "\n";
  write_text(out_path(c, artifact::kLmEval), line);
  log << "eval-lm: " << line;
}

void stage_vectorize(const PipelineConfig& c, std::ostream& log) {
  const auto model = load_language_model(require(c, artifact::kLm, "vectorize"));
  auto one = [&](const std::string& split, const char* out_name) {
    std::vector<ConversationSequence<float>> seqs;
    const bool labeled = has_truth(c, split);
    for (const auto& lc : load_split(c, split, "vectorize")) {
      auto seq = vectorize_conversation(lc.conversation.id,
                                        encode_messages(lc.conversation, model.vocab, c.preprocess.max_sentence_len),
                                        model, labeled ? std::optional<bool>(lc.positive) : std::nullopt);
      if (seq) seqs.push_back(std::move(*seq));
    }
    save_model(seqs, out_path(c, out_name));
    log << "vectorize: " << split << " " << seqs.size() << " conversations\n";
  };
  one("train", artifact::kTrainVectors);
  one(evaluation_split(c), artifact::kEvalVectors);
}

void stage_train_scd(const PipelineConfig& c, std::ostream& log) {
  const auto seqs = load_sequences(require(c, artifact::kTrainVectors, "train-scd"));
  if (!has_truth(c, "train")) throw UsageError("train-scd: paths.train_truth is not set");
  std::vector<Chunk<float>> chunks;
  for (const auto& s : seqs) {
    for (auto& ch : chunk_and_pad(s, c.scd.chunk_len)) chunks.push_back(std::move(ch));
  }
  if (seqs.empty()) throw UsageError("train-scd: no training conversations");
  Rng rng(derive_seed(c.seed, "train-scd.init"));
  const auto input_dim = static_cast<std::size_t>(seqs.front().vectors.front().size());
  auto model = ScdModel<float>::create({input_dim, c.scd.hidden_dim, c.scd.bias, c.scd.masked}, rng);
  ScdTrainConfig tc;
  tc.epochs = c.scd.epochs;
  tc.batch = c.scd.batch;
  tc.lr = c.scd.lr;
  tc.clip = c.scd.clip;
  tc.optimizer = optimizer_from(c.scd.optimizer);
  tc.negative_ratio = c.scd.negative_ratio;
  tc.validation_fraction = c.scd.validation_fraction;
  tc.threshold = c.scd.threshold;
  tc.seed = derive_seed(c.seed, "train-scd.order");
  const auto result = train_scd(model, chunks, tc);
  std::ostringstream epochs;
  for (const auto& e : result.log) {
    epochs << e.line() << '\n';
    log << "train-scd: " << e.line() << '\n';
  }
  epochs << "best_epoch=" << result.best_epoch << '\n';
  write_text(out_path(c, artifact::kScdLog), epochs.str());
  save_model(model, out_path(c, artifact::kScd));
}

void stage_eval_scd(const PipelineConfig& c, std::ostream& log) {
  const auto model = load_scd_model(require(c, artifact::kScd, "eval-scd"));
  const auto seqs = load_sequences(require(c, artifact::kEvalVectors, "eval-scd"));
  std::vector<VerdictLine> verdicts;
  std::size_t positives = 0;
  for (const auto& s : seqs) {
    const auto p = predict_scd(model, chunk_and_pad(s, c.scd.chunk_len), c.scd.threshold);
    verdicts.push_back({s.id, p.max_probability, p.verdict});
    positives += p.verdict ? 1 : 0;
  }
  std::ostringstream out;
  write_verdicts(out, verdicts);
  write_text(out_path(c, artifact::kVerdicts), out.str());
  log << "eval-scd: " << positives << " of " << verdicts.size() << " conversations flagged\n";
}

void stage_train_author(const PipelineConfig& c, std::ostream& log) {
  const auto convs = load_split(c, "train", "train-author");
  if (!has_truth(c, "train")) throw UsageError("train-author: paths.train_truth is not set");
  const auto roles = assign_roles(convs, truth_for(c, "train"));
  const auto units = make_author_units(convs, &roles);
  std::vector<TokenLines> texts;
  texts.reserve(units.size());
  for (const auto& u : units) texts.push_back(u.lines);
  Rng rng(derive_seed(c.seed, "train-author.init"));
  auto model = ShallowModel<float>::create(
      build_feature_vocab(texts, c.author.min_feature_freq, c.author.bigrams), c.author.dim, rng);
  AuthorTrainConfig tc;
  tc.epochs = c.author.epochs;
  tc.lr = c.author.lr;
  tc.normal_ratio = c.author.normal_ratio;
  tc.seed = derive_seed(c.seed, "train-author.order");
  std::ostringstream epochs;
  for (const auto& e : train_author(model, units, tc)) {
    epochs << e.line() << '\n';
    log << "train-author: " << e.line() << '\n';
  }
  write_text(out_path(c, artifact::kAuthorLog), epochs.str());
  save_model(model, out_path(c, artifact::kAuthor));
  log << "train-author: " << model.vocab.size() << " features, " << units.size() << " units\n";
}

void stage_score_authors(const PipelineConfig& c, std::ostream& log) {
  const auto model = load_author_model(require(c, artifact::kAuthor, "score-authors"));
  const auto verdicts = score_authors(model, make_author_units(load_split(c, evaluation_split(c), "score-authors")));
  std::ostringstream out;
  write_author_scores(out, verdicts);
  write_text(out_path(c, artifact::kScores), out.str());
  log << "score-authors: " << verdicts.size() << " authors scored\n";
}

void stage_identify(const PipelineConfig& c, std::ostream& log) {
  const std::string stage = "identify";
  const auto split = evaluation_split(c);
  std::ifstream verdict_in(require(c, artifact::kVerdicts, stage));
  const auto verdicts = parse_verdicts(verdict_in);
  std::ifstream score_in(require(c, artifact::kScores, stage));
  const auto scores = parse_author_scores(score_in);
  const auto convs = load_split(c, split, stage);

  std::set<std::string> suspicious;
  for (const auto& v : verdicts) {
    if (v.positive) suspicious.insert(v.conversation_id);
  }
  std::vector<Conversation> plain;
  plain.reserve(convs.size());
  for (const auto& lc : convs) plain.push_back(lc.conversation);
  const auto found = identify_predators(suspicious, scores, plain);
  std::ostringstream ids;
  write_id_list(ids, found.predators);
  write_text(out_path(c, artifact::kPredators), ids.str());
  for (const auto& a : found.anomalies) log << stage << ": conversation " << a << " has no scored participant\n";

  std::ostringstream report;
  for (const auto& [name, file] : {std::pair{"train", artifact::kTrainFilter}, std::pair{"test", artifact::kTestFilter}}) {
    if (fs::exists(out_path(c, file))) report << "Filtering (" << name << ")\n" << read_text(out_path(c, file)) << '\n';
  }
  if (fs::exists(out_path(c, artifact::kLmEval))) {
    report << "Language model\n" << read_text(out_path(c, artifact::kLmEval)) << '\n';
  }
  report << "Detection (" << split << ")\n";
  report << "suspicious conversations: " << suspicious.size() << " of " << verdicts.size() << '\n';
  report << "predators identified: " << found.predators.size() << '\n';
  report << "anomalies: " << found.anomalies.size() << "\n\n";
  if (has_truth(c, split)) {
    std::set<std::string> conv_ids;
    std::set<std::string> positive_ids;
    std::set<std::string> authors = truth_for(c, split);
    const auto truth = authors;
    for (const auto& lc : convs) {
      if (lc.positive) positive_ids.insert(lc.conversation.id);
      for (const auto& m : lc.conversation.messages) authors.insert(m.author);
    }
    for (const auto& v : verdicts) conv_ids.insert(v.conversation_id);
    std::set<std::string> relevant;
    for (const auto& id : positive_ids) {
      if (conv_ids.count(id)) relevant.insert(id);
    }
    report << "Evaluation (" << split << ")\n";
    report << evaluation_table({{"SCD conversations", confusion(suspicious, relevant, conv_ids)},
                                {"SPI predators", confusion(found.predators, truth, authors)}});
  }
  write_text(out_path(c, artifact::kReport), report.str());
  log << stage << ": " << found.predators.size() << " predators flagged\n";
}

using StageFn = std::function<void(const PipelineConfig&, std::ostream&)>;

const std::vector<std::pair<std::string, StageFn>>& stage_table() {
  static const std::vector<std::pair<std::string, StageFn>> table = {
      {"preprocess", stage_preprocess},     {"build-vocab", stage_build_vocab},
      {"train-lm", stage_train_lm},         {"eval-lm", stage_eval_lm},
      {"vectorize", stage_vectorize},       {"train-scd", stage_train_scd},
      {"eval-scd", stage_eval_scd},         {"train-author", stage_train_author},
      {"score-authors", stage_score_authors}, {"identify", stage_identify},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : stage_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string evaluation_split(const PipelineConfig& config) {
  return config.paths.test_corpus.empty() ? "train" : "test";
}

void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log) {
  for (const auto& [name, fn] : stage_table()) {
    if (name == stage) {
      fs::create_directories(config.paths.out_dir);
      fn(config, log);
      return;
    }
  }
  throw UsageError("unknown stage " + stage);
}

void run_pipeline(const PipelineConfig& config, std::ostream& log) {
  for (const auto& name : pipeline_stages()) run_stage(name, config, log);
}

void run_synth(const PipelineConfig& config, std::ostream& log) {
  fs::create_directories(config.paths.out_dir);
  auto one = [&](const char* stage, std::size_t n, const char* xml, const char* truth) {
    SynthSpec spec;
    spec.seed = derive_seed(config.seed, stage);
    spec.pool_seed = derive_seed(config.seed, "synth.pools");
    spec.conversations = n;
    spec.predator_fraction = config.synth.predator_fraction;
    spec.marker_density = config.synth.marker_density;
    spec.victim_marker_density = config.synth.victim_marker_density;
    spec.noise_rate = config.synth.noise_rate;
    const auto corpus = generate(spec);
    write_synth_corpus(corpus, out_path(config, xml), out_path(config, truth));
    log << "synth: " << out_path(config, xml).string() << " (" << n << " conversations, "
        << corpus.predators.size() << " predators)\n";
  };
  one("synth.train", config.synth.conversations, artifact::kSynthTrain, artifact::kSynthTrainTruth);
  if (config.synth.test_conversations > 0) {
    one("synth.test", config.synth.test_conversations, artifact::kSynthTest, artifact::kSynthTestTruth);
  }
}

void write_verdicts(std::ostream& out, const std::vector<VerdictLine>& verdicts) {
  for (const auto& v : verdicts) {
    out << v.conversation_id << '\t' << fixed(v.max_probability, 6) << '\t' << (v.positive ? "positive" : "negative")
        << '\n';
  }
}

std::vector<VerdictLine> parse_verdicts(std::istream& in) {
  std::vector<VerdictLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    VerdictLine v;
    std::string verdict;
    if (!std::getline(fields, v.conversation_id, '\t') || !(fields >> v.max_probability >> verdict) ||
        (verdict != "positive" && verdict != "negative")) {
      throw FormatError("verdicts: malformed line " + std::to_string(line_no));
    }
    v.positive = verdict == "positive";
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace sentinel
