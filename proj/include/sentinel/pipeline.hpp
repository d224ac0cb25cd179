#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "sentinel/config.hpp"
#include "sentinel/corpus_io.hpp"

namespace sentinel {

// File names inside the output directory.
namespace artifact {
inline constexpr const char* kTrainNormalized = "train.normalized.xml";
inline constexpr const char* kTestNormalized = "test.normalized.xml";
inline constexpr const char* kTrainFilter = "train.filter.txt";
inline constexpr const char* kTestFilter = "test.filter.txt";
inline constexpr const char* kVocab = "vocab.bin";
inline constexpr const char* kLm = "lm.bin";
inline constexpr const char* kLmLog = "lm.log";
inline constexpr const char* kLmEval = "lm_eval.txt";
inline constexpr const char* kTrainVectors = "train.vectors.bin";
inline constexpr const char* kEvalVectors = "eval.vectors.bin";
inline constexpr const char* kScd = "scd.bin";
inline constexpr const char* kScdLog = "scd.log";
inline constexpr const char* kVerdicts = "scd_verdicts.tsv";
inline constexpr const char* kAuthor = "author.bin";
inline constexpr const char* kAuthorLog = "author.log";
inline constexpr const char* kScores = "author_scores.tsv";
inline constexpr const char* kPredators = "predators.txt";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kSynthTrain = "synth_train.xml";
inline constexpr const char* kSynthTrainTruth = "synth_train_truth.txt";
inline constexpr const char* kSynthTest = "synth_test.xml";
inline constexpr const char* kSynthTestTruth = "synth_test_truth.txt";
}  // namespace artifact

// Stage names in pipeline order, as accepted by run_stage.
const std::vector<std::string>& pipeline_stages();

// Runs one stage. Progress lines go to `log`. Inputs missing from the output
// directory raise UsageError naming the stage that produces them.
void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log);

// Every stage from preprocess through identify.
void run_pipeline(const PipelineConfig& config, std::ostream& log);

// Writes synthetic train and test corpora with their ground truth.
void run_synth(const PipelineConfig& config, std::ostream& log);

// The corpus split that evaluation stages read: "test" when a test corpus is
// configured, otherwise "train".
std::string evaluation_split(const PipelineConfig& config);

struct VerdictLine {
  std::string conversation_id;
  double max_probability = 0.0;
  bool positive = false;
};

void write_verdicts(std::ostream& out, const std::vector<VerdictLine>& verdicts);
std::vector<VerdictLine> parse_verdicts(std::istream& in);

}  // namespace sentinel
