#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sentinel {

struct Message {
  std::string author;
  std::size_t line_no = 0;
  std::string time;  // opaque, preserved verbatim
  std::string text;
  bool operator==(const Message&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Message> messages;  // ascending line_no
  bool operator==(const Conversation&) const = default;
};

// A message or conversation dropped during parsing, and why.
struct RecordError {
  std::string conversation_id;
  std::size_t line_no = 0;  // 0 when unknown
  std::string reason;
};

struct ParsedCorpus {
  std::vector<Conversation> conversations;
  std::vector<RecordError> skipped;
};

// PAN chat-corpus XML:
//   <conversations>
//     <conversation id="..">
//       <message line="1"><author>..</author><time>..</time><text>..</text></message>
// Malformed XML throws ParseError (with byte offset). Messages without an
// author, without a valid line number, or repeating a line number are
// skipped and reported.
ParsedCorpus parse_pan_corpus(std::istream& in);
ParsedCorpus parse_pan_corpus_file(const std::filesystem::path& path);

void write_pan_corpus(std::ostream& out, const std::vector<Conversation>& conversations);
std::string serialize_pan_corpus(const std::vector<Conversation>& conversations);
void write_pan_corpus_file(const std::filesystem::path& path, const std::vector<Conversation>& conversations);

// One author id per line; trimmed, blank lines skipped, duplicates merged.
std::set<std::string> parse_ground_truth(std::istream& in);
std::set<std::string> parse_ground_truth_file(const std::filesystem::path& path);
void write_id_list(std::ostream& out, const std::set<std::string>& ids);

enum class Polarity { Negative, Positive };

struct Review {
  std::string text;
  Polarity label;
  std::filesystem::path path;
};

// root/pos/*.txt and root/neg/*.txt, ordered by relative path.
std::vector<Review> load_review_tree(const std::filesystem::path& root);

struct LabeledConversation {
  Conversation conversation;
  bool positive = false;
};

// Positive iff any message author is a known predator.
std::vector<LabeledConversation> label_conversations(const std::vector<Conversation>& conversations,
                                                     const std::set<std::string>& predator_ids);

// Conversation and author counts before and after filtering.
struct FilterReport {
  struct Counts {
    std::size_t positive = 0;
    std::size_t negative = 0;
    std::size_t non_predators = 0;
    std::size_t predators = 0;
  };
  Counts original;
  Counts filtered;

  std::string to_table() const;
};

FilterReport::Counts count_corpus(const std::vector<LabeledConversation>& conversations,
                                  const std::set<std::string>& predator_ids);

struct FilterResult {
  std::vector<LabeledConversation> conversations;
  FilterReport report;
};

// Input text must already be normalized. Messages with no tokens are
// removed (so participants left with no lines disappear) and conversations
// left empty are dropped.
FilterResult filter_corpus(const std::vector<LabeledConversation>& conversations,
                           const std::set<std::string>& predator_ids);

struct AuthorConversation {
  std::string conversation_id;
  std::vector<std::string> lines;
};

struct AuthorDocument {
  std::string author;
  std::vector<AuthorConversation> conversations;  // first-appearance order
};

// One document per author, authors in order of first appearance.
std::vector<AuthorDocument> group_by_author(const std::vector<LabeledConversation>& conversations);

enum class AuthorRole { Predator = 0, Victim = 1, Normal = 2 };

// Predator: listed in the ground truth. Victim: any other participant of a
// positive conversation. Normal: participates only in negative conversations.
std::map<std::string, AuthorRole> assign_roles(const std::vector<LabeledConversation>& conversations,
                                               const std::set<std::string>& predator_ids);

}  // namespace sentinel
