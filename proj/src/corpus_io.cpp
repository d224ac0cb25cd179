#include "sentinel/corpus_io.hpp"

#include <expat.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sentinel/errors.hpp"
#include "sentinel/preprocessing.hpp"

namespace sentinel {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

enum class Field { None, Author, Time, Text };

struct PanHandler {
  ParsedCorpus result;
  bool in_conversation = false;
  bool conversation_valid = false;
  Conversation current;
  std::unordered_set<std::size_t> seen_lines;

  bool in_message = false;
  std::string message_error;
  bool has_author = false;
  Message message;
  Field field = Field::None;
  std::string buffer;

  static const char* attr(const XML_Char** atts, const char* name) {
    for (int i = 0; atts[i] != nullptr; i += 2) {
      if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
    }
    return nullptr;
  }

  void start(const char* name, const XML_Char** atts) {
    if (std::strcmp(name, "conversation") == 0) {
      in_conversation = true;
      current = Conversation{};
      seen_lines.clear();
      const char* id = attr(atts, "id");
      conversation_valid = id != nullptr && *id != '\0';
      if (conversation_valid) {
        current.id = id;
      } else {
        result.skipped.push_back({"", 0, "conversation without id"});
      }
    } else if (std::strcmp(name, "message") == 0 && in_conversation) {
      in_message = true;
      has_author = false;
      message = Message{};
      message_error.clear();
      const char* line = attr(atts, "line");
      std::size_t value = 0;
      if (line == nullptr) {
        message_error = "message without line attribute";
      } else {
        const char* end = line + std::strlen(line);
        auto [ptr, ec] = std::from_chars(line, end, value);
        if (ec != std::errc() || ptr != end || value == 0) {
          message_error = std::string("invalid line attribute '") + line + "'";
        }
      }
      message.line_no = value;
    } else if (in_message) {
      if (std::strcmp(name, "author") == 0) {
        field = Field::Author;
      } else if (std::strcmp(name, "time") == 0) {
        field = Field::Time;
      } else if (std::strcmp(name, "text") == 0) {
        field = Field::Text;
      }
      buffer.clear();
    }
  }

  void end(const char* name) {
    if (std::strcmp(name, "conversation") == 0 && in_conversation) {
      in_conversation = false;
      if (conversation_valid) {
        std::stable_sort(current.messages.begin(), current.messages.end(),
                         [](const Message& a, const Message& b) { return a.line_no < b.line_no; });
        result.conversations.push_back(std::move(current));
      }
    } else if (std::strcmp(name, "message") == 0 && in_message) {
      in_message = false;
      if (message_error.empty() && (!has_author || message.author.empty())) message_error = "message without author";
      if (message_error.empty() && !seen_lines.insert(message.line_no).second) {
        message_error = "duplicate line number";
      }
      if (!message_error.empty()) {
        result.skipped.push_back({current.id, message.line_no, message_error});
      } else if (conversation_valid) {
        current.messages.push_back(std::move(message));
      }
    } else if (in_message && field != Field::None) {
      switch (field) {
        case Field::Author:
          message.author = trim(buffer);
          has_author = true;
          break;
        case Field::Time:
          message.time = trim(buffer);
          break;
        case Field::Text:
          message.text = buffer;
          break;
        case Field::None:
          break;
      }
      field = Field::None;
    }
  }

  void chars(const XML_Char* s, int len) {
    if (field != Field::None) buffer.append(s, static_cast<std::size_t>(len));
  }
};

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

void escape_xml(std::ostream& out, const std::string& s) {
  for (char c : s) {
    switch (c) {
      case '&': out << "&amp;"; break;
      case '<': out << "&lt;"; break;
      case '>': out << "&gt;"; break;
      case '"': out << "&quot;"; break;
      case '\'': out << "&apos;"; break;
      case '\r': out << "&#13;"; break;
      default: out << c;
    }
  }
}

}  // namespace

ParsedCorpus parse_pan_corpus(std::istream& in) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error("failed to create XML parser");
  PanHandler handler;
  XML_SetUserData(parser.get(), &handler);
  XML_SetElementHandler(
      parser.get(),
      [](void* ud, const XML_Char* name, const XML_Char** atts) { static_cast<PanHandler*>(ud)->start(name, atts); },
      [](void* ud, const XML_Char* name) { static_cast<PanHandler*>(ud)->end(name); });
  XML_SetCharacterDataHandler(parser.get(), [](void* ud, const XML_Char* s, int len) {
    static_cast<PanHandler*>(ud)->chars(s, len);
  });

  std::array<char, 1 << 16> chunk{};
  bool done = false;
  while (!done) {
    in.read(chunk.data(), chunk.size());
    const auto got = in.gcount();
    done = got < static_cast<std::streamsize>(chunk.size());
    if (XML_Parse(parser.get(), chunk.data(), static_cast<int>(got), done) == XML_STATUS_ERROR) {
      throw ParseError(std::string("malformed corpus XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                       static_cast<std::size_t>(XML_GetCurrentByteIndex(parser.get())));
    }
  }
  return std::move(handler.result);
}

ParsedCorpus parse_pan_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return parse_pan_corpus(in);
}

void write_pan_corpus(std::ostream& out, const std::vector<Conversation>& conversations) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<conversations>\n";
  for (const auto& conv : conversations) {
    out << "<conversation id=\"";
    escape_xml(out, conv.id);
    out << "\">\n";
    for (const auto& m : conv.messages) {
      out << "<message line=\"" << m.line_no << "\">\n<author>";
      escape_xml(out, m.author);
      out << "</author>\n<time>";
      escape_xml(out, m.time);
      out << "</time>\n<text>";
      escape_xml(out, m.text);
      out << "</text>\n</message>\n";
    }
    out << "</conversation>\n";
  }
  out << "</conversations>\n";
}

std::string serialize_pan_corpus(const std::vector<Conversation>& conversations) {
  std::ostringstream out;
  write_pan_corpus(out, conversations);
  return out.str();
}

void write_pan_corpus_file(const std::filesystem::path& path, const std::vector<Conversation>& conversations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus " + path.string());
  write_pan_corpus(out, conversations);
  if (!out) throw IoError("failed writing corpus " + path.string());
}

std::set<std::string> parse_ground_truth(std::istream& in) {
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

std::set<std::string> parse_ground_truth_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth " + path.string());
  return parse_ground_truth(in);
}

void write_id_list(std::ostream& out, const std::set<std::string>& ids) {
  for (const auto& id : ids) out << id << '\n';
}

std::vector<Review> load_review_tree(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<Review> reviews;
  for (const auto& [dir, label] : {std::pair{"neg", Polarity::Negative}, std::pair{"pos", Polarity::Positive}}) {
    const fs::path sub = root / dir;
    if (!fs::is_directory(sub)) throw ConfigError("review tree " + root.string() + " has no " + dir + "/ directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(sub)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      if (!in) throw IoError("cannot read review " + f.string());
      std::ostringstream text;
      text << in.rdbuf();
      reviews.push_back({text.str(), label, f});
    }
  }
  return reviews;
}

std::vector<LabeledConversation> label_conversations(const std::vector<Conversation>& conversations,
                                                     const std::set<std::string>& predator_ids) {
  std::vector<LabeledConversation> out;
  out.reserve(conversations.size());
  for (const auto& conv : conversations) {
    const bool positive = std::any_of(conv.messages.begin(), conv.messages.end(),
                                      [&](const Message& m) { return predator_ids.count(m.author) != 0; });
    out.push_back({conv, positive});
  }
  return out;
}

FilterReport::Counts count_corpus(const std::vector<LabeledConversation>& conversations,
                                  const std::set<std::string>& predator_ids) {
  FilterReport::Counts counts;
  std::set<std::string> authors;
  for (const auto& lc : conversations) {
    (lc.positive ? counts.positive : counts.negative) += 1;
    for (const auto& m : lc.conversation.messages) authors.insert(m.author);
  }
  for (const auto& a : authors) (predator_ids.count(a) ? counts.predators : counts.non_predators) += 1;
  return counts;
}

std::string FilterReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Type" << std::right << std::setw(12) << "Original" << std::setw(12)
      << "Filtered" << '\n';
  auto row = [&](const char* name, std::size_t a, std::size_t b) {
    out << std::left << std::setw(16) << name << std::right << std::setw(12) << a << std::setw(12) << b << '\n';
  };
  row("Positive", original.positive, filtered.positive);
  row("Negative", original.negative, filtered.negative);
  row("Non-predators", original.non_predators, filtered.non_predators);
  row("Predators", original.predators, filtered.predators);
  return out.str();
}

FilterResult filter_corpus(const std::vector<LabeledConversation>& conversations,
                           const std::set<std::string>& predator_ids) {
  FilterResult result;
  result.report.original = count_corpus(conversations, predator_ids);
  for (const auto& lc : conversations) {
    LabeledConversation kept{{lc.conversation.id, {}}, lc.positive};
    for (const auto& m : lc.conversation.messages) {
      if (!tokenize(m.text).empty()) kept.conversation.messages.push_back(m);
    }
    if (!kept.conversation.messages.empty()) result.conversations.push_back(std::move(kept));
  }
  result.report.filtered = count_corpus(result.conversations, predator_ids);
  return result;
}

std::vector<AuthorDocument> group_by_author(const std::vector<LabeledConversation>& conversations) {
  std::vector<AuthorDocument> docs;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& lc : conversations) {
    for (const auto& m : lc.conversation.messages) {
      auto [it, inserted] = index.emplace(m.author, docs.size());
      if (inserted) docs.push_back({m.author, {}});
      auto& doc = docs[it->second];
      if (doc.conversations.empty() || doc.conversations.back().conversation_id != lc.conversation.id) {
        auto existing = std::find_if(doc.conversations.begin(), doc.conversations.end(),
                                     [&](const AuthorConversation& ac) { return ac.conversation_id == lc.conversation.id; });
        if (existing == doc.conversations.end()) {
          doc.conversations.push_back({lc.conversation.id, {}});
        } else {
          existing->lines.push_back(m.text);
          continue;
        }
      }
      doc.conversations.back().lines.push_back(m.text);
    }
  }
  return docs;
}

std::map<std::string, AuthorRole> assign_roles(const std::vector<LabeledConversation>& conversations,
                                               const std::set<std::string>& predator_ids) {
  std::map<std::string, AuthorRole> roles;
  for (const auto& lc : conversations) {
    for (const auto& m : lc.conversation.messages) {
      auto& role = roles.try_emplace(m.author, AuthorRole::Normal).first->second;
      if (predator_ids.count(m.author)) {
        role = AuthorRole::Predator;
      } else if (lc.positive) {
        role = AuthorRole::Victim;
      }
    }
  }
  return roles;
}

}  // namespace sentinel
