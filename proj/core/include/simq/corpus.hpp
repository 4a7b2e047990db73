#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "simq/common.hpp"

namespace simq {

inline constexpr std::string_view kUnknownTag = "unknown";

struct Question {
  QuestionId id = 0;
  std::string text;
  std::vector<std::string> tokens;
  std::string category{kUnknownTag};
  std::string intention{kUnknownTag};
  bool answered = true;
  /// Synthetic-corpus provenance: which template instance produced the
  /// question. Empty for ingested real data.
  std::string family;

  friend bool operator==(const Question&, const Question&) = default;
};

/// Id-keyed, insertion-ordered question store. Immutable once built; all
/// const members are safe for concurrent readers.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::set<std::string> categories, std::set<std::string> intentions,
         std::string source);

  /// Adds a question. Throws DataError on duplicate id or on a category /
  /// intention outside the declared sets.
  void add(Question q);

  const Question& at(QuestionId id) const;
  const Question* find(QuestionId id) const;
  bool contains(QuestionId id) const { return by_id_.contains(id); }

  std::span<const Question> questions() const { return questions_; }
  std::size_t size() const { return questions_.size(); }
  bool empty() const { return questions_.empty(); }

  const std::set<std::string>& categories() const { return categories_; }
  const std::set<std::string>& intentions() const { return intentions_; }
  const std::string& source() const { return source_; }
  void set_source(std::string s) { source_ = std::move(s); }

  void declare_category(const std::string& c) { categories_.insert(c); }
  void declare_intention(const std::string& i) { intentions_.insert(i); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.questions_ == b.questions_ && a.categories_ == b.categories_ &&
           a.intentions_ == b.intentions_ && a.source_ == b.source_;
  }

 private:
  std::vector<Question> questions_;
  std::unordered_map<QuestionId, std::size_t> by_id_;
  std::set<std::string> categories_{std::string(kUnknownTag)};
  std::set<std::string> intentions_{std::string(kUnknownTag)};
  std::string source_;
};

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

struct RecordError {
  std::size_t line = 0;
  std::string message;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<RecordError> errors;
};

struct IngestOptions {
  /// When set, every record's text is tokenized at ingest; a record whose
  /// tokenization fails (e.g. empty text) is rejected. When unset, tokens
  /// stored in the file are kept as-is.
  Tokenizer tokenizer;
};

/// Reads a line-delimited corpus file. Accepts both raw record files and
/// files written by write_corpus (which start with a header record).
///
/// Malformed records are skipped and reported with their line number.
/// A duplicate id is fatal: DataError naming the id and both lines.
Corpus ingest(const std::filesystem::path& path, const IngestOptions& options = {},
              IngestReport* report = nullptr);
Corpus ingest_text(std::string_view contents, const IngestOptions& options = {},
                   IngestReport* report = nullptr, std::string source = {});

/// Copy of `corpus` with every question's tokens recomputed from its text.
Corpus tokenize_corpus(const Corpus& corpus, const Tokenizer& tokenizer);

/// Header record + one record per question, in insertion order.
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic corpora

/// One slot-fillable concept: a set of interchangeable surface forms with an
/// optional medical entity type ("symptom", "disease", ...). Concepts with a
/// type become entity dictionary entries; concepts with several forms become
/// synonym groups.
struct BankConcept {
  std::string name;
  std::vector<std::string> forms;
  std::string entity_type;  // empty: not a medical entity
};

/// A topic ties together concepts that co-occur (a disease with its symptoms
/// and drugs). Slot fillers are drawn from the topic's list for that slot,
/// falling back to the bank-wide slot list.
struct BankTopic {
  std::string name;
  std::unordered_map<std::string, std::vector<std::string>> slots;
};

struct BankTemplate {
  std::string id;
  std::string pattern;  // literal words and {SLOT} references
  std::string category;
  std::string intention;
  double weight = 1.0;
  bool answered = true;
};

struct TemplateBank {
  std::vector<BankConcept> concepts;
  std::unordered_map<std::string, std::vector<std::string>> slots;
  std::vector<BankTopic> topics;
  std::vector<BankTemplate> templates;

  const BankConcept* concept_named(std::string_view name) const;
};

TemplateBank load_template_bank(const std::filesystem::path& path);
TemplateBank parse_template_bank(std::string_view json_text);

/// Deterministic in (n, seed, bank). Question ids are 1..n. Each question's
/// family is "<template id>|<topic>|<concept choices>"; template weights
/// drive the template mix. Text is left untokenized.
Corpus synth_corpus(std::size_t n, std::uint64_t seed, const TemplateBank& bank);

/// Template id part of a synthetic family tag.
std::string_view family_template(std::string_view family);

}  // namespace simq
