#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simq/corpus.hpp"
#include "simq/text.hpp"

namespace simq {

/// Which entity types count as lookup keywords for questions of a given
/// intention.
struct KeywordRule {
  std::string intention;
  std::vector<EntityType> evidence_types;
  std::vector<EntityType> excluded_types;

  friend bool operator==(const KeywordRule&, const KeywordRule&) = default;
};

class RuleSet {
 public:
  RuleSet() = default;
  /// Throws DataError on overlapping evidence/excluded types or a duplicate
  /// intention.
  explicit RuleSet(std::vector<KeywordRule> rules);

  const KeywordRule* find(std::string_view intention) const;
  std::span<const KeywordRule> rules() const { return rules_; }

  /// Line-delimited {"intention": s, "evidence_types": [...], "excluded_types": [...]}.
  static RuleSet parse(std::string_view jsonl);
  static RuleSet load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::vector<KeywordRule> rules_;
};

/// Canonical ids of the question's entities whose type is an evidence type of
/// the rule for its intention, in order of first mention. Without a rule for
/// the intention (including "unknown") every entity is a keyword.
std::vector<std::string> extract_keywords(const Question& q, const EntityDictionary& entities,
                                          const RuleSet& rules);

struct PostingKey {
  std::string keyword;
  std::string category;
  std::string intention;

  auto operator<=>(const PostingKey&) const = default;
  bool operator==(const PostingKey&) const = default;
};

/// (keyword, category, intention) -> ascending ids of answered questions.
class InvertedIndex {
 public:
  using Postings = std::map<PostingKey, std::vector<QuestionId>>;

  static InvertedIndex build(const Corpus& corpus, const EntityDictionary& entities, const RuleSet& rules);

  const Postings& postings() const { return postings_; }
  /// Empty span when the key is absent.
  std::span<const QuestionId> lookup(const PostingKey& key) const;
  /// Posting lists under `keyword`, optionally restricted to a category.
  template <typename Fn>
  void for_keyword(const std::string& keyword, const std::string* category, Fn&& fn) const {
    auto it = postings_.lower_bound(PostingKey{keyword, category ? *category : std::string(), std::string()});
    for (; it != postings_.end() && it->first.keyword == keyword; ++it) {
      if (category && it->first.category != *category) break;
      fn(it->first, it->second);
    }
  }
  std::size_t size() const { return postings_.size(); }
  bool empty() const { return postings_.empty(); }

  /// Binary: magic "SIMQ-IDX v1", u64 key count, then per key three
  /// length-prefixed strings, a u64 id count and the ids.
  std::string serialize() const;
  static InvertedIndex parse(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

 private:
  Postings postings_;
};

enum class MetaMatch { exact, category_only, keyword_only, none };

std::string_view to_string(MetaMatch m);

struct CandidateSet {
  std::vector<QuestionId> ids;
  std::optional<QuestionId> anchor;  // the query's own id, when it has one
  std::string query_text;
  /// Which rung of the relaxation ladder produced the candidates.
  MetaMatch level = MetaMatch::none;
};

struct RetrieveOptions {
  std::size_t max_candidates = 500;
  /// Stop after the exact (keyword, category, intention) match.
  bool strict_meta = false;
};

/// Union of the postings for the query's keywords under its category and
/// intention. When that is empty the intention constraint is dropped, then
/// the category constraint. The query's own id (if `anchor` is set) is
/// excluded; the result is capped at max_candidates smallest ids.
CandidateSet retrieve(std::span<const std::string> keywords, const std::string& category,
                      const std::string& intention, const InvertedIndex& index, const RetrieveOptions& options = {},
                      std::optional<QuestionId> anchor = std::nullopt);

/// Extracts the query's keywords first.
CandidateSet retrieve(const Question& query, const EntityDictionary& entities, const RuleSet& rules,
                      const InvertedIndex& index, const RetrieveOptions& options = {},
                      std::optional<QuestionId> anchor = std::nullopt);

}  // namespace simq
