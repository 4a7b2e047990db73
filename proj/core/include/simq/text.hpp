#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "simq/corpus.hpp"

namespace simq {

enum class TokenizeMode { whitespace, dictionary };

enum class EntityType { symptom, disease, drug, body_part, other };

std::string_view to_string(EntityType t);
/// Accepts "symptom", "disease", "drug", "body-part", "other".
EntityType parse_entity_type(std::string_view s);

struct EntityRecord {
  std::string canonical_id;
  EntityType type = EntityType::other;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

/// Surface form -> entity. Surface forms are normalized (lowercase, single
/// spaces) on insertion and matched against token sequences joined by ' '.
class EntityDictionary {
 public:
  void add(std::string_view surface, EntityRecord record);

  const EntityRecord* lookup(std::string_view surface) const;
  /// Longest surface form measured in whitespace-separated words.
  std::size_t max_words() const { return max_words_; }
  /// Longest surface form measured in code points, for unsegmented text.
  std::size_t max_codepoints() const { return max_codepoints_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Sorted by surface form.
  const std::map<std::string, EntityRecord, std::less<>>& entries() const { return entries_; }

  static EntityDictionary load(const std::filesystem::path& path);
  static EntityDictionary parse(std::string_view tsv);
  std::string serialize() const;

 private:
  std::map<std::string, EntityRecord, std::less<>> entries_;
  std::size_t max_words_ = 0;
  std::size_t max_codepoints_ = 0;
};

/// Disjoint groups of mutually substitutable surface forms.
class SynonymDictionary {
 public:
  /// Throws DataError if any form already belongs to another group.
  void add_group(std::vector<std::string> forms);

  std::optional<std::size_t> group_of(std::string_view token) const;
  const std::vector<std::string>& group(std::size_t i) const { return groups_.at(i); }
  std::size_t size() const { return groups_.size(); }

  static SynonymDictionary load(const std::filesystem::path& path);
  static SynonymDictionary parse(std::string_view tsv);
  std::string serialize() const;

 private:
  std::vector<std::vector<std::string>> groups_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Entity dictionary of a template bank: every form of a typed concept maps
/// to the concept name.
EntityDictionary bank_entities(const TemplateBank& bank);
/// One group per concept with two or more forms.
SynonymDictionary bank_synonyms(const TemplateBank& bank);

/// Lowercases ASCII letters, turns sentence punctuation into spaces and
/// collapses whitespace.
std::string normalize_text(std::string_view text);

/// Throws ArgumentError("empty question") when nothing is left after
/// normalization. Dictionary mode merges the longest entity surface forms
/// into single tokens; unsegmented non-ASCII runs are segmented by longest
/// dictionary match, falling back to one token per code point.
std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode,
                                  const EntityDictionary* entities = nullptr);

Tokenizer make_tokenizer(TokenizeMode mode, const EntityDictionary* entities);

struct EntityMatch {
  std::size_t begin = 0;  // token span [begin, end)
  std::size_t end = 0;
  EntityRecord entity;

  friend bool operator==(const EntityMatch&, const EntityMatch&) = default;
};

/// Non-overlapping entity spans, scanning left to right and taking the
/// longest match at each start.
std::vector<EntityMatch> find_entities(std::span<const std::string> tokens,
                                       const EntityDictionary& dict);

class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::size_t kUnkIndex = 0;

  Vocabulary();

  /// Tokens with frequency >= min_count, ordered by frequency descending then
  /// lexicographically, after UNK at index 0. UNK's frequency is the total
  /// count of the excluded tokens.
  static Vocabulary from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                std::size_t min_count);

  /// Ordered token list with unknown frequencies; tokens[0] must be UNK.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t frequency(std::size_t index) const { return freq_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t min_count() const { return min_count_; }
  std::span<const std::string> tokens() const { return tokens_; }
  std::span<const std::size_t> frequencies() const { return freq_; }

  std::vector<std::size_t> indices(std::span<const std::string> tokens) const;

  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.freq_ == b.freq_ && a.min_count_ == b.min_count_;
  }

 private:
  void push(std::string token, std::size_t freq);

  std::vector<std::string> tokens_;
  std::vector<std::size_t> freq_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_count_ = 1;
};

/// Throws DataError when the corpus holds no tokens at all.
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count);

}  // namespace simq
