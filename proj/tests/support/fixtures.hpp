#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "simq/corpus.hpp"
#include "simq/text.hpp"

namespace simq::testing {

inline std::filesystem::path data_dir() { return SIMQ_DATA_DIR; }

inline const TemplateBank& bank() {
  static const TemplateBank b = load_template_bank(data_dir() / "bank.json");
  return b;
}

inline const EntityDictionary& bank_entity_dict() {
  static const EntityDictionary d = bank_entities(bank());
  return d;
}

inline const SynonymDictionary& bank_synonym_dict() {
  static const SynonymDictionary d = bank_synonyms(bank());
  return d;
}

/// Synthetic corpus tokenized against the bank's entity dictionary.
inline Corpus synth_tokenized(std::size_t n, std::uint64_t seed) {
  return tokenize_corpus(synth_corpus(n, seed, bank()),
                         make_tokenizer(TokenizeMode::dictionary, &bank_entity_dict()));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("simq-" + tag + "-" + std::to_string(std::hash<std::string>{}(tag + std::to_string(::getpid()))));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace simq::testing
