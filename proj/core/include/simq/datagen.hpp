#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simq/corpus.hpp"
#include "simq/encoder.hpp"
#include "simq/text.hpp"

namespace simq {

struct GenConfig {
  double replace_prob = 0.3;
  double drop_prob = 0.1;
  std::size_t negatives_per_question = 3;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 1000;

  /// Throws ArgumentError unless probabilities are in [0,1] and
  /// negatives_per_question >= 1.
  void validate() const;
};

/// Perturbed near-duplicate of `tokens`. Each token is first replaced by a
/// uniformly chosen other member of its synonym group with probability
/// replace_prob, then dropped with probability drop_prob unless it belongs to
/// a medical entity. Never returns an empty list: if everything was dropped,
/// one uniformly chosen token is kept.
std::vector<std::string> gen_positive(std::span<const std::string> tokens, const SynonymDictionary& synonyms,
                                      const EntityDictionary& entities, const GenConfig& config, Rng& rng);

/// Canonical entity ids mentioned in `tokens`, sorted and unique.
std::vector<std::string> entity_ids(std::span<const std::string> tokens, const EntityDictionary& entities);

/// Uniformly samples a corpus question other than the anchor that shares no
/// canonical entity with it. Throws DataError("no entity-disjoint negative
/// found") after `max_attempts` rejections.
const Question& gen_negative(const Question& anchor, const Corpus& corpus, const EntityDictionary& entities,
                             Rng& rng, std::size_t max_attempts = 1000);

/// n_anchors questions sampled without replacement; each yields one positive
/// pair (y=1) followed by negatives_per_question negative pairs (y=0).
/// Every anchor draws from its own stream derived from (seed, anchor id), so
/// the output does not depend on processing order.
std::vector<TrainingPair> generate(const Corpus& corpus, std::size_t n_anchors, const SynonymDictionary& synonyms,
                                   const EntityDictionary& entities, const GenConfig& config);

/// Expected pair count for a generation run.
constexpr std::size_t pair_count(std::size_t n_anchors, std::size_t negatives_per_question) {
  return n_anchors * (1 + negatives_per_question);
}

/// Line-delimited {"q": [...], "q_prime": [...], "y": 0|1, "anchor_id": N}.
std::string serialize_pairs(std::span<const TrainingPair> pairs);
std::vector<TrainingPair> parse_pairs(std::string_view text);
void write_pairs(std::span<const TrainingPair> pairs, const std::filesystem::path& path);
std::vector<TrainingPair> read_pairs(const std::filesystem::path& path);

}  // namespace simq
