#include "simq/datagen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>

namespace simq {

using nlohmann::json;

namespace {

bool disjoint(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  // both sorted
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j)
      ++i;
    else
      ++j;
  }
  return true;
}

std::size_t sample_disjoint(std::size_t anchor_pos, std::span<const std::vector<std::string>> ents,
                            Rng& rng, std::size_t max_attempts) {
  const auto n = ents.size();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const auto k = rng.index(n);
    if (k == anchor_pos) continue;
    if (disjoint(ents[anchor_pos], ents[k])) return k;
  }
  throw DataError("no entity-disjoint negative found after " + std::to_string(max_attempts) + " attempts");
}

}  // namespace

void GenConfig::validate() const {
  if (!(replace_prob >= 0.0 && replace_prob <= 1.0)) throw ArgumentError("replace_prob must be in [0,1]");
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw ArgumentError("drop_prob must be in [0,1]");
  if (negatives_per_question < 1) throw ArgumentError("negatives_per_question must be >= 1");
  if (max_attempts < 1) throw ArgumentError("max_attempts must be >= 1");
}

std::vector<std::string> gen_positive(std::span<const std::string> tokens, const SynonymDictionary& synonyms,
                                      const EntityDictionary& entities, const GenConfig& config, Rng& rng) {
  if (tokens.empty()) throw ArgumentError("gen_positive: empty token list");
  std::vector<bool> is_entity(tokens.size(), false);
  for (const auto& m : find_entities(tokens, entities))
    for (auto k = m.begin; k < m.end; ++k) is_entity[k] = true;

  std::vector<std::string> replaced(tokens.begin(), tokens.end());
  for (auto& tok : replaced) {
    const auto group = synonyms.group_of(tok);
    if (!group || !rng.bernoulli(config.replace_prob)) continue;
    const auto& members = synonyms.group(*group);
    std::vector<const std::string*> others;
    for (const auto& m : members)
      if (m != tok) others.push_back(&m);
    if (!others.empty()) tok = *others[rng.index(others.size())];
  }

  std::vector<std::string> out;
  out.reserve(replaced.size());
  for (std::size_t k = 0; k < replaced.size(); ++k) {
    // the draw happens for every token so the stream does not depend on
    // which tokens are protected
    const bool drop = rng.bernoulli(config.drop_prob);
    if (is_entity[k] || !drop) out.push_back(replaced[k]);
  }
  if (out.empty()) out.push_back(replaced[rng.index(replaced.size())]);
  return out;
}

std::vector<std::string> entity_ids(std::span<const std::string> tokens, const EntityDictionary& entities) {
  std::vector<std::string> ids;
  for (const auto& m : find_entities(tokens, entities)) ids.push_back(m.entity.canonical_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

const Question& gen_negative(const Question& anchor, const Corpus& corpus, const EntityDictionary& entities,
                             Rng& rng, std::size_t max_attempts) {
  if (corpus.size() < 2) throw DataError("gen_negative: corpus needs at least 2 questions");
  const auto anchor_ids = entity_ids(anchor.tokens, entities);
  const auto qs = corpus.questions();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const auto& cand = qs[rng.index(qs.size())];
    if (cand.id == anchor.id) continue;
    if (disjoint(anchor_ids, entity_ids(cand.tokens, entities))) return cand;
  }
  throw DataError("no entity-disjoint negative found after " + std::to_string(max_attempts) + " attempts");
}

std::vector<TrainingPair> generate(const Corpus& corpus, std::size_t n_anchors, const SynonymDictionary& synonyms,
                                   const EntityDictionary& entities, const GenConfig& config) {
  config.validate();
  if (n_anchors == 0) return {};
  if (n_anchors > corpus.size())
    throw DataError("generate: " + std::to_string(n_anchors) + " anchors requested from a corpus of " +
                    std::to_string(corpus.size()));

  const auto qs = corpus.questions();
  for (const auto& q : qs)
    if (q.tokens.empty()) throw DataError("generate: question " + std::to_string(q.id) + " is not tokenized");

  std::vector<std::vector<std::string>> ents;
  ents.reserve(qs.size());
  for (const auto& q : qs) ents.push_back(entity_ids(q.tokens, entities));

  // anchors: partial Fisher-Yates over corpus positions
  std::vector<std::size_t> positions(qs.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Rng pick(config.seed);
  for (std::size_t k = 0; k < n_anchors; ++k) std::swap(positions[k], positions[k + pick.index(qs.size() - k)]);

  std::vector<TrainingPair> out;
  out.reserve(pair_count(n_anchors, config.negatives_per_question));
  for (std::size_t k = 0; k < n_anchors; ++k) {
    const auto pos = positions[k];
    const auto& anchor = qs[pos];
    Rng rng(Rng::derive(config.seed, anchor.id));
    out.push_back({anchor.tokens, gen_positive(anchor.tokens, synonyms, entities, config, rng), 1, anchor.id});
    for (std::size_t j = 0; j < config.negatives_per_question; ++j) {
      const auto neg = sample_disjoint(pos, ents, rng, config.max_attempts);
      out.push_back({anchor.tokens, qs[neg].tokens, 0, anchor.id});
    }
  }
  return out;
}

std::string serialize_pairs(std::span<const TrainingPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["q"] = p.q;
    j["q_prime"] = p.q_prime;
    j["y"] = p.y;
    j["anchor_id"] = p.anchor_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrainingPair> parse_pairs(std::string_view text) {
  std::vector<TrainingPair> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = json::parse(line);
      TrainingPair p;
      p.q = j.at("q").get<std::vector<std::string>>();
      p.q_prime = j.at("q_prime").get<std::vector<std::string>>();
      p.y = j.at("y").get<int>();
      p.anchor_id = j.value("anchor_id", QuestionId{0});
      if (p.y != 0 && p.y != 1) throw DataError("label must be 0 or 1");
      if (p.q.empty() || p.q_prime.empty()) throw DataError("empty question in pair");
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError("pair file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("pair file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_pairs(std::span<const TrainingPair> pairs, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_pairs(pairs));
}

std::vector<TrainingPair> read_pairs(const std::filesystem::path& path) { return parse_pairs(read_file(path)); }

}  // namespace simq
