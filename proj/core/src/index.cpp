#include "simq/index.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <set>
#include <span>

#include "simq/binary_io.hpp"

namespace simq {

using nlohmann::json;

namespace {

constexpr std::string_view kIndexMagic = "SIMQ-IDX v1";

bool contains(const std::vector<EntityType>& v, EntityType t) { return std::find(v.begin(), v.end(), t) != v.end(); }

std::vector<EntityType> parse_types(const json& j) {
  std::vector<EntityType> out;
  for (const auto& t : j) out.push_back(parse_entity_type(t.get<std::string>()));
  return out;
}

}  // namespace

RuleSet::RuleSet(std::vector<KeywordRule> rules) : rules_(std::move(rules)) {
  std::set<std::string> seen;
  for (const auto& r : rules_) {
    if (!seen.insert(r.intention).second) throw DataError("duplicate keyword rule for intention '" + r.intention + "'");
    for (auto t : r.evidence_types)
      if (contains(r.excluded_types, t))
        throw DataError("keyword rule '" + r.intention + "' lists type '" + std::string(to_string(t)) +
                        "' as both evidence and excluded");
  }
}

const KeywordRule* RuleSet::find(std::string_view intention) const {
  for (const auto& r : rules_)
    if (r.intention == intention) return &r;
  return nullptr;
}

RuleSet RuleSet::parse(std::string_view jsonl) {
  std::vector<KeywordRule> rules;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = json::parse(line);
      KeywordRule r;
      r.intention = j.at("intention").get<std::string>();
      r.evidence_types = parse_types(j.value("evidence_types", json::array()));
      r.excluded_types = parse_types(j.value("excluded_types", json::array()));
      rules.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("rule file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("rule file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return RuleSet(std::move(rules));
}

RuleSet RuleSet::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string RuleSet::serialize() const {
  std::string out;
  for (const auto& r : rules_) {
    nlohmann::ordered_json j;
    j["intention"] = r.intention;
    j["evidence_types"] = json::array();
    for (auto t : r.evidence_types) j["evidence_types"].push_back(to_string(t));
    j["excluded_types"] = json::array();
    for (auto t : r.excluded_types) j["excluded_types"].push_back(to_string(t));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> extract_keywords(const Question& q, const EntityDictionary& entities, const RuleSet& rules) {
  const KeywordRule* rule = rules.find(q.intention);
  std::vector<std::string> out;
  for (const auto& m : find_entities(q.tokens, entities)) {
    if (rule) {
      if (contains(rule->excluded_types, m.entity.type)) continue;
      if (!contains(rule->evidence_types, m.entity.type)) continue;
    }
    if (std::find(out.begin(), out.end(), m.entity.canonical_id) == out.end()) out.push_back(m.entity.canonical_id);
  }
  return out;
}

// --- InvertedIndex ----------------------------------------------------------

InvertedIndex InvertedIndex::build(const Corpus& corpus, const EntityDictionary& entities, const RuleSet& rules) {
  InvertedIndex idx;
  for (const auto& q : corpus.questions()) {
    if (!q.answered) continue;
    for (auto& kw : extract_keywords(q, entities, rules))
      idx.postings_[PostingKey{std::move(kw), q.category, q.intention}].push_back(q.id);
  }
  for (auto& [_, ids] : idx.postings_) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return idx;
}

std::span<const QuestionId> InvertedIndex::lookup(const PostingKey& key) const {
  auto it = postings_.find(key);
  if (it == postings_.end()) return {};
  return it->second;
}

std::string InvertedIndex::serialize() const {
  ByteWriter w;
  w.raw(kIndexMagic);
  w.u64(postings_.size());
  for (const auto& [key, ids] : postings_) {
    w.string(key.keyword);
    w.string(key.category);
    w.string(key.intention);
    w.u64(ids.size());
    for (auto id : ids) w.u64(id);
  }
  return w.take();
}

InvertedIndex InvertedIndex::parse(std::string_view bytes) {
  ByteReader in(bytes, "index file");
  check_magic(in, kIndexMagic);
  InvertedIndex idx;
  const auto n = in.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    PostingKey key;
    key.keyword = in.string();
    key.category = in.string();
    key.intention = in.string();
    const auto count = in.u64();
    if (count > in.remaining() / sizeof(std::uint64_t)) throw FormatError("unexpected end of index file");
    std::vector<QuestionId> ids(count);
    for (auto& id : ids) id = in.u64();
    if (!std::is_sorted(ids.begin(), ids.end()) || std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw FormatError("index posting list is not sorted and unique");
    if (!idx.postings_.emplace(std::move(key), std::move(ids)).second)
      throw FormatError("duplicate posting key in index file");
  }
  in.expect_end();
  return idx;
}

void InvertedIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) { return parse(read_file(path)); }

// --- retrieval --------------------------------------------------------------

std::string_view to_string(MetaMatch m) {
  switch (m) {
    case MetaMatch::exact: return "exact";
    case MetaMatch::category_only: return "category-only";
    case MetaMatch::keyword_only: return "keyword-only";
    case MetaMatch::none: return "none";
  }
  return "none";
}

CandidateSet retrieve(std::span<const std::string> keywords, const std::string& category, const std::string& intention,
                      const InvertedIndex& index, const RetrieveOptions& options, std::optional<QuestionId> anchor) {
  CandidateSet out;
  out.anchor = anchor;

  // postings are sorted: merge them, dropping duplicates, until the cap
  std::vector<std::span<const QuestionId>> lists;
  auto take = [&](std::span<const QuestionId> posting) {
    if (!posting.empty()) lists.push_back(posting);
  };
  auto finish = [&](MetaMatch level) {
    std::vector<QuestionId> ids;
    std::vector<std::size_t> pos(lists.size(), 0);
    while (ids.size() < options.max_candidates) {
      std::optional<QuestionId> next;
      for (std::size_t k = 0; k < lists.size(); ++k)
        if (pos[k] < lists[k].size() && (!next || lists[k][pos[k]] < *next)) next = lists[k][pos[k]];
      if (!next) break;
      for (std::size_t k = 0; k < lists.size(); ++k)
        if (pos[k] < lists[k].size() && lists[k][pos[k]] == *next) ++pos[k];
      if (!anchor || *next != *anchor) ids.push_back(*next);
    }
    lists.clear();
    if (ids.empty()) return false;
    out.ids = std::move(ids);
    out.level = level;
    return true;
  };

  for (const auto& kw : keywords) take(index.lookup(PostingKey{kw, category, intention}));
  if (finish(MetaMatch::exact) || options.strict_meta) return out;

  for (const auto& kw : keywords) index.for_keyword(kw, &category, [&](const PostingKey&, const auto& p) { take(p); });
  if (finish(MetaMatch::category_only)) return out;

  for (const auto& kw : keywords) index.for_keyword(kw, nullptr, [&](const PostingKey&, const auto& p) { take(p); });
  finish(MetaMatch::keyword_only);
  return out;
}

CandidateSet retrieve(const Question& query, const EntityDictionary& entities, const RuleSet& rules,
                      const InvertedIndex& index, const RetrieveOptions& options, std::optional<QuestionId> anchor) {
  const auto keywords = extract_keywords(query, entities, rules);
  auto out = retrieve(keywords, query.category, query.intention, index, options, anchor);
  out.query_text = query.text;
  return out;
}

}  // namespace simq
