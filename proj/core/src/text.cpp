#include "simq/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace simq {

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    auto j = s.find(sep, i);
    if (j == std::string_view::npos) j = s.size();
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split_on(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: treat as its own unit
}

std::vector<std::string_view> codepoints(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto n = std::min(utf8_length(static_cast<unsigned char>(s[i])), s.size() - i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

bool has_non_ascii(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) >= 0x80; });
}

// Full-width punctuation common in CJK questions.
constexpr std::string_view kWidePunct[] = {"，", "。", "？", "！", "；", "：", "、", "（", "）", "“", "”"};

std::string join(std::span<const std::string> tokens, std::size_t begin, std::size_t end) {
  std::string s;
  for (auto i = begin; i < end; ++i) {
    if (i > begin) s += ' ';
    s += tokens[i];
  }
  return s;
}

}  // namespace

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::symptom: return "symptom";
    case EntityType::disease: return "disease";
    case EntityType::drug: return "drug";
    case EntityType::body_part: return "body-part";
    case EntityType::other: return "other";
  }
  return "other";
}

EntityType parse_entity_type(std::string_view s) {
  if (s == "symptom") return EntityType::symptom;
  if (s == "disease") return EntityType::disease;
  if (s == "drug") return EntityType::drug;
  if (s == "body-part" || s == "body_part") return EntityType::body_part;
  if (s == "other") return EntityType::other;
  throw DataError("unknown entity type '" + std::string(s) + "'");
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  auto emit = [&](std::string_view piece) {
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += piece;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const auto uc = static_cast<unsigned char>(c);
    if (uc >= 0x80) {
      auto n = std::min(utf8_length(uc), text.size() - i);
      auto cp = text.substr(i, n);
      i += n;
      if (std::find(std::begin(kWidePunct), std::end(kWidePunct), cp) != std::end(kWidePunct))
        pending_space = true;
      else
        emit(cp);
      continue;
    }
    ++i;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = true;
    } else if (c == '.' && !out.empty() && !pending_space && std::isdigit(static_cast<unsigned char>(out.back())) &&
               i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      emit(".");  // decimal point
    } else if (std::string_view("?.,!;:\"()[]{}<>").find(c) != std::string_view::npos) {
      pending_space = true;
    } else {
      char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
      emit(std::string_view(&lower, 1));
    }
  }
  return out;
}

// --- EntityDictionary -------------------------------------------------------

void EntityDictionary::add(std::string_view surface, EntityRecord record) {
  auto key = normalize_text(surface);
  if (key.empty()) throw DataError("empty entity surface form");
  if (record.canonical_id.empty()) throw DataError("entity '" + key + "' has no canonical id");
  max_words_ = std::max(max_words_, split_on(key, ' ').size());
  max_codepoints_ = std::max(max_codepoints_, codepoints(key).size());
  entries_.insert_or_assign(std::move(key), std::move(record));
}

const EntityRecord* EntityDictionary::lookup(std::string_view surface) const {
  auto it = entries_.find(surface);
  return it == entries_.end() ? nullptr : &it->second;
}

EntityDictionary EntityDictionary::parse(std::string_view tsv) {
  EntityDictionary dict;
  std::size_t line_no = 0;
  for (auto line : lines_of(tsv)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 3)
      throw DataError("entity dictionary line " + std::to_string(line_no) +
                      ": expected surface<TAB>canonical_id<TAB>type");
    dict.add(fields[0], EntityRecord{std::string(fields[1]), parse_entity_type(fields[2])});
  }
  return dict;
}

EntityDictionary EntityDictionary::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::string EntityDictionary::serialize() const {
  std::string out;
  for (const auto& [surface, rec] : entries_) {
    out += surface;
    out += '\t';
    out += rec.canonical_id;
    out += '\t';
    out += to_string(rec.type);
    out += '\n';
  }
  return out;
}

// --- SynonymDictionary ------------------------------------------------------

void SynonymDictionary::add_group(std::vector<std::string> forms) {
  std::vector<std::string> group;
  for (auto& f : forms) {
    auto key = normalize_text(f);
    if (key.empty() || std::find(group.begin(), group.end(), key) != group.end()) continue;
    if (index_.contains(key))
      throw DataError("synonym '" + key + "' appears in more than one group");
    group.push_back(std::move(key));
  }
  if (group.size() < 2) return;  // a singleton substitutes for nothing
  for (const auto& g : group) index_.emplace(g, groups_.size());
  groups_.push_back(std::move(group));
}

std::optional<std::size_t> SynonymDictionary::group_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SynonymDictionary SynonymDictionary::parse(std::string_view tsv) {
  SynonymDictionary dict;
  for (auto line : lines_of(tsv)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> forms;
    for (auto f : split_on(line, '\t'))
      if (!f.empty()) forms.emplace_back(f);
    dict.add_group(std::move(forms));
  }
  return dict;
}

SynonymDictionary SynonymDictionary::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::string SynonymDictionary::serialize() const {
  std::string out;
  for (const auto& g : groups_) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i) out += '\t';
      out += g[i];
    }
    out += '\n';
  }
  return out;
}

// --- tokenization -----------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode,
                                  const EntityDictionary* entities) {
  const auto norm = normalize_text(text);
  if (norm.empty()) throw ArgumentError("empty question");

  std::vector<std::string> words;
  for (auto w : split_on(norm, ' '))
    if (!w.empty()) words.emplace_back(w);
  if (mode == TokenizeMode::whitespace || !entities || entities->empty()) return words;

  // unsegmented runs: longest dictionary match over code points
  std::vector<std::string> segmented;
  for (auto& w : words) {
    if (!has_non_ascii(w) || entities->lookup(w)) {
      segmented.push_back(std::move(w));
      continue;
    }
    auto cps = codepoints(w);
    std::size_t i = 0;
    while (i < cps.size()) {
      std::size_t best = 0;
      const auto limit = std::min(entities->max_codepoints(), cps.size() - i);
      for (std::size_t len = limit; len >= 2 && best == 0; --len) {
        std::string cand;
        for (std::size_t k = i; k < i + len; ++k) cand += cps[k];
        if (entities->lookup(cand)) best = len;
      }
      if (best == 0) {
        // ASCII runs (numbers, latin words) stay whole
        best = 1;
        if (cps[i].size() == 1)
          while (i + best < cps.size() && cps[i + best].size() == 1) ++best;
      }
      std::string tok;
      for (std::size_t k = i; k < i + best; ++k) tok += cps[k];
      segmented.push_back(std::move(tok));
      i += best;
    }
  }

  // multi-word entity surface forms become a single token
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < segmented.size()) {
    std::size_t take = 1;
    const auto limit = std::min(entities->max_words(), segmented.size() - i);
    for (std::size_t len = limit; len >= 2; --len) {
      if (entities->lookup(join(segmented, i, i + len))) {
        take = len;
        break;
      }
    }
    out.push_back(take == 1 ? std::move(segmented[i]) : join(segmented, i, i + take));
    i += take;
  }
  return out;
}

Tokenizer make_tokenizer(TokenizeMode mode, const EntityDictionary* entities) {
  return [mode, entities](std::string_view text) { return tokenize(text, mode, entities); };
}

std::vector<EntityMatch> find_entities(std::span<const std::string> tokens,
                                       const EntityDictionary& dict) {
  std::vector<EntityMatch> out;
  if (dict.empty()) return out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    // every token holds at least one word, so no match spans more tokens
    // than the longest surface form has words
    const auto limit = std::min(dict.max_words(), tokens.size() - i);
    bool matched = false;
    for (std::size_t len = limit; len >= 1; --len) {
      if (const auto* rec = dict.lookup(join(tokens, i, i + len))) {
        out.push_back({i, i + len, *rec});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

// --- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() { push(std::string(kUnk), 0); }

void Vocabulary::push(std::string token, std::size_t freq) {
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  freq_.push_back(freq);
}

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                   std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> kept;
  std::size_t unk = 0;
  for (const auto& [tok, n] : counts) {
    if (tok == kUnk) {
      unk += n;
    } else if (n >= min_count) {
      kept.emplace_back(tok, n);
    } else {
      unk += n;
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  v.min_count_ = min_count;
  v.freq_[kUnkIndex] = unk;
  for (auto& [tok, n] : kept) v.push(std::move(tok), n);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty() || tokens[0] != kUnk) throw FormatError("vocabulary must start with <unk>");
  Vocabulary v;
  v.tokens_.clear();
  v.freq_.clear();
  v.index_.clear();
  v.min_count_ = 0;
  for (auto& t : tokens) {
    if (v.index_.contains(t)) throw FormatError("duplicate vocabulary token '" + t + "'");
    v.push(std::move(t), 0);
  }
  return v;
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::vector<std::size_t> Vocabulary::indices(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index_of(t));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out = "SIMQ-VOC v1 " + std::to_string(size()) + " " + std::to_string(min_count_) + "\n";
  for (std::size_t i = 0; i < size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(freq_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("unexpected end of vocabulary file");
  auto head = split_on(lines[0], ' ');
  if (head.size() < 2 || head[0] != "SIMQ-VOC") throw FormatError("bad magic: expected SIMQ-VOC v1");
  if (head[1] != "v1") throw FormatError("unsupported version: vocabulary " + std::string(head[1]));
  if (head.size() != 4) throw FormatError("bad vocabulary header");
  auto parse_size = [](std::string_view s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("bad number '" + std::string(s) + "'");
    return v;
  };
  const auto n = parse_size(head[2]);
  if (lines.size() - 1 < n) throw FormatError("unexpected end of vocabulary file");
  if (lines.size() - 1 > n) throw FormatError("trailing lines after vocabulary");

  Vocabulary v;
  v.tokens_.clear();
  v.freq_.clear();
  v.index_.clear();
  v.min_count_ = parse_size(head[3]);
  for (std::size_t i = 1; i <= n; ++i) {
    auto tab = lines[i].rfind('\t');
    if (tab == std::string_view::npos) throw FormatError("bad vocabulary line " + std::to_string(i + 1));
    std::string tok(lines[i].substr(0, tab));
    if (v.index_.contains(tok)) throw FormatError("duplicate vocabulary token '" + tok + "'");
    v.push(std::move(tok), parse_size(lines[i].substr(tab + 1)));
  }
  if (v.tokens_.empty() || v.tokens_[kUnkIndex] != kUnk) throw FormatError("vocabulary must start with <unk>");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& q : corpus.questions()) {
    for (const auto& t : q.tokens) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) throw DataError("corpus has no tokens; tokenize before building a vocabulary");
  return Vocabulary::from_counts(counts, std::max<std::size_t>(min_count, 1));
}

}  // namespace simq
