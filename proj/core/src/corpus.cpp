#include "simq/corpus.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace simq {

using nlohmann::json;

namespace {

constexpr std::string_view kCorpusFormat = "SIMQ-CORPUS";
constexpr int kCorpusVersion = 1;

struct Header {
  std::set<std::string> categories;
  std::set<std::string> intentions;
  std::string source;
  std::size_t count = 0;
};

std::optional<Header> parse_header(const json& j) {
  if (!j.is_object() || !j.contains("format")) return std::nullopt;
  if (j.at("format") != kCorpusFormat) throw FormatError("bad corpus header format");
  if (!j.contains("version") || j.at("version") != kCorpusVersion)
    throw FormatError("unsupported version: corpus v" + j.value("version", json()).dump());
  Header h;
  h.categories = j.at("categories").get<std::set<std::string>>();
  h.intentions = j.at("intentions").get<std::set<std::string>>();
  h.source = j.value("source", "");
  h.count = j.at("count").get<std::size_t>();
  return h;
}

Question parse_record(const json& j) {
  if (!j.is_object()) throw DataError("record is not an object");
  if (!j.contains("id")) throw DataError("missing field 'id'");
  if (!j.contains("text")) throw DataError("missing field 'text'");
  const auto& id = j.at("id");
  if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<std::int64_t>() >= 0))
    throw DataError("field 'id' must be an unsigned integer");
  if (!j.at("text").is_string()) throw DataError("field 'text' must be a string");

  Question q;
  q.id = id.get<QuestionId>();
  q.text = j.at("text").get<std::string>();
  auto str_field = [&](const char* key, std::string& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_string()) throw DataError(std::string("field '") + key + "' must be a string");
    out = j.at(key).get<std::string>();
    if (out.empty()) out = kUnknownTag;
  };
  str_field("category", q.category);
  str_field("intention", q.intention);
  str_field("family", q.family);
  if (q.family == kUnknownTag) q.family.clear();
  if (j.contains("answered")) {
    if (!j.at("answered").is_boolean()) throw DataError("field 'answered' must be a boolean");
    q.answered = j.at("answered").get<bool>();
  }
  if (j.contains("tokens")) {
    q.tokens = j.at("tokens").get<std::vector<std::string>>();
  }
  return q;
}

}  // namespace

Corpus::Corpus(std::set<std::string> categories, std::set<std::string> intentions,
               std::string source)
    : categories_(std::move(categories)),
      intentions_(std::move(intentions)),
      source_(std::move(source)) {
  categories_.emplace(kUnknownTag);
  intentions_.emplace(kUnknownTag);
}

void Corpus::add(Question q) {
  if (by_id_.contains(q.id)) throw DataError("duplicate id " + std::to_string(q.id));
  if (!categories_.contains(q.category))
    throw DataError("category '" + q.category + "' not declared");
  if (!intentions_.contains(q.intention))
    throw DataError("intention '" + q.intention + "' not declared");
  by_id_.emplace(q.id, questions_.size());
  questions_.push_back(std::move(q));
}

const Question& Corpus::at(QuestionId id) const {
  auto* q = find(id);
  if (!q) throw DataError("no question with id " + std::to_string(id));
  return *q;
}

const Question* Corpus::find(QuestionId id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &questions_[it->second];
}

Corpus ingest_text(std::string_view contents, const IngestOptions& options,
                   IngestReport* report, std::string source) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep = {};

  std::optional<Header> header;
  std::vector<std::pair<std::size_t, Question>> records;
  std::unordered_map<QuestionId, std::size_t> first_line;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    auto line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? contents.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      rep.errors.push_back({line_no, std::string("malformed JSON: ") + e.what()});
      ++rep.rejected;
      continue;
    }
    if (line_no == 1) {
      if (auto h = parse_header(j)) {
        header = std::move(h);
        continue;
      }
    }
    try {
      Question q = parse_record(j);
      if (header) {
        if (!header->categories.contains(q.category))
          throw DataError("category '" + q.category + "' not declared in header");
        if (!header->intentions.contains(q.intention))
          throw DataError("intention '" + q.intention + "' not declared in header");
      }
      if (options.tokenizer) q.tokens = options.tokenizer(q.text);
      if (auto [it, fresh] = first_line.emplace(q.id, line_no); !fresh) {
        throw DataError("duplicate id " + std::to_string(q.id) + " on lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
      }
      records.emplace_back(line_no, std::move(q));
    } catch (const json::exception& e) {
      rep.errors.push_back({line_no, std::string("bad field: ") + e.what()});
      ++rep.rejected;
    } catch (const DataError& e) {
      if (std::string_view(e.what()).starts_with("duplicate id")) throw;
      rep.errors.push_back({line_no, e.what()});
      ++rep.rejected;
    } catch (const ArgumentError& e) {
      rep.errors.push_back({line_no, e.what()});
      ++rep.rejected;
    }
  }

  if (header && records.size() + rep.rejected < header->count)
    throw FormatError("truncated corpus: header declares " + std::to_string(header->count) +
                      " records, found " + std::to_string(records.size() + rep.rejected));

  Corpus corpus;
  if (header) {
    corpus = Corpus(header->categories, header->intentions,
                    source.empty() ? header->source : source);
  } else {
    std::set<std::string> cats, ints;
    for (const auto& [_, q] : records) {
      cats.insert(q.category);
      ints.insert(q.intention);
    }
    corpus = Corpus(std::move(cats), std::move(ints), std::move(source));
  }
  for (auto& [ln, q] : records) corpus.add(std::move(q));
  rep.accepted = corpus.size();
  return corpus;
}

Corpus ingest(const std::filesystem::path& path, const IngestOptions& options,
              IngestReport* report) {
  return ingest_text(read_file(path), options, report, {});
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  json header = {{"format", kCorpusFormat},
                 {"version", kCorpusVersion},
                 {"count", corpus.size()},
                 {"source", corpus.source()},
                 {"categories", corpus.categories()},
                 {"intentions", corpus.intentions()}};
  out += header.dump();
  out += '\n';
  for (const auto& q : corpus.questions()) {
    // ordered_json keeps the field order stable and readable
    nlohmann::ordered_json r;
    r["id"] = q.id;
    r["text"] = q.text;
    r["category"] = q.category;
    r["intention"] = q.intention;
    r["answered"] = q.answered;
    if (!q.family.empty()) r["family"] = q.family;
    if (!q.tokens.empty()) r["tokens"] = q.tokens;
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

Corpus tokenize_corpus(const Corpus& corpus, const Tokenizer& tokenizer) {
  Corpus out(corpus.categories(), corpus.intentions(), corpus.source());
  for (auto q : corpus.questions()) {
    q.tokens = tokenizer(q.text);
    out.add(std::move(q));
  }
  return out;
}

}  // namespace simq
