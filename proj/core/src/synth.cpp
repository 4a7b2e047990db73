#include <nlohmann/json.hpp>

#include <algorithm>

#include "simq/corpus.hpp"
#include "simq/text.hpp"

namespace simq {

using nlohmann::json;

const BankConcept* TemplateBank::concept_named(std::string_view name) const {
  for (const auto& c : concepts)
    if (c.name == name) return &c;
  return nullptr;
}

TemplateBank parse_template_bank(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("template bank: ") + e.what());
  }
  TemplateBank bank;
  try {
    for (const auto& c : j.value("concepts", json::array())) {
      BankConcept bc;
      bc.name = c.at("name").get<std::string>();
      bc.forms = c.at("forms").get<std::vector<std::string>>();
      bc.entity_type = c.value("type", "");
      if (bc.forms.empty()) throw DataError("template bank: concept '" + bc.name + "' has no forms");
      bank.concepts.push_back(std::move(bc));
    }
    if (j.contains("slots"))
      bank.slots = j.at("slots").get<std::unordered_map<std::string, std::vector<std::string>>>();
    for (const auto& t : j.value("topics", json::array())) {
      BankTopic bt;
      bt.name = t.at("name").get<std::string>();
      bt.slots = t.at("slots").get<std::unordered_map<std::string, std::vector<std::string>>>();
      bank.topics.push_back(std::move(bt));
    }
    for (const auto& t : j.value("templates", json::array())) {
      BankTemplate bt;
      bt.id = t.at("id").get<std::string>();
      bt.pattern = t.at("pattern").get<std::string>();
      bt.category = t.value("category", std::string(kUnknownTag));
      bt.intention = t.value("intention", std::string(kUnknownTag));
      bt.weight = t.value("weight", 1.0);
      bt.answered = t.value("answered", true);
      if (!(bt.weight > 0.0)) throw DataError("template bank: template '" + bt.id + "' needs weight > 0");
      bank.templates.push_back(std::move(bt));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("template bank: ") + e.what());
  }
  return bank;
}

TemplateBank load_template_bank(const std::filesystem::path& path) {
  return parse_template_bank(read_file(path));
}

std::string_view family_template(std::string_view family) {
  return family.substr(0, family.find('|'));
}

namespace {

struct Piece {
  bool slot = false;
  std::string text;  // literal word or slot name
};

std::vector<Piece> split_pattern(const std::string& pattern) {
  std::vector<Piece> out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == ' ') {
      ++i;
      continue;
    }
    auto end = pattern.find(' ', i);
    if (end == std::string::npos) end = pattern.size();
    std::string word = pattern.substr(i, end - i);
    if (word.size() > 2 && word.front() == '{' && word.back() == '}')
      out.push_back({true, word.substr(1, word.size() - 2)});
    else
      out.push_back({false, std::move(word)});
    i = end;
  }
  return out;
}

}  // namespace

Corpus synth_corpus(std::size_t n, std::uint64_t seed, const TemplateBank& bank) {
  if (bank.templates.empty()) throw DataError("template bank has no templates");
  if (n == 0) throw ArgumentError("synth_corpus: n must be >= 1");

  std::set<std::string> cats, ints;
  for (const auto& t : bank.templates) {
    cats.insert(t.category);
    ints.insert(t.intention);
  }
  Corpus corpus(cats, ints, "synthetic n=" + std::to_string(n) + " seed=" + std::to_string(seed));

  std::vector<double> cumulative(bank.templates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < bank.templates.size(); ++i) {
    total += bank.templates[i].weight;
    cumulative[i] = total;
  }

  std::vector<std::vector<Piece>> patterns;
  for (const auto& t : bank.templates) patterns.push_back(split_pattern(t.pattern));

  std::unordered_map<std::string_view, const BankConcept*> concept_index;
  for (const auto& c : bank.concepts) concept_index.emplace(c.name, &c);

  Rng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = rng.uniform() * total;
    std::size_t ti = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    ti = std::min(ti, bank.templates.size() - 1);
    const auto& tmpl = bank.templates[ti];

    const BankTopic* topic = bank.topics.empty() ? nullptr : &bank.topics[rng.index(bank.topics.size())];

    std::string text;
    std::string choices;
    std::unordered_map<std::string, std::vector<std::string>> used;
    for (const auto& piece : patterns[ti]) {
      std::string word;
      if (!piece.slot) {
        word = piece.text;
      } else {
        const std::vector<std::string>* pool = nullptr;
        if (topic) {
          auto it = topic->slots.find(piece.text);
          if (it != topic->slots.end() && !it->second.empty()) pool = &it->second;
        }
        if (!pool) {
          auto it = bank.slots.find(piece.text);
          if (it == bank.slots.end() || it->second.empty())
            throw DataError("template '" + tmpl.id + "' references unknown slot {" + piece.text + "}");
          pool = &it->second;
        }
        // repeated slots draw distinct concepts while the pool allows it
        auto& seen = used[piece.text];
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < pool->size(); ++i)
          if (std::find(seen.begin(), seen.end(), (*pool)[i]) == seen.end()) open.push_back(i);
        const std::string& name =
            open.empty() ? (*pool)[rng.index(pool->size())] : (*pool)[open[rng.index(open.size())]];
        seen.push_back(name);
        if (auto it = concept_index.find(name); it != concept_index.end())
          word = it->second->forms[rng.index(it->second->forms.size())];
        else
          word = name;
        if (!choices.empty()) choices += ',';
        choices += name;
      }
      if (!text.empty()) text += ' ';
      text += word;
    }

    Question q;
    q.id = k + 1;
    q.text = std::move(text);
    q.category = tmpl.category;
    q.intention = tmpl.intention;
    q.answered = tmpl.answered;
    q.family = tmpl.id + "|" + (topic ? topic->name : "") + "|" + choices;
    corpus.add(std::move(q));
  }
  return corpus;
}

EntityDictionary bank_entities(const TemplateBank& bank) {
  EntityDictionary dict;
  for (const auto& c : bank.concepts) {
    if (c.entity_type.empty()) continue;
    const EntityRecord rec{c.name, parse_entity_type(c.entity_type)};
    for (const auto& f : c.forms) dict.add(f, rec);
  }
  return dict;
}

SynonymDictionary bank_synonyms(const TemplateBank& bank) {
  SynonymDictionary syn;
  for (const auto& c : bank.concepts)
    if (c.forms.size() > 1) {
      std::vector<std::string> forms;
      for (const auto& f : c.forms) forms.push_back(normalize_text(f));
      syn.add_group(std::move(forms));
    }
  return syn;
}

}  // namespace simq
