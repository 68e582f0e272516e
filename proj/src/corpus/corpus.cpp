#include "qidn/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "qidn/error.hpp"

namespace qidn::corpus {

using nlohmann::json;

namespace {

std::size_t read_index(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + ": missing key '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw DataError(where + ": '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

Sentence sentence_from_json(const json& record, const std::string& where) {
  if (!record.is_object()) throw DataError(where + ": record is not a JSON object");
  Sentence s;
  if (!record.contains("tokens") || !record.at("tokens").is_array()) {
    throw DataError(where + ": missing token array");
  }
  for (const auto& t : record.at("tokens")) {
    if (!t.is_string()) throw DataError(where + ": tokens must be strings");
    s.tokens.push_back(t.get<std::string>());
  }
  if (s.tokens.empty()) throw DataError(where + ": sentence has no tokens");

  const json empty = json::array();
  const json& entities = record.contains("entities") ? record.at("entities") : empty;
  if (!entities.is_array()) throw DataError(where + ": 'entities' must be an array");
  for (std::size_t k = 0; k < entities.size(); ++k) {
    const json& e = entities[k];
    const std::string ewhere = where + ", entity " + std::to_string(k);
    Entity ent;
    ent.start = read_index(e, "start", ewhere);
    ent.end = read_index(e, "end", ewhere);
    if (e.contains("type")) {
      if (!e.at("type").is_string()) throw DataError(ewhere + ": type must be a string");
      ent.type = e.at("type").get<std::string>();
      if (ent.type == kNullLabel) throw DataError(ewhere + ": gold entities cannot carry the null label");
    }
    if (ent.start > ent.end || ent.end >= s.tokens.size()) {
      throw DataError(ewhere + ": span [" + std::to_string(ent.start) + ", " + std::to_string(ent.end) +
                      "] out of range for sentence of length " + std::to_string(s.tokens.size()));
    }
    s.entities.push_back(ent);
  }

  const json& relations = record.contains("relations") ? record.at("relations") : empty;
  if (!relations.is_array()) throw DataError(where + ": 'relations' must be an array");
  for (std::size_t k = 0; k < relations.size(); ++k) {
    const json& r = relations[k];
    const std::string rwhere = where + ", relation " + std::to_string(k);
    const std::size_t subj = read_index(r, "subject", rwhere);
    const std::size_t obj = read_index(r, "object", rwhere);
    if (subj >= s.entities.size() || obj >= s.entities.size()) {
      throw DataError(rwhere + ": references entity " + std::to_string(std::max(subj, obj)) + " but only " +
                      std::to_string(s.entities.size()) + " entities exist");
    }
    if (!r.contains("type") || !r.at("type").is_string()) throw DataError(rwhere + ": missing relation type");
    Triple t{s.entities[subj], s.entities[obj], r.at("type").get<std::string>()};
    if (t.relation.empty() || t.relation == kNullLabel) throw DataError(rwhere + ": invalid relation type");
    s.triples.push_back(std::move(t));
  }
  dedupe_triples(s.triples);
  return s;
}

json sentence_to_json(const Sentence& sentence) {
  // Triples may reference entities missing from the entity list (predictions);
  // those are appended so the record stays self-contained.
  std::vector<Entity> entities = sentence.entities;
  auto index_of = [&](const Entity& e) {
    auto it = std::find(entities.begin(), entities.end(), e);
    if (it != entities.end()) return static_cast<std::size_t>(it - entities.begin());
    entities.push_back(e);
    return entities.size() - 1;
  };
  json relations = json::array();
  for (const auto& t : sentence.triples) {
    const std::size_t subj = index_of(t.subject);
    const std::size_t obj = index_of(t.object);
    relations.push_back({{"subject", subj}, {"object", obj}, {"type", t.relation}});
  }
  json ents = json::array();
  for (const auto& e : entities) {
    json je = {{"start", e.start}, {"end", e.end}};
    if (!e.type.empty()) je["type"] = e.type;
    ents.push_back(je);
  }
  return {{"tokens", sentence.tokens}, {"entities", ents}, {"relations", relations}};
}

std::vector<Sentence> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path);
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  int typed_state = -1;  // -1 unknown, 0 untyped, 1 typed
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    Sentence s = sentence_from_json(record, where);
    for (const auto& e : s.entities) {
      const int state = e.type.empty() ? 0 : 1;
      if (typed_state == -1) typed_state = state;
      if (typed_state != state) throw DataError(where + ": corpus mixes typed and untyped entities");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<Sentence>& sentences, const std::string& role) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file " + path);
  for (const auto& s : sentences) {
    json j = sentence_to_json(s);
    if (!role.empty()) j["role"] = role;
    out << j.dump() << '\n';
  }
}

LabelSet load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed JSON (" + e.what() + ")");
  }
  LabelSet labels;
  try {
    if (j.contains("entity_types")) labels.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    labels.relation_types = j.at("relation_types").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return labels;
}

void save_labels(const std::string& path, const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write labels file " + path);
  json j = {{"entity_types", labels.entity_types}, {"relation_types", labels.relation_types}};
  out << j.dump(2) << '\n';
}

std::optional<LabelSet> load_sibling_labels(const std::string& corpus_path) {
  const auto sibling = std::filesystem::path(corpus_path).parent_path() / "labels.json";
  if (!std::filesystem::exists(sibling)) return std::nullopt;
  return load_labels(sibling.string());
}

void check_labels(const std::vector<Sentence>& sentences, const LabelSet& labels) {
  const std::set<std::string> etypes(labels.entity_types.begin(), labels.entity_types.end());
  const std::set<std::string> rtypes(labels.relation_types.begin(), labels.relation_types.end());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (const auto& e : sentences[i].entities) {
      if (!e.type.empty() && !etypes.count(e.type)) {
        throw DataError("sentence " + std::to_string(i) + ": entity type '" + e.type + "' not in labels.json");
      }
    }
    for (const auto& t : sentences[i].triples) {
      if (!rtypes.count(t.relation)) {
        throw DataError("sentence " + std::to_string(i) + ": relation type '" + t.relation +
                        "' not in labels.json");
      }
    }
  }
}

void dedupe_triples(std::vector<Triple>& triples) {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
}

const char* to_string(OverlapPattern pattern) {
  switch (pattern) {
    case OverlapPattern::normal: return "Normal";
    case OverlapPattern::epo: return "EPO";
    case OverlapPattern::seo: return "SEO";
    case OverlapPattern::soo: return "SOO";
  }
  return "?";
}

const char* to_string(CountBucket bucket) {
  switch (bucket) {
    case CountBucket::one: return "N=1";
    case CountBucket::two: return "N=2";
    case CountBucket::three: return "N=3";
    case CountBucket::four: return "N=4";
    case CountBucket::five_plus: return "N>=5";
  }
  return "?";
}

OverlapPattern classify_overlap(const Sentence& sentence) {
  const auto& ts = sentence.triples;
  if (ts.empty()) throw DataError("overlap pattern is undefined for a sentence without triples");
  auto overlaps = [](const Entity& a, const Entity& b) { return a.start <= b.end && b.start <= a.end; };
  for (const auto& t : ts) {
    if (overlaps(t.subject, t.object)) return OverlapPattern::soo;
  }
  bool seo = false;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      const Triple& a = ts[i];
      const Triple& b = ts[j];
      if (a.subject.same_span(b.subject) && a.object.same_span(b.object)) return OverlapPattern::epo;
      if (a.subject.same_span(b.subject) || a.subject.same_span(b.object) || a.object.same_span(b.subject) ||
          a.object.same_span(b.object)) {
        seo = true;
      }
    }
  }
  return seo ? OverlapPattern::seo : OverlapPattern::normal;
}

CountBucket bucket_by_count(const Sentence& sentence) {
  switch (sentence.triples.size()) {
    case 0: throw DataError("triple-count bucket is undefined for a sentence without triples");
    case 1: return CountBucket::one;
    case 2: return CountBucket::two;
    case 3: return CountBucket::three;
    case 4: return CountBucket::four;
    default: return CountBucket::five_plus;
  }
}

Vocab::Vocab() {
  add_token("<pad>");
  add_token("<unk>");
  add_relation(kNullLabel);
  add_entity_type(kNullLabel);
}

std::size_t Vocab::token_id(const std::string& token) const {
  auto it = token_ids_.find(token);
  return it == token_ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(token_id(t));
  return ids;
}

std::size_t Vocab::relation_id(const std::string& label) const {
  auto it = relation_ids_.find(label);
  if (it == relation_ids_.end()) throw DataError("unknown relation type '" + label + "'");
  return it->second;
}

std::size_t Vocab::entity_type_id(const std::string& label) const {
  if (label.empty()) return kNull;
  auto it = entity_type_ids_.find(label);
  if (it == entity_type_ids_.end()) throw DataError("unknown entity type '" + label + "'");
  return it->second;
}

void Vocab::add_token(const std::string& token) {
  if (token_ids_.count(token)) return;
  token_ids_[token] = tokens_.size();
  tokens_.push_back(token);
}

void Vocab::add_relation(const std::string& label) {
  if (relation_ids_.count(label)) return;
  relation_ids_[label] = relations_.size();
  relations_.push_back(label);
}

void Vocab::add_entity_type(const std::string& label) {
  if (entity_type_ids_.count(label)) return;
  entity_type_ids_[label] = entity_types_.size();
  entity_types_.push_back(label);
}

json Vocab::to_json() const {
  return {{"tokens", tokens_}, {"relations", relations_}, {"entity_types", entity_types_}};
}

Vocab Vocab::from_json(const json& j) {
  Vocab v;
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  const auto relations = j.at("relations").get<std::vector<std::string>>();
  const auto etypes = j.at("entity_types").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw DataError("vocab: reserved token ids are not in place");
  }
  if (relations.empty() || relations[0] != kNullLabel || etypes.empty() || etypes[0] != kNullLabel) {
    throw DataError("vocab: null label is not at index 0");
  }
  for (const auto& t : tokens) v.add_token(t);
  for (const auto& r : relations) v.add_relation(r);
  for (const auto& e : etypes) v.add_entity_type(e);
  return v;
}

Vocab build_vocab(const std::vector<Sentence>& corpus, std::size_t min_count, const std::optional<LabelSet>& labels) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  std::set<std::string> rtypes, etypes;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) {
      if (counts[t]++ == 0) order.push_back(t);
    }
    for (const auto& e : s.entities)
      if (!e.type.empty()) etypes.insert(e.type);
    for (const auto& t : s.triples) rtypes.insert(t.relation);
  }
  Vocab v;
  for (const auto& t : order) {
    if (counts[t] >= min_count) v.add_token(t);
  }
  if (labels) {
    check_labels(corpus, *labels);
    for (const auto& r : labels->relation_types) v.add_relation(r);
    for (const auto& e : labels->entity_types) v.add_entity_type(e);
  } else {
    for (const auto& r : rtypes) v.add_relation(r);
    for (const auto& e : etypes) v.add_entity_type(e);
  }
  return v;
}

std::map<std::string, std::size_t> relation_counts(const std::vector<Sentence>& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus)
    for (const auto& t : s.triples) ++counts[t.relation];
  return counts;
}

}  // namespace qidn::corpus
