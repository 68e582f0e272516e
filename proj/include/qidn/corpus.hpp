#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace qidn::corpus {

// Entity span with inclusive token bounds. An empty type marks a corpus
// without entity annotation (NYT/WebNLG style).
struct Entity {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  bool same_span(const Entity& other) const { return start == other.start && end == other.end; }
  auto operator<=>(const Entity&) const = default;
};

struct Triple {
  Entity subject;
  Entity object;
  std::string relation;

  auto operator<=>(const Triple&) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<Entity> entities;
  std::vector<Triple> triples;
};

// Real label inventories (no null label), as listed in labels.json.
struct LabelSet {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;
};

std::vector<Sentence> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Sentence>& sentences,
                 const std::string& role = "");

Sentence sentence_from_json(const nlohmann::json& record, const std::string& where);
nlohmann::json sentence_to_json(const Sentence& sentence);

// Looks for labels.json next to the corpus file.
std::optional<LabelSet> load_sibling_labels(const std::string& corpus_path);
LabelSet load_labels(const std::string& path);
void save_labels(const std::string& path, const LabelSet& labels);
// Throws DataError when a sentence uses a label missing from the set.
void check_labels(const std::vector<Sentence>& sentences, const LabelSet& labels);

// Sorts and removes exact duplicate triples.
void dedupe_triples(std::vector<Triple>& triples);

enum class OverlapPattern { normal, epo, seo, soo };
enum class CountBucket { one, two, three, four, five_plus };

const char* to_string(OverlapPattern pattern);
const char* to_string(CountBucket bucket);
inline constexpr OverlapPattern kAllPatterns[] = {OverlapPattern::normal, OverlapPattern::epo,
                                                  OverlapPattern::seo, OverlapPattern::soo};
inline constexpr CountBucket kAllBuckets[] = {CountBucket::one, CountBucket::two, CountBucket::three,
                                              CountBucket::four, CountBucket::five_plus};

// Precedence SOO > EPO > SEO > Normal. Entity identity is the exact span;
// EPO requires the same ordered (subject, object) pair.
OverlapPattern classify_overlap(const Sentence& sentence);
CountBucket bucket_by_count(const Sentence& sentence);

inline const std::string kNullLabel = "<null>";

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kNull = 0;  // null label index in both label maps

  Vocab();

  std::size_t token_id(const std::string& token) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t relation_id(const std::string& label) const;
  std::size_t entity_type_id(const std::string& label) const;
  const std::string& relation_label(std::size_t id) const { return relations_.at(id); }
  const std::string& entity_label(std::size_t id) const { return entity_types_.at(id); }

  std::size_t num_tokens() const { return tokens_.size(); }
  std::size_t num_relations() const { return relations_.size(); }        // including null
  std::size_t num_entity_types() const { return entity_types_.size(); }  // including null
  bool typed_entities() const { return entity_types_.size() > 1; }

  void add_token(const std::string& token);
  void add_relation(const std::string& label);
  void add_entity_type(const std::string& label);

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> token_ids_;
  std::vector<std::string> relations_;
  std::map<std::string, std::size_t> relation_ids_;
  std::vector<std::string> entity_types_;
  std::map<std::string, std::size_t> entity_type_ids_;
};

// Tokens seen fewer than min_count times map to kUnk. Label maps come from
// `labels` when given, otherwise from the corpus (sorted).
Vocab build_vocab(const std::vector<Sentence>& corpus, std::size_t min_count,
                  const std::optional<LabelSet>& labels = std::nullopt);

std::map<std::string, std::size_t> relation_counts(const std::vector<Sentence>& corpus);

}  // namespace qidn::corpus
