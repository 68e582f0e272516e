#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qidn/corpus.hpp"

namespace qidn::evaluation {

using corpus::Sentence;
using corpus::Triple;
using TripleSets = std::vector<std::vector<Triple>>;  // one set per sentence

enum class MatchMode { strict, partial };
const char* to_string(MatchMode mode);
MatchMode match_mode_from_string(const std::string& name);

// Pooled micro counts.
struct Counts {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const;  // 0 when nothing was predicted
  double recall() const;
  double f1() const;  // 2pr / (p + r), 0 when p + r = 0
  Counts& operator+=(const Counts& other);
  bool operator==(const Counts&) const = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Scores scores(const Counts& counts);

// Strict: relation, both full spans and entity types agree. Partial: relation,
// the last token of each span and entity types agree. Predictions are treated
// as sets; each gold triple is credited at most once.
Counts match_counts(const std::vector<Triple>& predicted, const std::vector<Triple>& gold, MatchMode mode);
Counts match_counts(const TripleSets& predicted, const TripleSets& gold, MatchMode mode);

Scores strict_match_f1(const TripleSets& predicted, const TripleSets& gold);
Scores partial_match_f1(const TripleSets& predicted, const TripleSets& gold);

struct ErrorCounts {
  std::optional<std::size_t> ece;  // NER counts exist only for typed corpora
  std::optional<std::size_t> ele;
  std::size_t rce = 0;
  std::size_t pce = 0;
  std::size_t ple = 0;
  std::size_t wrong_entities = 0;
  std::size_t wrong_triples = 0;

  ErrorCounts& operator+=(const ErrorCounts& other);
};

// Per incorrect prediction, exactly one category per task. RE precedence:
// PLE (span pair absent from gold), PCE (pair present but entity types differ),
// RCE (pair and types right, relation wrong). Predicted entities are the
// argument entities of the predicted triples.
ErrorCounts error_taxonomy(const std::vector<Triple>& predicted, const Sentence& gold, MatchMode mode, bool typed);
ErrorCounts error_taxonomy(const TripleSets& predicted, const std::vector<Sentence>& gold, MatchMode mode, bool typed);

struct EvalReport {
  MatchMode mode = MatchMode::strict;
  Counts counts;
  std::map<std::string, Counts> by_pattern;  // every pattern is present, possibly empty
  std::map<std::string, Counts> by_bucket;
  ErrorCounts errors;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Sentences without gold triples count towards the totals but belong to no
// pattern or bucket.
EvalReport evaluate(const TripleSets& predicted, const std::vector<Sentence>& gold, MatchMode mode, bool typed);

TripleSets gold_triples(const std::vector<Sentence>& sentences);

struct TopologyPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

// Drops labels seen fewer than min_count times, L2-normalizes the remaining
// rows, and projects them on the top two principal components of their
// covariance. Each component is oriented so that its largest-magnitude loading
// is positive. A zero-variance input yields all-zero coordinates.
std::vector<TopologyPoint> export_relation_topology(const std::vector<std::vector<double>>& embeddings,
                                                    const std::vector<std::string>& labels,
                                                    const std::map<std::string, std::size_t>& counts,
                                                    std::size_t min_count);
nlohmann::json to_json(const std::vector<TopologyPoint>& points);

}  // namespace qidn::evaluation
