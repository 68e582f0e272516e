#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "qidn/error.hpp"
#include "qidn/evaluation.hpp"

namespace qidn::evaluation {

using corpus::Entity;
using nlohmann::json;

const char* to_string(MatchMode mode) { return mode == MatchMode::strict ? "strict" : "partial"; }

MatchMode match_mode_from_string(const std::string& name) {
  if (name == "strict") return MatchMode::strict;
  if (name == "partial") return MatchMode::partial;
  throw ConfigError("unknown match mode '" + name + "' (expected strict or partial)");
}

double Counts::precision() const { return predicted == 0 ? 0.0 : static_cast<double>(correct) / predicted; }
double Counts::recall() const { return gold == 0 ? 0.0 : static_cast<double>(correct) / gold; }
double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Counts& Counts::operator+=(const Counts& other) {
  correct += other.correct;
  predicted += other.predicted;
  gold += other.gold;
  return *this;
}

Scores scores(const Counts& c) { return {c.precision(), c.recall(), c.f1()}; }

namespace {

// Strict keys use the full span; partial keys collapse start to the last token.
using SpanKey = std::pair<std::size_t, std::size_t>;
using EntityKey = std::tuple<std::size_t, std::size_t, std::string>;
using TripleKey = std::tuple<std::string, EntityKey, EntityKey>;

SpanKey span_key(const Entity& e, MatchMode mode) {
  return mode == MatchMode::strict ? SpanKey{e.start, e.end} : SpanKey{e.end, e.end};
}

EntityKey entity_key(const Entity& e, MatchMode mode) {
  const auto [a, b] = span_key(e, mode);
  return {a, b, e.type};
}

TripleKey triple_key(const Triple& t, MatchMode mode) {
  return {t.relation, entity_key(t.subject, mode), entity_key(t.object, mode)};
}

std::vector<Triple> as_set(std::vector<Triple> triples) {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  return triples;
}

void check_aligned(std::size_t predicted, std::size_t gold) {
  if (predicted != gold) {
    throw DataError("prediction and gold lists differ in length (" + std::to_string(predicted) + " vs " +
                    std::to_string(gold) + " sentences)");
  }
}

// Marks which predictions receive credit. Credit is per key class, so greedy
// assignment is optimal.
std::vector<bool> credited(const std::vector<Triple>& predicted, const std::vector<Triple>& gold, MatchMode mode) {
  std::map<TripleKey, std::size_t> available;
  for (const auto& g : gold) ++available[triple_key(g, mode)];
  std::vector<bool> out(predicted.size(), false);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto it = available.find(triple_key(predicted[i], mode));
    if (it != available.end() && it->second > 0) {
      --it->second;
      out[i] = true;
    }
  }
  return out;
}

}  // namespace

Counts match_counts(const std::vector<Triple>& predicted, const std::vector<Triple>& gold, MatchMode mode) {
  const auto pred = as_set(predicted);
  const auto gold_set = as_set(gold);
  const auto credit = credited(pred, gold_set, mode);
  Counts c;
  c.predicted = pred.size();
  c.gold = gold_set.size();
  c.correct = static_cast<std::size_t>(std::count(credit.begin(), credit.end(), true));
  return c;
}

Counts match_counts(const TripleSets& predicted, const TripleSets& gold, MatchMode mode) {
  check_aligned(predicted.size(), gold.size());
  Counts total;
  for (std::size_t s = 0; s < gold.size(); ++s) total += match_counts(predicted[s], gold[s], mode);
  return total;
}

Scores strict_match_f1(const TripleSets& predicted, const TripleSets& gold) {
  return scores(match_counts(predicted, gold, MatchMode::strict));
}

Scores partial_match_f1(const TripleSets& predicted, const TripleSets& gold) {
  return scores(match_counts(predicted, gold, MatchMode::partial));
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  if (other.ece) ece = ece.value_or(0) + *other.ece;
  if (other.ele) ele = ele.value_or(0) + *other.ele;
  rce += other.rce;
  pce += other.pce;
  ple += other.ple;
  wrong_entities += other.wrong_entities;
  wrong_triples += other.wrong_triples;
  return *this;
}

ErrorCounts error_taxonomy(const std::vector<Triple>& predicted, const Sentence& gold, MatchMode mode, bool typed) {
  ErrorCounts out;
  const auto pred = as_set(predicted);
  const auto gold_set = as_set(gold.triples);

  if (typed) {
    std::set<EntityKey> gold_entities;
    std::set<SpanKey> gold_spans;
    auto add_gold = [&](const Entity& e) {
      gold_entities.insert(entity_key(e, mode));
      gold_spans.insert(span_key(e, mode));
    };
    for (const auto& e : gold.entities) add_gold(e);
    for (const auto& t : gold_set) {
      add_gold(t.subject);
      add_gold(t.object);
    }
    std::set<EntityKey> pred_entities;
    for (const auto& t : pred) {
      pred_entities.insert(entity_key(t.subject, mode));
      pred_entities.insert(entity_key(t.object, mode));
    }
    out.ece = 0;
    out.ele = 0;
    for (const auto& e : pred_entities) {
      if (gold_entities.count(e)) continue;
      ++out.wrong_entities;
      if (gold_spans.count({std::get<0>(e), std::get<1>(e)})) {
        ++*out.ece;
      } else {
        ++*out.ele;
      }
    }
  }

  std::set<std::pair<SpanKey, SpanKey>> gold_pairs;
  std::set<std::pair<EntityKey, EntityKey>> gold_typed_pairs;
  for (const auto& g : gold_set) {
    gold_pairs.insert({span_key(g.subject, mode), span_key(g.object, mode)});
    gold_typed_pairs.insert({entity_key(g.subject, mode), entity_key(g.object, mode)});
  }
  const auto credit = credited(pred, gold_set, mode);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (credit[i]) continue;
    ++out.wrong_triples;
    const auto& t = pred[i];
    if (!gold_pairs.count({span_key(t.subject, mode), span_key(t.object, mode)})) {
      ++out.ple;
    } else if (!gold_typed_pairs.count({entity_key(t.subject, mode), entity_key(t.object, mode)})) {
      ++out.pce;
    } else {
      ++out.rce;
    }
  }
  return out;
}

ErrorCounts error_taxonomy(const TripleSets& predicted, const std::vector<Sentence>& gold, MatchMode mode,
                           bool typed) {
  check_aligned(predicted.size(), gold.size());
  ErrorCounts total;
  if (typed) {
    total.ece = 0;
    total.ele = 0;
  }
  for (std::size_t s = 0; s < gold.size(); ++s) total += error_taxonomy(predicted[s], gold[s], mode, typed);
  return total;
}

TripleSets gold_triples(const std::vector<Sentence>& sentences) {
  TripleSets out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.triples);
  return out;
}

EvalReport evaluate(const TripleSets& predicted, const std::vector<Sentence>& gold, MatchMode mode, bool typed) {
  check_aligned(predicted.size(), gold.size());
  EvalReport report;
  report.mode = mode;
  for (auto p : corpus::kAllPatterns) report.by_pattern[corpus::to_string(p)] = {};
  for (auto b : corpus::kAllBuckets) report.by_bucket[corpus::to_string(b)] = {};
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const Counts c = match_counts(predicted[s], gold[s].triples, mode);
    report.counts += c;
    if (!gold[s].triples.empty()) {
      report.by_pattern[corpus::to_string(corpus::classify_overlap(gold[s]))] += c;
      report.by_bucket[corpus::to_string(corpus::bucket_by_count(gold[s]))] += c;
    }
  }
  report.errors = error_taxonomy(predicted, gold, mode, typed);
  return report;
}

namespace {

json counts_json(const Counts& c) {
  return {{"correct", c.correct}, {"predicted", c.predicted}, {"gold", c.gold},
          {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string row(const std::string& name, const Counts& c) {
  return pad(name, 10) + lpad(std::to_string(c.gold), 8) + lpad(std::to_string(c.predicted), 8) +
         lpad(std::to_string(c.correct), 8) + lpad(fixed(c.precision()), 9) + lpad(fixed(c.recall()), 9) +
         lpad(fixed(c.f1()), 9) + "\n";
}

}  // namespace

json EvalReport::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["precision"] = counts.precision();
  j["recall"] = counts.recall();
  j["f1"] = counts.f1();
  j["counts"] = counts_json(counts);
  j["by_pattern"] = json::object();
  for (const auto& [k, c] : by_pattern) j["by_pattern"][k] = counts_json(c);
  j["by_bucket"] = json::object();
  for (const auto& [k, c] : by_bucket) j["by_bucket"][k] = counts_json(c);
  json err = {{"RCE", errors.rce}, {"PCE", errors.pce}, {"PLE", errors.ple}};
  if (errors.ece) err["ECE"] = *errors.ece;
  if (errors.ele) err["ELE"] = *errors.ele;
  j["errors"] = err;
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  const std::string header = pad("", 10) + lpad("gold", 8) + lpad("pred", 8) + lpad("correct", 8) +
                             lpad("P", 9) + lpad("R", 9) + lpad("F1", 9) + "\n";
  out << "mode: " << to_string(mode) << "\n\n" << header << row("all", counts) << "\n";
  out << header;
  for (auto p : corpus::kAllPatterns) out << row(corpus::to_string(p), by_pattern.at(corpus::to_string(p)));
  out << "\n" << header;
  for (auto b : corpus::kAllBuckets) out << row(corpus::to_string(b), by_bucket.at(corpus::to_string(b)));
  out << "\nerrors\n";
  if (errors.ece) out << pad("  ECE", 10) << lpad(std::to_string(*errors.ece), 8) << "\n";
  if (errors.ele) out << pad("  ELE", 10) << lpad(std::to_string(*errors.ele), 8) << "\n";
  out << pad("  RCE", 10) << lpad(std::to_string(errors.rce), 8) << "\n";
  out << pad("  PCE", 10) << lpad(std::to_string(errors.pce), 8) << "\n";
  out << pad("  PLE", 10) << lpad(std::to_string(errors.ple), 8) << "\n";
  return out.str();
}

}  // namespace qidn::evaluation
