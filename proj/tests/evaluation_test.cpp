#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eval_suite.hpp"
#include "helpers.hpp"
#include "qidn/error.hpp"
#include "qidn/evaluation.hpp"

namespace qidn::evaluation {
namespace {

using test::ent;
using test::tri;

void expect_errors(const ErrorCounts& got, const test::ExpectedErrors& want) {
  ASSERT_TRUE(got.ece.has_value());
  ASSERT_TRUE(got.ele.has_value());
  EXPECT_EQ(*got.ece, want.ece);
  EXPECT_EQ(*got.ele, want.ele);
  EXPECT_EQ(got.rce, want.rce);
  EXPECT_EQ(got.pce, want.pce);
  EXPECT_EQ(got.ple, want.ple);
  EXPECT_EQ(got.wrong_entities, want.ece + want.ele);
  EXPECT_EQ(got.wrong_triples, want.rce + want.pce + want.ple);
}

TEST(Suite, StrictMatchesHandCount) {
  const auto s = test::eval_suite();
  const EvalReport r = evaluate(s.predicted, s.gold, MatchMode::strict, true);
  EXPECT_EQ(r.counts, s.strict);
  EXPECT_DOUBLE_EQ(r.counts.precision(), 11.0 / 18.0);
  EXPECT_DOUBLE_EQ(r.counts.recall(), 11.0 / 17.0);
  EXPECT_NEAR(r.counts.f1(), 22.0 / 35.0, 1e-15);
  expect_errors(r.errors, s.strict_errors);
  EXPECT_EQ(r.by_pattern, s.strict_patterns);
  EXPECT_EQ(r.by_bucket, s.strict_buckets);
}

TEST(Suite, PartialMatchesHandCount) {
  const auto s = test::eval_suite();
  const EvalReport r = evaluate(s.predicted, s.gold, MatchMode::partial, true);
  EXPECT_EQ(r.counts, s.partial);
  EXPECT_NEAR(r.counts.f1(), 24.0 / 35.0, 1e-15);
  expect_errors(r.errors, s.partial_errors);
  const Scores p = partial_match_f1(s.predicted, gold_triples(s.gold));
  EXPECT_NEAR(p.f1, 24.0 / 35.0, 1e-15);
}

TEST(Suite, CoversEveryPatternAndCategory) {
  const auto s = test::eval_suite();
  for (auto p : corpus::kAllPatterns) EXPECT_GT(s.strict_patterns.at(corpus::to_string(p)).gold, 0u);
  for (const auto* e : {&s.strict_errors, &s.partial_errors}) {
    EXPECT_GT(e->ece + e->ele + e->rce + e->pce + e->ple, 0u);
  }
  EXPECT_GT(s.strict_errors.ece, 0u);
  EXPECT_GT(s.strict_errors.ele, 0u);
  EXPECT_GT(s.strict_errors.rce, 0u);
  EXPECT_GT(s.strict_errors.pce, 0u);
  EXPECT_GT(s.strict_errors.ple, 0u);
}

TEST(Suite, UntypedCorpusHasNoEntityCounts) {
  const auto s = test::eval_suite();
  const EvalReport r = evaluate(s.predicted, s.gold, MatchMode::strict, false);
  EXPECT_FALSE(r.errors.ece.has_value());
  EXPECT_FALSE(r.errors.ele.has_value());
  EXPECT_EQ(r.errors.wrong_triples, 7u);
  EXPECT_FALSE(r.to_json()["errors"].contains("ECE"));
}

TEST(Suite, PatternSubsetsAddUpToTheTotal) {
  const auto s = test::eval_suite();
  for (MatchMode mode : {MatchMode::strict, MatchMode::partial}) {
    const EvalReport r = evaluate(s.predicted, s.gold, mode, true);
    Counts patterns, buckets;
    for (const auto& [k, c] : r.by_pattern) patterns += c;
    for (const auto& [k, c] : r.by_bucket) buckets += c;
    // S9 has no gold triples: its one prediction counts only in the total.
    EXPECT_EQ(patterns.correct, r.counts.correct);
    EXPECT_EQ(patterns.gold, r.counts.gold);
    EXPECT_EQ(patterns.predicted + 1, r.counts.predicted);
    EXPECT_EQ(buckets, patterns);
  }
}

TEST(Suite, ReportsSerialize) {
  const auto s = test::eval_suite();
  const EvalReport r = evaluate(s.predicted, s.gold, MatchMode::strict, true);
  const auto j = r.to_json();
  EXPECT_EQ(j["mode"], "strict");
  EXPECT_EQ(j["by_pattern"].size(), 4u);
  EXPECT_EQ(j["by_bucket"].size(), 5u);
  const std::string text = r.to_text();
  for (const char* key : {"Normal", "EPO", "SEO", "SOO", "N>=5", "PLE", "ECE"}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
}

TEST(Match, PartialAcceptsTheSameLastToken) {
  const TripleSets gold{{tri(ent(3, 4, "A"), "r", ent(6, 6, "B"))}};
  const TripleSets pred{{tri(ent(2, 4, "A"), "r", ent(6, 6, "B"))}};
  EXPECT_EQ(strict_match_f1(pred, gold).f1, 0.0);
  EXPECT_EQ(partial_match_f1(pred, gold).f1, 1.0);
  EXPECT_EQ(strict_match_f1(gold, gold).f1, 1.0);
  EXPECT_EQ(partial_match_f1(gold, gold).f1, 1.0);
}

TEST(Match, TypesAndRelationStillCount) {
  const TripleSets gold{{tri(ent(0, 0, "A"), "r", ent(2, 2, "B")), tri(ent(4, 4, "A"), "r", ent(6, 6, "B"))}};
  const TripleSets pred{{tri(ent(0, 0, "A"), "r", ent(2, 2, "B")), tri(ent(4, 4, "B"), "r", ent(6, 6, "B"))}};
  for (const Scores& s : {strict_match_f1(pred, gold), partial_match_f1(pred, gold)}) {
    EXPECT_DOUBLE_EQ(s.precision, 0.5);
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
    EXPECT_DOUBLE_EQ(s.f1, 0.5);
  }
}

TEST(Match, EachGoldCreditedOnce) {
  // Under partial match two distinct predictions share one gold triple.
  const std::vector<corpus::Triple> gold{tri(ent(2, 4), "r", ent(6, 6))};
  const std::vector<corpus::Triple> pred{tri(ent(2, 4), "r", ent(6, 6)), tri(ent(3, 4), "r", ent(6, 6))};
  const Counts c = match_counts(pred, gold, MatchMode::partial);
  EXPECT_EQ(c, (Counts{1, 2, 1}));
}

TEST(Match, EmptyInputsAndAlignment) {
  const Counts none = match_counts(TripleSets{{}}, TripleSets{{}}, MatchMode::strict);
  EXPECT_EQ(none.precision(), 0.0);
  EXPECT_EQ(none.recall(), 0.0);
  EXPECT_EQ(none.f1(), 0.0);
  EXPECT_THROW(strict_match_f1(TripleSets(2), TripleSets(3)), DataError);
  EXPECT_EQ(match_mode_from_string("partial"), MatchMode::partial);
  EXPECT_THROW(match_mode_from_string("fuzzy"), ConfigError);
}

// Random edits of gold: shift a start token, change a type or relation, drop
// or add a triple.
TEST(Match, PartialNeverBelowStrict) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pos(0, 11), edit(0, 5), count(0, 4);
  const std::vector<std::string> types{"A", "B"}, rels{"r1", "r2", "r3"};
  auto random_entity = [&] {
    std::size_t a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    return ent(a, b, types[rng() % 2]);
  };
  for (int trial = 0; trial < 100; ++trial) {
    TripleSets gold, pred;
    for (int s = 0; s < 5; ++s) {
      std::vector<corpus::Triple> g;
      for (std::size_t k = count(rng); k > 0; --k) g.push_back(tri(random_entity(), rels[rng() % 3], random_entity()));
      std::vector<corpus::Triple> p;
      for (auto t : g) {
        switch (edit(rng)) {
          case 0: t.subject.start = t.subject.start > 0 ? t.subject.start - 1 : t.subject.start; break;
          case 1: t.object.start = std::min(t.object.start + 1, t.object.end); break;
          case 2: t.subject.type = t.subject.type == "A" ? "B" : "A"; break;
          case 3: t.relation = rels[rng() % 3]; break;
          case 4: continue;  // dropped
          default: break;
        }
        p.push_back(t);
      }
      if (rng() % 2) p.push_back(tri(random_entity(), rels[rng() % 3], random_entity()));
      gold.push_back(g);
      pred.push_back(p);
    }
    const Counts strict = match_counts(pred, gold, MatchMode::strict);
    const Counts partial = match_counts(pred, gold, MatchMode::partial);
    EXPECT_GE(partial.correct, strict.correct);
    EXPECT_GE(partial.f1(), strict.f1()) << "trial " << trial;
  }
}

// ---- topology

TEST(Topology, TwoTypesLieOnTheFirstAxis) {
  const auto pts = export_relation_topology({{2.0, 0.0}, {0.0, 5.0}}, {"a", "b"}, {{"a", 3}, {"b", 3}}, 1);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(pts[0].x, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(pts[1].x, -std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(pts[0].y, 0.0, 1e-12);
  EXPECT_NEAR(pts[1].y, 0.0, 1e-12);
}

TEST(Topology, OrthonormalTypesFormAnEquilateralTriangle) {
  const auto pts = export_relation_topology({{1, 0, 0}, {0, 3, 0}, {0, 0, 0.5}}, {"a", "b", "c"},
                                            {{"a", 1}, {"b", 1}, {"c", 1}}, 1);
  ASSERT_EQ(pts.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      EXPECT_NEAR(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y), std::sqrt(2.0), 1e-12);
    }
  }
}

TEST(Topology, SimilarTypesStayClose) {
  const auto pts = export_relation_topology({{1.0, 0.1, 0.0}, {1.0, 0.0, 0.1}, {-1.0, 0.2, 0.3}, {0.0, 1.0, -1.0}},
                                            {"a", "b", "c", "d"}, {{"a", 5}, {"b", 5}, {"c", 5}, {"d", 5}}, 1);
  auto dist = [&](std::size_t i, std::size_t j) { return std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y); };
  EXPECT_LT(dist(0, 1), dist(0, 2));
  EXPECT_LT(dist(0, 1), dist(0, 3));
  EXPECT_LT(dist(0, 1), dist(1, 2));
}

TEST(Topology, RareTypesAreDroppedAndZeroVarianceGivesZeros) {
  const auto pts = export_relation_topology({{1, 1}, {2, 2}, {0, 1}}, {"a", "b", "c"}, {{"a", 4}, {"b", 4}, {"c", 1}}, 2);
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.x, 0.0);
    EXPECT_EQ(p.y, 0.0);
  }
  EXPECT_EQ(to_json(pts).size(), 2u);
  EXPECT_THROW(export_relation_topology({{1, 0}, {0, 1}}, {"a", "b"}, {{"a", 4}}, 2), DataError);
  EXPECT_THROW(export_relation_topology({{1, 0}, {0, 0}}, {"a", "b"}, {{"a", 1}, {"b", 1}}, 1), NumericError);
}

TEST(Topology, InvariantToRowScale) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> e(5, std::vector<double>(6));
  for (auto& row : e) {
    for (auto& v : row) v = n(rng);
  }
  std::vector<std::string> labels{"a", "b", "c", "d", "e"};
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) counts[l] = 1;
  auto scaled = e;
  for (std::size_t r = 0; r < scaled.size(); ++r) {
    for (auto& v : scaled[r]) v *= 0.5 + static_cast<double>(r);
  }
  const auto a = export_relation_topology(e, labels, counts, 1);
  const auto b = export_relation_topology(scaled, labels, counts, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].x, b[i].x, 1e-10);
    EXPECT_NEAR(a[i].y, b[i].y, 1e-10);
  }
}

}  // namespace
}  // namespace qidn::evaluation
