#include "qidn/matching.hpp"

#include <cmath>
#include <limits>

#include "qidn/error.hpp"

namespace qidn::training {

std::vector<GoldTriple> encode_gold(const corpus::Sentence& sentence, const corpus::Vocab& vocab) {
  std::vector<GoldTriple> out;
  out.reserve(sentence.triples.size());
  for (const auto& t : sentence.triples) {
    GoldTriple g;
    g.relation = vocab.relation_id(t.relation);
    g.boundary = {t.subject.start, t.subject.end, t.object.start, t.object.end};
    g.subject_type = vocab.entity_type_id(t.subject.type);
    g.object_type = vocab.entity_type_id(t.object.type);
    out.push_back(g);
  }
  return out;
}

namespace {

// Shortest augmenting path with potentials; rows <= cols.
std::vector<std::size_t> solve(const CostMatrix& a, std::size_t n, std::size_t m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> columns(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) columns[p[j] - 1] = j - 1;
  }
  return columns;
}

double assignment_cost(const CostMatrix& a, const std::vector<std::size_t>& columns) {
  double total = 0.0;
  for (std::size_t r = 0; r < columns.size(); ++r) total += a[r][columns[r]];
  return total;
}

// Optimal cost over rows [first, n) restricted to columns not in `taken`.
double residual_cost(const CostMatrix& a, std::size_t first, const std::vector<bool>& taken) {
  const std::size_t n = a.size() - first;
  if (n == 0) return 0.0;
  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < taken.size(); ++c) {
    if (!taken[c]) free_cols.push_back(c);
  }
  CostMatrix sub(n, std::vector<double>(free_cols.size()));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < free_cols.size(); ++c) sub[r][c] = a[first + r][free_cols[c]];
  }
  return assignment_cost(sub, solve(sub, n, free_cols.size()));
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  if (n > m) throw ConfigError("assignment needs rows <= columns");
  for (const auto& row : cost) {
    if (row.size() != m) throw ConfigError("cost matrix rows differ in length");
    for (double c : row) {
      if (!std::isfinite(c)) throw NumericError("cost matrix contains a non-finite entry");
    }
  }
  const double best = assignment_cost(cost, solve(cost, n, m));
  const double tolerance = 1e-12 * (1.0 + std::abs(best));

  // Fix rows in order, each to the lowest column that still admits an optimum.
  Assignment out;
  std::vector<bool> taken(m, false);
  double fixed_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t chosen = m;
    for (std::size_t c = 0; c < m && chosen == m; ++c) {
      if (taken[c]) continue;
      taken[c] = true;
      if (fixed_sum + cost[r][c] + residual_cost(cost, r + 1, taken) <= best + tolerance) chosen = c;
      taken[c] = false;
    }
    if (chosen == m) throw NumericError("assignment tie-break lost the optimum");
    taken[chosen] = true;
    fixed_sum += cost[r][chosen];
    out.columns.push_back(chosen);
  }
  out.cost = assignment_cost(cost, out.columns);
  return out;
}

namespace {

double neg_log(double p) {
  if (p == 0.0) throw NumericError("probability underflowed to exactly 0 in the matching cost");
  return -std::log(std::max(p, 1e-12));
}

}  // namespace

CostMatrix matching_cost(const heads::HeadOutputs& out, const std::vector<GoldTriple>& gold) {
  const std::size_t m = out.type_probs.rows();
  const bool typed = out.subject_type_probs.has_value();
  CostMatrix cost(gold.size(), std::vector<double>(m, 0.0));
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t i = 0; i < m; ++i) {
      double c = neg_log(out.type_probs(i, gold[g].relation));
      for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) c += neg_log(out.boundary.probs[b](i, gold[g].boundary[b]));
      if (typed) {
        c += neg_log((*out.subject_type_probs)(i, gold[g].subject_type));
        c += neg_log((*out.object_type_probs)(i, gold[g].object_type));
      }
      cost[g][i] = c;
    }
  }
  return cost;
}

Matching match_queries(const heads::HeadOutputs& out, const std::vector<GoldTriple>& gold) {
  const std::size_t m = out.type_probs.rows();
  if (gold.size() > m) {
    throw ConfigError("sentence has " + std::to_string(gold.size()) + " gold triples but only " + std::to_string(m) +
                      " queries; increase model.num_queries");
  }
  Matching matching;
  matching.cost = matching_cost(out, gold);
  matching.sigma = hungarian(matching.cost).columns;
  return matching;
}

}  // namespace qidn::training
