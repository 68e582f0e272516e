#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "qidn/corpus.hpp"
#include "qidn/heads.hpp"

namespace qidn::training {

using CostMatrix = std::vector<std::vector<double>>;  // rows = gold triples, cols = queries

// Gold triple as label indices: relation id, boundary token per role in
// heads::Boundary order, and entity-type ids (null when untyped).
struct GoldTriple {
  std::size_t relation = 0;
  std::array<std::size_t, heads::kNumBoundaries> boundary{};
  std::size_t subject_type = 0;
  std::size_t object_type = 0;
};

std::vector<GoldTriple> encode_gold(const corpus::Sentence& sentence, const corpus::Vocab& vocab);

struct Assignment {
  std::vector<std::size_t> columns;  // columns[row]
  double cost = 0.0;                 // sum of cost[row][columns[row]] in row order
};

// Minimum-cost injective assignment of every row to a distinct column;
// requires rows <= cols. Among optimal assignments the lexicographically
// smallest column sequence wins.
Assignment hungarian(const CostMatrix& cost);

struct Matching {
  std::vector<std::size_t> sigma;  // gold index -> query index
  CostMatrix cost;
};

// cost(g, i) = -[log P^t_{i,type(g)} + sum_delta log P^delta_{i,pos_delta(g)}]
// plus the entity-type log-probabilities when those heads are present.
// Probabilities are clamped at 1e-12.
CostMatrix matching_cost(const heads::HeadOutputs& outputs, const std::vector<GoldTriple>& gold);
Matching match_queries(const heads::HeadOutputs& outputs, const std::vector<GoldTriple>& gold);

}  // namespace qidn::training
