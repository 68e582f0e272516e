#pragma once

#include <string>
#include <vector>

#include "qidn/corpus.hpp"
#include "qidn/numerics/tensor.hpp"

namespace qidn::test {

inline corpus::Entity ent(std::size_t start, std::size_t end, std::string type = "") {
  return {start, end, std::move(type)};
}

inline corpus::Triple tri(corpus::Entity s, std::string relation, corpus::Entity o) {
  return {std::move(s), std::move(o), std::move(relation)};
}

// Sentence of n placeholder tokens whose entities are the triple arguments.
inline corpus::Sentence sentence(std::size_t n, std::vector<corpus::Triple> triples) {
  corpus::Sentence s;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back("t" + std::to_string(i));
  for (const auto& t : triples) {
    s.entities.push_back(t.subject);
    s.entities.push_back(t.object);
  }
  s.triples = std::move(triples);
  return s;
}

inline std::vector<double> values(const num::Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace qidn::test
