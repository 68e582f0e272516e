#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qidn/corpus.hpp"

namespace qidn::corpus {

// Template-generated corpus over a fixed 50-token vocabulary with entity types
// {PER, LOC, ORG} and relations {born_in, lives_in, works_for, based_in}. Each
// sentence carries 1-3 triples; clause templates produce Normal, SEO and EPO
// sentences.
struct SyntheticOptions {
  std::size_t sentences = 200;
  std::uint64_t seed = 7;
};

std::vector<Sentence> generate_synthetic(const SyntheticOptions& options);
LabelSet synthetic_labels();
const std::vector<std::string>& synthetic_vocabulary();

}  // namespace qidn::corpus
