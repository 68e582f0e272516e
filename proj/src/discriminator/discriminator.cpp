#include "qidn/discriminator.hpp"

#include <string>
#include <vector>

#include "qidn/corpus.hpp"
#include "qidn/error.hpp"
#include "qidn/log.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::discriminator {

namespace {

std::vector<std::size_t> eligible_rows(const Tensor& instances, std::span<const std::size_t> labels) {
  if (labels.size() != instances.rows()) throw ConfigError("instance labels do not match instance rows");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != corpus::Vocab::kNull) rows.push_back(i);
  }
  return rows;
}

}  // namespace

Tensor aggregate_instances(const Tensor& q_rel, const std::array<Tensor, heads::kNumBoundaries>& boundary_queries,
                           const Tensor& projection) {
  std::vector<Tensor> terms{num::matmul(q_rel, projection)};
  for (const auto& e : boundary_queries) terms.push_back(e);
  return num::add_n(terms);
}

Tensor instance_instance_loss(const Tensor& instances, std::span<const std::size_t> labels) {
  const auto rows = eligible_rows(instances, labels);
  if (rows.size() < 2) {
    log::debug("instance-instance loss: fewer than 2 eligible instances, contributing 0");
    return Tensor::scalar(0.0);
  }
  std::vector<num::Index2> positives;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (a != b && labels[rows[a]] == labels[rows[b]]) positives.push_back({a, b});
    }
  }
  if (positives.empty()) {
    log::debug("instance-instance loss: no same-type pair in batch, contributing 0");
    return Tensor::scalar(0.0);
  }
  const Tensor v = num::gather_rows(instances, rows);
  num::Mask others(rows.size(), rows.size(), true);
  for (std::size_t a = 0; a < rows.size(); ++a) others.set(a, a, false);
  const Tensor log_probs = num::log_softmax_rows(num::cosine_matrix(v, v), &others);
  return num::scale(num::sum(num::pick(log_probs, positives)), -1.0);
}

Tensor instance_type_loss(const Tensor& instances, std::span<const std::size_t> labels,
                          const Tensor& relation_embeddings) {
  const auto rows = eligible_rows(instances, labels);
  if (rows.empty()) return Tensor::scalar(0.0);
  std::vector<num::Index2> targets;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    const std::size_t label = labels[rows[a]];
    if (label - 1 >= relation_embeddings.rows()) {
      throw ConfigError("relation id " + std::to_string(label) + " has no relation embedding");
    }
    targets.push_back({a, label - 1});
  }
  const Tensor v = num::gather_rows(instances, rows);
  const Tensor log_probs = num::log_softmax_rows(num::cosine_matrix(v, relation_embeddings));
  return num::scale(num::sum(num::pick(log_probs, targets)), -1.0);
}

InstanceDiscriminator::InstanceDiscriminator(std::size_t dim, std::size_t num_relations, num::ParamStore& store,
                                             std::mt19937_64& rng) {
  if (num_relations < 2) throw ConfigError("discriminator needs at least one real relation type");
  projection_ = store.add("discriminator.projection", num::xavier_uniform(dim, dim, rng), num::ParamGroup::other);
  relation_embeddings_ = store.add("discriminator.relation_embeddings",
                                   num::normal_init({num_relations - 1, dim}, 0.0, 0.02, rng), num::ParamGroup::other);
}

}  // namespace qidn::discriminator
