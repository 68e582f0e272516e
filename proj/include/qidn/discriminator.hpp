#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>

#include "qidn/heads.hpp"
#include "qidn/numerics/layers.hpp"

namespace qidn::discriminator {

using num::Tensor;

// v = Q_r W + sum_delta E_delta.
Tensor aggregate_instances(const Tensor& q_rel, const std::array<Tensor, heads::kNumBoundaries>& boundary_queries,
                           const Tensor& projection);

// Supervised InfoNCE between instances. labels[i] is a relation id (null = 0
// excludes the row). For every ordered same-type pair (i, j), i != j:
//   -log exp S(v_i, v_j) / sum_{j' != i} exp S(v_i, v_j'),
// the denominator running over all other eligible instances. Returns 0 when
// there is no positive pair.
Tensor instance_instance_loss(const Tensor& instances, std::span<const std::size_t> labels);

// -log exp S(v_i, r_c) / sum_c' exp S(v_i, r_c') over eligible instances.
// relation_embeddings row k belongs to relation id k + 1.
Tensor instance_type_loss(const Tensor& instances, std::span<const std::size_t> labels,
                          const Tensor& relation_embeddings);

class InstanceDiscriminator {
 public:
  // num_relations includes the null label, which has no embedding row.
  InstanceDiscriminator(std::size_t dim, std::size_t num_relations, num::ParamStore& store, std::mt19937_64& rng);

  Tensor aggregate(const Tensor& q_rel, const std::array<Tensor, heads::kNumBoundaries>& boundary_queries) const {
    return aggregate_instances(q_rel, boundary_queries, projection_);
  }
  const Tensor& relation_embeddings() const { return relation_embeddings_; }

 private:
  Tensor projection_;           // W, [d, d]
  Tensor relation_embeddings_;  // R, [|Y_r| - 1, d]
};

}  // namespace qidn::discriminator
