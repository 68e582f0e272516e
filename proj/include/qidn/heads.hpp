#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>

#include "qidn/numerics/layers.hpp"

namespace qidn::heads {

using num::Tensor;

// Boundary roles, in this fixed order.
enum Boundary : std::size_t { kSubjectLeft = 0, kSubjectRight = 1, kObjectLeft = 2, kObjectRight = 3 };
inline constexpr std::size_t kNumBoundaries = 4;
const char* to_string(Boundary b);

struct BoundaryOutputs {
  std::array<Tensor, kNumBoundaries> probs;    // P^delta, [M, n]
  std::array<Tensor, kNumBoundaries> logits;   // cosine similarities before softmax
  std::array<Tensor, kNumBoundaries> queries;  // E_delta = Q_e W_delta, [M, d]
};

struct HeadOutputs {
  Tensor type_probs;  // P^t, [M, |Y_r|] including the null column
  BoundaryOutputs boundary;
  std::optional<Tensor> subject_type_probs;  // [M, |Y_e|]
  std::optional<Tensor> object_type_probs;
};

struct HeadOptions {
  std::size_t dim = 64;
  std::size_t num_relations = 2;     // including null
  std::size_t num_entity_types = 1;  // including null; > 1 enables the entity-type heads
};

class PredictionHeads {
 public:
  PredictionHeads(const HeadOptions& options, num::ParamStore& store, std::mt19937_64& rng);

  // softmax(Q_r W_t + b_t) per row.
  Tensor relation_type_probs(const Tensor& q_rel) const;
  // P^delta_ij = softmax_j cos(E_delta^i, H_s^j) with E_delta = Q_e W_delta, H_s = H W_s.
  BoundaryOutputs boundary_probs(const Tensor& q_ent, const Tensor& tokens) const;
  // (subject type, object type) distributions from the entity branch.
  std::pair<Tensor, Tensor> entity_type_probs(const Tensor& q_ent) const;

  HeadOutputs operator()(const Tensor& q_rel, const Tensor& q_ent, const Tensor& tokens) const;

  bool has_entity_types() const { return subject_type_.has_value(); }
  const HeadOptions& options() const { return options_; }

 private:
  HeadOptions options_;
  num::Linear type_;
  std::array<Tensor, kNumBoundaries> boundary_;  // W_delta, [d, d]
  Tensor token_projection_;                      // W_s, [d, d], shared by all four roles
  std::optional<num::Linear> subject_type_;
  std::optional<num::Linear> object_type_;
};

}  // namespace qidn::heads
