#include "qidn/heads.hpp"

#include "qidn/error.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::heads {

const char* to_string(Boundary b) {
  switch (b) {
    case kSubjectLeft: return "l_sub";
    case kSubjectRight: return "r_sub";
    case kObjectLeft: return "l_obj";
    case kObjectRight: return "r_obj";
  }
  return "?";
}

PredictionHeads::PredictionHeads(const HeadOptions& options, num::ParamStore& store, std::mt19937_64& rng)
    : options_(options) {
  if (options.num_relations < 2) throw ConfigError("relation head needs at least one real type plus null");
  type_ = num::make_linear(store, "heads.relation_type", options.dim, options.num_relations, true,
                           num::ParamGroup::other, rng);
  for (std::size_t b = 0; b < kNumBoundaries; ++b) {
    boundary_[b] = store.add(std::string("heads.boundary.") + to_string(static_cast<Boundary>(b)),
                             num::xavier_uniform(options.dim, options.dim, rng), num::ParamGroup::other);
  }
  token_projection_ = store.add("heads.token_projection", num::xavier_uniform(options.dim, options.dim, rng),
                                num::ParamGroup::other);
  if (options.num_entity_types > 1) {
    subject_type_ = num::make_linear(store, "heads.subject_type", options.dim, options.num_entity_types, true,
                                     num::ParamGroup::other, rng);
    object_type_ = num::make_linear(store, "heads.object_type", options.dim, options.num_entity_types, true,
                                    num::ParamGroup::other, rng);
  }
}

Tensor PredictionHeads::relation_type_probs(const Tensor& q_rel) const { return num::softmax_rows(type_(q_rel)); }

BoundaryOutputs PredictionHeads::boundary_probs(const Tensor& q_ent, const Tensor& tokens) const {
  if (tokens.rows() == 0) throw ConfigError("boundary head needs at least one token");
  BoundaryOutputs out;
  const Tensor token_keys = num::normalize_rows(num::matmul(tokens, token_projection_));
  for (std::size_t b = 0; b < kNumBoundaries; ++b) {
    out.queries[b] = num::matmul(q_ent, boundary_[b]);
    out.logits[b] = num::matmul_nt(num::normalize_rows(out.queries[b]), token_keys);
    out.probs[b] = num::softmax_rows(out.logits[b]);
  }
  return out;
}

std::pair<Tensor, Tensor> PredictionHeads::entity_type_probs(const Tensor& q_ent) const {
  if (!has_entity_types()) throw ConfigError("entity-type heads are disabled for a corpus without entity types");
  return {num::softmax_rows((*subject_type_)(q_ent)), num::softmax_rows((*object_type_)(q_ent))};
}

HeadOutputs PredictionHeads::operator()(const Tensor& q_rel, const Tensor& q_ent, const Tensor& tokens) const {
  HeadOutputs out;
  out.type_probs = relation_type_probs(q_rel);
  out.boundary = boundary_probs(q_ent, tokens);
  if (has_entity_types()) {
    auto [sub, obj] = entity_type_probs(q_ent);
    out.subject_type_probs = sub;
    out.object_type_probs = obj;
  }
  return out;
}

}  // namespace qidn::heads
