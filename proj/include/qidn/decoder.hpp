#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qidn/numerics/layers.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::decoder {

using num::Tensor;

// Visibility between the relation and entity query branches in decoder
// self-attention.
enum class MaskMode {
  full,           // both branches see each other
  no_ent_to_rel,  // relation queries cannot see entity queries
  no_rel_to_ent,  // entity queries cannot see relation queries
  no_cross,       // branches are isolated
};

const char* to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& name);

// Self-attention mask over the 2M rows [relation branch; entity branch].
num::Mask branch_mask(std::size_t num_queries, MaskMode mode);

// softmax(Q K^T / sqrt(d_k)) V with d_k = q.cols(). When weights_out is given the
// attention matrix is stored there.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const num::Mask* mask,
                 Tensor* weights_out = nullptr);

struct MultiHeadAttention {
  num::Linear query, key, value, output;
  std::size_t heads = 1;

  // weights_out, when non-null, receives one [a, b] matrix per head.
  Tensor operator()(const Tensor& rows, const Tensor& memory, const num::Mask* mask,
                    std::vector<Tensor>* weights_out = nullptr) const;
};

struct QueryBank {
  Tensor queries;  // Q, [M, d]
  Tensor w_rel;    // W_r, [d, d]
  Tensor w_ent;    // W_e, [d, d]

  std::size_t size() const { return queries.rows(); }
};

QueryBank make_query_bank(num::ParamStore& store, std::size_t num_queries, std::size_t dim, std::mt19937_64& rng);

// (Q W_r, Q W_e).
std::pair<Tensor, Tensor> project_queries(const QueryBank& bank);

struct DecoderOptions {
  std::size_t dim = 64;
  std::size_t layers = 5;
  std::size_t heads = 8;
  std::size_t ffn_dim = 128;
  MaskMode mask = MaskMode::full;
};

// Per-layer, per-head self-attention weights [2M, 2M].
struct AttentionTrace {
  std::vector<std::vector<Tensor>> self_attention;

  nlohmann::json to_json(std::size_t num_queries) const;
};

class Decoder {
 public:
  Decoder(const DecoderOptions& options, num::ParamStore& store, std::mt19937_64& rng);

  // Post-norm layers: self-attention over the 2M branch rows (masked by mode),
  // cross-attention to the span memory, feed-forward.
  std::pair<Tensor, Tensor> operator()(const Tensor& rel0, const Tensor& ent0, const Tensor& span_memory,
                                       const num::DropoutContext& dropout, AttentionTrace* trace = nullptr) const;

  const DecoderOptions& options() const { return options_; }
  void set_mask_mode(MaskMode mode) { options_.mask = mode; }

 private:
  struct Layer {
    MultiHeadAttention self_attn;
    MultiHeadAttention cross_attn;
    num::Linear ffn_in, ffn_out;
    num::LayerNorm norm_self, norm_cross, norm_ffn;
  };

  DecoderOptions options_;
  std::vector<Layer> layers_;
};

}  // namespace qidn::decoder
