#include "qidn/decoder.hpp"

#include <cmath>

#include "qidn/error.hpp"

namespace qidn::decoder {

const char* to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::full: return "full";
    case MaskMode::no_ent_to_rel: return "no_ent_to_rel";
    case MaskMode::no_rel_to_ent: return "no_rel_to_ent";
    case MaskMode::no_cross: return "no_cross";
  }
  return "?";
}

MaskMode mask_mode_from_string(const std::string& name) {
  for (MaskMode m : {MaskMode::full, MaskMode::no_ent_to_rel, MaskMode::no_rel_to_ent, MaskMode::no_cross}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown mask mode '" + name + "'");
}

num::Mask branch_mask(std::size_t num_queries, MaskMode mode) {
  const std::size_t m = num_queries;
  num::Mask mask(2 * m, 2 * m, true);
  const bool hide_ent_from_rel = mode == MaskMode::no_ent_to_rel || mode == MaskMode::no_cross;
  const bool hide_rel_from_ent = mode == MaskMode::no_rel_to_ent || mode == MaskMode::no_cross;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (hide_ent_from_rel) mask.set(i, m + j, false);
      if (hide_rel_from_ent) mask.set(m + i, j, false);
    }
  }
  return mask;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const num::Mask* mask, Tensor* weights_out) {
  if (q.cols() != k.cols()) throw ConfigError("attention: query/key widths differ");
  if (k.rows() != v.rows()) throw ConfigError("attention: key/value row counts differ");
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor weights = num::softmax_rows(num::scale(num::matmul_nt(q, k), inv_scale), mask);
  if (weights_out != nullptr) *weights_out = weights;
  return num::matmul(weights, v);
}

Tensor MultiHeadAttention::operator()(const Tensor& rows, const Tensor& memory, const num::Mask* mask,
                                      std::vector<Tensor>* weights_out) const {
  const Tensor q = query(rows);
  const Tensor k = key(memory);
  const Tensor v = value(memory);
  const std::size_t d = q.cols();
  if (d % heads != 0) throw ConfigError("model width must be divisible by the head count");
  const std::size_t dk = d / heads;
  if (heads == 1) {
    Tensor w;
    Tensor out = attention(q, k, v, mask, weights_out ? &w : nullptr);
    if (weights_out) weights_out->push_back(w);
    return output(out);
  }
  std::vector<Tensor> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor w;
    per_head.push_back(attention(num::slice_cols(q, h * dk, dk), num::slice_cols(k, h * dk, dk),
                                 num::slice_cols(v, h * dk, dk), mask, weights_out ? &w : nullptr));
    if (weights_out) weights_out->push_back(w);
  }
  return output(num::concat_cols(per_head));
}

QueryBank make_query_bank(num::ParamStore& store, std::size_t num_queries, std::size_t dim, std::mt19937_64& rng) {
  if (num_queries == 0) throw ConfigError("need at least one instance query");
  QueryBank bank;
  bank.queries = store.add("decoder.queries", num::normal_init({num_queries, dim}, 0.0, 0.02, rng),
                           num::ParamGroup::other);
  bank.w_rel = store.add("decoder.w_rel", num::xavier_uniform(dim, dim, rng), num::ParamGroup::other);
  bank.w_ent = store.add("decoder.w_ent", num::xavier_uniform(dim, dim, rng), num::ParamGroup::other);
  return bank;
}

std::pair<Tensor, Tensor> project_queries(const QueryBank& bank) {
  return {num::matmul(bank.queries, bank.w_rel), num::matmul(bank.queries, bank.w_ent)};
}

nlohmann::json AttentionTrace::to_json(std::size_t num_queries) const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < self_attention.size(); ++l) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& w : self_attention[l]) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < w.rows(); ++i) {
        std::vector<double> row(w.values().begin() + static_cast<std::ptrdiff_t>(i * w.cols()),
                                w.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * w.cols()));
        rows.push_back(row);
      }
      heads.push_back(rows);
    }
    layers.push_back({{"layer", l}, {"heads", heads}});
  }
  return {{"num_queries", num_queries}, {"row_order", "relation branch rows 0..M-1, entity branch rows M..2M-1"},
          {"layers", layers}};
}

namespace {

MultiHeadAttention make_attention(num::ParamStore& store, const std::string& prefix, const DecoderOptions& o,
                                  std::mt19937_64& rng) {
  MultiHeadAttention a;
  a.heads = o.heads;
  a.query = num::make_linear(store, prefix + ".query", o.dim, o.dim, true, num::ParamGroup::other, rng);
  a.key = num::make_linear(store, prefix + ".key", o.dim, o.dim, false, num::ParamGroup::other, rng);
  a.value = num::make_linear(store, prefix + ".value", o.dim, o.dim, true, num::ParamGroup::other, rng);
  a.output = num::make_linear(store, prefix + ".output", o.dim, o.dim, true, num::ParamGroup::other, rng);
  return a;
}

}  // namespace

Decoder::Decoder(const DecoderOptions& options, num::ParamStore& store, std::mt19937_64& rng) : options_(options) {
  if (options.layers == 0) throw ConfigError("decoder needs at least one layer (L >= 1)");
  if (options.heads == 0 || options.dim % options.heads != 0) {
    throw ConfigError("decoder width must be divisible by the head count");
  }
  for (std::size_t l = 0; l < options.layers; ++l) {
    const std::string p = "decoder.layer." + std::to_string(l);
    Layer layer;
    layer.self_attn = make_attention(store, p + ".self", options, rng);
    layer.cross_attn = make_attention(store, p + ".cross", options, rng);
    layer.ffn_in = num::make_linear(store, p + ".ffn_in", options.dim, options.ffn_dim, true, num::ParamGroup::other, rng);
    layer.ffn_out = num::make_linear(store, p + ".ffn_out", options.ffn_dim, options.dim, true, num::ParamGroup::other, rng);
    layer.norm_self = num::make_layer_norm(store, p + ".norm_self", options.dim, num::ParamGroup::other);
    layer.norm_cross = num::make_layer_norm(store, p + ".norm_cross", options.dim, num::ParamGroup::other);
    layer.norm_ffn = num::make_layer_norm(store, p + ".norm_ffn", options.dim, num::ParamGroup::other);
    layers_.push_back(std::move(layer));
  }
}

std::pair<Tensor, Tensor> Decoder::operator()(const Tensor& rel0, const Tensor& ent0, const Tensor& span_memory,
                                              const num::DropoutContext& dropout, AttentionTrace* trace) const {
  const std::size_t m = rel0.rows();
  if (ent0.rows() != m) throw ConfigError("decoder: branch row counts differ");
  if (rel0.cols() != options_.dim || ent0.cols() != options_.dim || span_memory.cols() != options_.dim) {
    throw ConfigError("decoder: inputs must have width d");
  }
  const num::Mask mask = branch_mask(m, options_.mask);
  Tensor x = num::concat_rows({rel0, ent0});
  if (trace != nullptr) trace->self_attention.clear();
  for (const Layer& layer : layers_) {
    std::vector<Tensor>* weights = nullptr;
    if (trace != nullptr) {
      trace->self_attention.emplace_back();
      weights = &trace->self_attention.back();
    }
    x = layer.norm_self(num::add(x, dropout(layer.self_attn(x, x, &mask, weights))));
    x = layer.norm_cross(num::add(x, dropout(layer.cross_attn(x, span_memory, nullptr))));
    x = layer.norm_ffn(num::add(x, dropout(layer.ffn_out(num::gelu(layer.ffn_in(x))))));
  }
  return {num::slice_rows(x, 0, m), num::slice_rows(x, m, m)};
}

}  // namespace qidn::decoder
