#include "qidn/encoder.hpp"

#include <string>

#include "qidn/error.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::encoder {

std::vector<SpanBounds> enumerate_spans(std::size_t n, std::size_t max_span_len) {
  if (n == 0 || max_span_len == 0) throw ConfigError("enumerate_spans requires n >= 1 and max_span_len >= 1");
  std::vector<SpanBounds> spans;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n && j - i + 1 <= max_span_len; ++j) spans.push_back({i, j});
  }
  return spans;
}

BiLstmEncoder::BiLstmEncoder(const BiLstmOptions& options, num::ParamStore& store, std::mt19937_64& rng)
    : options_(options) {
  if (options.dim % 2 != 0) throw ConfigError("BiLSTM width must be even");
  if (options.layers == 0) throw ConfigError("BiLSTM needs at least one layer");
  if (options.vocab_size == 0) throw ConfigError("BiLSTM needs a non-empty vocabulary");
  const std::size_t d = options.dim;
  const std::size_t h = d / 2;
  embedding_ = store.add("encoder.embedding", num::normal_init({options.vocab_size, d}, 0.0, 1.0, rng),
                         num::ParamGroup::encoder);
  for (std::size_t l = 0; l < options.layers; ++l) {
    for (const char* dir_name : {"fwd", "bwd"}) {
      const std::string prefix = "encoder.lstm." + std::to_string(l) + "." + dir_name;
      Direction dir;
      dir.input = num::make_linear(store, prefix + ".input", d, 4 * h, true, num::ParamGroup::other, rng);
      // Forget-gate bias starts at 1.
      auto bias = dir.input.bias.mutable_values();
      for (std::size_t k = h; k < 2 * h; ++k) bias[k] = 1.0;
      dir.recurrent = store.add(prefix + ".recurrent", num::xavier_uniform(h, 4 * h, rng), num::ParamGroup::other);
      (std::string(dir_name) == "fwd" ? forward_ : backward_).push_back(std::move(dir));
    }
  }
}

Tensor BiLstmEncoder::run_direction(const Direction& dir, const Tensor& inputs, bool reverse) const {
  const std::size_t n = inputs.rows();
  const std::size_t h = options_.dim / 2;
  const Tensor gates_in = dir.input(inputs);
  Tensor hidden = Tensor::zeros({1, h});
  Tensor cell = Tensor::zeros({1, h});
  std::vector<Tensor> outputs(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    Tensor gates = num::add(num::slice_rows(gates_in, t, 1), num::matmul(hidden, dir.recurrent));
    Tensor state = num::lstm_cell(gates, cell);
    hidden = num::slice_cols(state, 0, h);
    cell = num::slice_cols(state, h, h);
    outputs[t] = hidden;
  }
  return num::concat_rows(outputs);
}

Tensor BiLstmEncoder::encode(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout) const {
  if (token_ids.empty()) throw DataError("cannot encode an empty sentence");
  for (auto id : token_ids) {
    if (id >= options_.vocab_size) throw DataError("token id " + std::to_string(id) + " outside the vocabulary");
  }
  Tensor x = dropout(num::gather_rows(embedding_, token_ids));
  for (std::size_t l = 0; l < options_.layers; ++l) {
    if (l > 0) x = dropout(x);
    x = num::concat_cols({run_direction(forward_[l], x, false), run_direction(backward_[l], x, true)});
  }
  return x;
}

SpanRepresenter::SpanRepresenter(const SpanOptions& options, num::ParamStore& store, std::mt19937_64& rng)
    : options_(options) {
  if (options.max_span_len == 0) throw ConfigError("max_span_len must be >= 1");
  length_embedding_ = store.add("encoder.span.length",
                                num::normal_init({options.max_span_len, options.length_dim}, 0.0, 1.0, rng),
                                num::ParamGroup::other);
  projection_ = num::make_linear(store, "encoder.span.projection", 2 * options.dim + options.length_dim, options.dim,
                                 true, num::ParamGroup::other, rng);
}

Tensor SpanRepresenter::operator()(const Tensor& tokens, const std::vector<SpanBounds>& spans) const {
  if (spans.empty()) throw ConfigError("no spans to represent");
  std::vector<std::size_t> starts, ends, lengths;
  starts.reserve(spans.size());
  ends.reserve(spans.size());
  lengths.reserve(spans.size());
  for (const auto& s : spans) {
    if (s.start > s.end || s.end >= tokens.rows()) {
      throw ConfigError("span (" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                        ") out of range for " + std::to_string(tokens.rows()) + " tokens");
    }
    if (s.length() > options_.max_span_len) throw ConfigError("span longer than max_span_len");
    starts.push_back(s.start);
    ends.push_back(s.end);
    lengths.push_back(s.length() - 1);
  }
  Tensor joined = num::concat_cols({num::gather_rows(tokens, starts), num::gather_rows(tokens, ends),
                                    num::gather_rows(length_embedding_, lengths)});
  return projection_(joined);
}

EncoderOutput SentenceEncoder::operator()(const std::vector<std::size_t>& token_ids,
                                          const num::DropoutContext& dropout) const {
  EncoderOutput out;
  out.tokens = tokens_->encode(token_ids, dropout);
  out.bounds = enumerate_spans(token_ids.size(), spans_.max_span_len());
  out.spans = spans_(out.tokens, out.bounds);
  return out;
}

}  // namespace qidn::encoder
