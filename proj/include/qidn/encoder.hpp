#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <vector>

#include "qidn/numerics/layers.hpp"

namespace qidn::encoder {

using num::Tensor;

struct SpanBounds {
  std::size_t start;
  std::size_t end;  // inclusive

  std::size_t length() const { return end - start + 1; }
  bool operator==(const SpanBounds&) const = default;
};

// All (i, j) with i <= j < n and j - i + 1 <= max_span_len, lexicographic.
std::vector<SpanBounds> enumerate_spans(std::size_t n, std::size_t max_span_len);

struct EncoderOutput {
  Tensor tokens;  // H, [n, d]
  Tensor spans;   // H_span, [n_s, d]
  std::vector<SpanBounds> bounds;
};

// Produces contextual token vectors from vocabulary ids. The BiLSTM below is
// the default; a contextual encoder can be substituted behind this interface.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual Tensor encode(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout) const = 0;
  virtual std::size_t width() const = 0;
};

struct BiLstmOptions {
  std::size_t vocab_size = 0;
  std::size_t dim = 64;  // embedding width and output width (d/2 per direction)
  std::size_t layers = 3;
};

class BiLstmEncoder : public TokenEncoder {
 public:
  BiLstmEncoder(const BiLstmOptions& options, num::ParamStore& store, std::mt19937_64& rng);

  Tensor encode(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout) const override;
  std::size_t width() const override { return options_.dim; }

 private:
  struct Direction {
    num::Linear input;  // [in, 4h] with bias
    Tensor recurrent;   // [h, 4h]
  };

  Tensor run_direction(const Direction& dir, const Tensor& inputs, bool reverse) const;

  BiLstmOptions options_;
  Tensor embedding_;
  std::vector<Direction> forward_;
  std::vector<Direction> backward_;
};

struct SpanOptions {
  std::size_t dim = 64;
  std::size_t max_span_len = 8;
  std::size_t length_dim = 16;
};

// [H_start; H_end; phi(length)] projected back to width d.
class SpanRepresenter {
 public:
  SpanRepresenter(const SpanOptions& options, num::ParamStore& store, std::mt19937_64& rng);

  Tensor operator()(const Tensor& tokens, const std::vector<SpanBounds>& spans) const;
  std::size_t max_span_len() const { return options_.max_span_len; }
  const Tensor& length_embedding() const { return length_embedding_; }

 private:
  SpanOptions options_;
  Tensor length_embedding_;  // [max_span_len, length_dim]
  num::Linear projection_;   // [2d + length_dim, d]
};

class SentenceEncoder {
 public:
  SentenceEncoder(std::unique_ptr<TokenEncoder> tokens, SpanRepresenter spans)
      : tokens_(std::move(tokens)), spans_(std::move(spans)) {}

  EncoderOutput operator()(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout) const;
  const TokenEncoder& token_encoder() const { return *tokens_; }
  const SpanRepresenter& span_representer() const { return spans_; }

 private:
  std::unique_ptr<TokenEncoder> tokens_;
  SpanRepresenter spans_;
};

}  // namespace qidn::encoder
