#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "qidn/numerics/tensor.hpp"

namespace qidn::num {

// Boolean visibility matrix for softmax rows: allowed(r, c) == false forces an
// exact zero weight at (r, c).
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = true)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool visible) { bits_[r * cols_ + c] = visible ? 1 : 0; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Index2 {
  std::size_t row;
  std::size_t col;
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor transpose(const Tensor& a);

// Elementwise (identical shapes unless noted).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);  // bias has a.cols() entries, broadcast over rows
Tensor scale(const Tensor& a, double factor);
Tensor add_n(std::span<const Tensor> terms);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation; smooth, so finite differences stay valid
// log(max(a, floor)); an entry that is exactly 0 is an underflow and throws.
Tensor log_clamped(const Tensor& a, double floor = 1e-12);

// Row-wise normalizations. Masked entries get weight 0 (softmax) or value 0
// with no gradient (log_softmax). A row with no visible entry throws.
Tensor softmax_rows(const Tensor& logits, const Mask* mask = nullptr);
Tensor log_softmax_rows(const Tensor& logits, const Mask* mask = nullptr);
Tensor normalize_rows(const Tensor& a);  // L2; zero rows throw
Tensor cosine_matrix(const Tensor& a, const Tensor& b);  // [m,d] x [n,d] -> [m,n]
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Structural.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
inline Tensor concat_cols(const std::vector<Tensor>& parts) { return concat_cols(std::span<const Tensor>(parts)); }
inline Tensor concat_rows(const std::vector<Tensor>& parts) { return concat_rows(std::span<const Tensor>(parts)); }
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
Tensor pick(const Tensor& a, std::span<const Index2> entries);  // -> [k]

// Reductions.
Tensor sum(const Tensor& a);  // -> scalar

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

// Fused LSTM cell. gates = [i f g o] pre-activations, shape [1, 4h];
// c_prev shape [1, h]. Returns [1, 2h] = [h_t, c_t].
Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev);

// Plain-vector helpers (no tape).
std::vector<double> softmax(std::span<const double> logits);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace qidn::num
