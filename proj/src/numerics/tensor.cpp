#include "qidn/numerics/tensor.hpp"

#include <cmath>
#include <string>

#include "qidn/error.hpp"

namespace qidn::num {

namespace {
thread_local Tape* active_tape = nullptr;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape.size() > 2) throw ConfigError("tensors are limited to rank 2");
  if (shape_numel(shape) != values.size()) {
    throw ConfigError("tensor data length " + std::to_string(values.size()) +
                      " does not match shape numel " + std::to_string(shape_numel(shape)));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (numel() != 1) throw ConfigError("item() requires a single-element tensor");
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value, false); }

Tensor Tensor::clone() const { return Tensor(node_->shape, node_->value, node_->requires_grad); }

Tape::~Tape() {
  if (active_tape == this) active_tape = nullptr;
}

void Tape::record(BackwardFn fn) {
  if (consumed_) throw ConfigError("cannot record onto a tape that already ran backward");
  ops_.push_back(std::move(fn));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ConfigError("backward called twice on the same tape");
  if (!loss.defined() || loss.numel() != 1) throw ConfigError("backward requires a scalar loss");
  if (!std::isfinite(loss.item())) throw NumericError("backward on a non-finite loss");
  consumed_ = true;
  if (loss.requires_grad()) {
    loss.handle()->grad_buffer()[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }
  ops_.clear();
  ops_.shrink_to_fit();
}

Tape* Tape::active() { return active_tape; }

Tape::Scope::Scope(Tape* tape) : previous_(active_tape) { active_tape = tape; }

Tape::Scope::~Scope() { active_tape = previous_; }

}  // namespace qidn::num
