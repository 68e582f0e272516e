#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace qidn::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

// Storage shared between a Tensor handle and the tape closures that refer to it.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

// Dense row-major array of doubles. Copies share storage; use clone() for a
// deep copy. Every op treats a tensor as a matrix: a 1-D shape [n] is one row
// of n columns, and a 0-D shape is a single scalar.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Writable view for leaves (parameters, inputs). Mutating a tensor that an
  // in-flight tape already consumed corrupts its backward pass.
  std::span<double> mutable_values() { return node_->value; }
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  // Accumulated gradient; zeros when nothing flowed into this tensor.
  std::vector<double> grad() const;
  std::span<double> grad_buffer() { return node_->grad_buffer(); }
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<Node>& handle() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Records backward closures for one forward pass. Ops record onto the tape that
// is active on the calling thread; with no active tape they only compute values.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  void record(BackwardFn fn);
  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. The record is
  // released afterwards; a second call throws.
  void backward(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

  static Tape* active();

  // RAII activation on the current thread. Nested scopes restore the previous tape.
  class Scope {
   public:
    explicit Scope(Tape* tape);
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    ~Scope();

   private:
    Tape* previous_;
  };

 private:
  std::vector<BackwardFn> ops_;
  bool consumed_ = false;
};

// Disables recording for the current thread until destroyed.
class NoGrad {
 public:
  NoGrad() : scope_(nullptr) {}

 private:
  Tape::Scope scope_;
};

}  // namespace qidn::num
