#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "qidn/numerics/tensor.hpp"

namespace qidn::num {

// Optimizer parameter groups: the encoder stands in for the pre-trained part
// and gets its own peak learning rate.
enum class ParamGroup { encoder, other };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamGroup group;
};

// Owns every trainable tensor of a model under a dotted module path.
class ParamStore {
 public:
  Tensor add(std::string name, Tensor tensor, ParamGroup group);

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const NamedParam* find(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParam> params_;
};

Tensor normal_init(Shape shape, double mean, double stddev, std::mt19937_64& rng);
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// y = x W (+ b); W is [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the layer has no bias

  Tensor operator()(const Tensor& x) const;
};

Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                   bool with_bias, ParamGroup group, std::mt19937_64& rng);

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  Tensor operator()(const Tensor& x) const;
};

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, std::size_t width, ParamGroup group);

// Dropout settings for one forward pass. A zero rate or missing generator makes
// the forward deterministic.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool stochastic() const { return rate > 0.0 && rng != nullptr; }
  Tensor operator()(const Tensor& x) const;
};

}  // namespace qidn::num
