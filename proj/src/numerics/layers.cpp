#include "qidn/numerics/layers.hpp"

#include <cmath>

#include "qidn/error.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::num {

Tensor ParamStore::add(std::string name, Tensor tensor, ParamGroup group) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  params_.push_back({std::move(name), tensor, group});
  return tensor;
}

const NamedParam* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor normal_init(Shape shape, double mean, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values));
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = dist(rng);
  return Tensor::matrix(fan_in, fan_out, std::move(values));
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_bias(y, bias) : y;
}

Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                   bool with_bias, ParamGroup group, std::mt19937_64& rng) {
  Linear layer;
  layer.weight = store.add(name + ".weight", xavier_uniform(in, out, rng), group);
  if (with_bias) layer.bias = store.add(name + ".bias", Tensor::zeros({out}), group);
  return layer;
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm_rows(x, gain, bias); }

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, std::size_t width, ParamGroup group) {
  LayerNorm ln;
  ln.gain = store.add(name + ".gain", Tensor::full({width}, 1.0), group);
  ln.bias = store.add(name + ".bias", Tensor::zeros({width}), group);
  return ln;
}

Tensor DropoutContext::operator()(const Tensor& x) const { return stochastic() ? dropout(x, rate, *rng) : x; }

}  // namespace qidn::num
