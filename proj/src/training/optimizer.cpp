#include <cmath>

#include "qidn/error.hpp"
#include "qidn/training.hpp"

namespace qidn::training {

double learning_rate(double peak, std::size_t step, std::size_t warmup, std::size_t total) {
  if (step >= total) return 0.0;
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

AdamW::AdamW(std::vector<num::NamedParam>& params, double weight_decay, double beta1, double beta2, double eps)
    : params_(params), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
    decay_.push_back(!ends_with(p.name, ".bias") && !ends_with(p.name, ".gain"));
  }
}

void AdamW::step(const std::function<double(num::ParamGroup)>& lr_for_group) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    const double lr = lr_for_group(p.group);
    const std::vector<double> grad = p.tensor.grad();
    auto w = p.tensor.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      if (decay_[k]) w[i] -= lr * weight_decay_ * w[i];
      w[i] -= lr * update;
    }
    for (double x : w) {
      if (!std::isfinite(x)) throw NumericError("optimizer produced a non-finite value in " + p.name);
    }
  }
}

double clip_grad_norm(std::vector<num::NamedParam>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.tensor.grad_buffer()) g *= factor;
    }
  }
  return norm;
}

}  // namespace qidn::training
