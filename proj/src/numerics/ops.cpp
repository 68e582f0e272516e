#include "qidn/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>

#include "qidn/error.hpp"

namespace qidn::num {

namespace {

using NodePtr = std::shared_ptr<Node>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool tracking(std::span<const Tensor> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

Tensor finish(Shape shape, std::vector<double> values, bool track, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  return Tensor(std::move(shape), std::move(values), track);
}

void record(Tape::BackwardFn fn) { Tape::active()->record(std::move(fn)); }

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch [" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + "]");
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, const char* op, Forward f, Derivative df) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const bool track = tracking({&a});
  Tensor result = finish(a.shape(), std::move(out), track, op);
  if (track) {
    record([an = a.handle(), on = result.handle(), df] {
      if (on->grad.empty()) return;
      auto& ag = an->grad_buffer();
      for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += on->grad[i] * df(an->value[i], on->value[i]);
    });
  }
  return result;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ConfigError("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                      std::to_string(b.rows()) + ")");
  }
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ap[i * k + p];
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  const bool track = tracking({&a, &b});
  Tensor result = finish(matrix_shape(m, n), std::move(out), track, "matmul");
  if (track) {
    record([an = a.handle(), bn = b.handle(), on = result.handle(), m, k, n] {
      if (on->grad.empty()) return;
      const double* g = on->grad.data();
      if (an->requires_grad) {
        double* ag = an->grad_buffer().data();
        const double* bv = bn->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
            ag[i * k + p] += acc;
          }
        }
      }
      if (bn->requires_grad) {
        double* bg = bn->grad_buffer().data();
        const double* av = an->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            double* brow = bg + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += aip * g[i * n + j];
          }
        }
      }
    });
  }
  return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ConfigError("matmul_nt: inner dimensions differ (" + std::to_string(k) + " vs " +
                      std::to_string(b.cols()) + ")");
  }
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ap[i * k + p] * bp[j * k + p];
      out[i * n + j] = acc;
    }
  }
  const bool track = tracking({&a, &b});
  Tensor result = finish(matrix_shape(m, n), std::move(out), track, "matmul_nt");
  if (track) {
    record([an = a.handle(), bn = b.handle(), on = result.handle(), m, k, n] {
      if (on->grad.empty()) return;
      const double* g = on->grad.data();
      if (an->requires_grad) {
        double* ag = an->grad_buffer().data();
        const double* bv = bn->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            for (std::size_t p = 0; p < k; ++p) ag[i * k + p] += gij * bv[j * k + p];
          }
        }
      }
      if (bn->requires_grad) {
        double* bg = bn->grad_buffer().data();
        const double* av = an->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            for (std::size_t p = 0; p < k; ++p) bg[j * k + p] += gij * av[i * k + p];
          }
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  const auto& av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const bool track = tracking({&a});
  Tensor result = finish(matrix_shape(n, m), std::move(out), track, "transpose");
  if (track) {
    record([an = a.handle(), on = result.handle(), m, n] {
      if (on->grad.empty()) return;
      auto& ag = an->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ag[i * n + j] += on->grad[j * m + i];
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const bool track = tracking({&a, &b});
  Tensor result = finish(a.shape(), std::move(out), track, "add");
  if (track) {
    record([an = a.handle(), bn = b.handle(), on = result.handle()] {
      if (on->grad.empty()) return;
      for (const NodePtr& in : {an, bn}) {
        if (!in->requires_grad) continue;
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const bool track = tracking({&a, &b});
  Tensor result = finish(a.shape(), std::move(out), track, "sub");
  if (track) {
    record([an = a.handle(), bn = b.handle(), on = result.handle()] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= on->grad[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const bool track = tracking({&a, &b});
  Tensor result = finish(a.shape(), std::move(out), track, "mul");
  if (track) {
    record([an = a.handle(), bn = b.handle(), on = result.handle()] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * an->value[i];
      }
    });
  }
  return result;
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.numel() != n) throw ConfigError("add_bias: bias length does not match column count");
  const auto& av = a.values();
  const auto& bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  const bool track = tracking({&a, &bias});
  Tensor result = finish(a.shape(), std::move(out), track, "add_bias");
  if (track) {
    record([an = a.handle(), bn = bias.handle(), on = result.handle(), m, n] {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[j] += on->grad[i * n + j];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw ConfigError("add_n: no terms");
  for (const auto& t : terms) require_same_shape(terms[0], t, "add_n");
  std::vector<double> out(terms[0].numel(), 0.0);
  for (const auto& t : terms) {
    const auto& tv = t.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tv[i];
  }
  const bool track = tracking(terms);
  Tensor result = finish(terms[0].shape(), std::move(out), track, "add_n");
  if (track) {
    std::vector<NodePtr> inputs;
    inputs.reserve(terms.size());
    for (const auto& t : terms) inputs.push_back(t.handle());
    record([inputs = std::move(inputs), on = result.handle()] {
      if (on->grad.empty()) return;
      for (const auto& in : inputs) {
        if (!in->requires_grad) continue;
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
    });
  }
  return result;
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(kC * (x + kA * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
      });
}

Tensor log_clamped(const Tensor& a, double floor) {
  for (double v : a.values()) {
    if (v == 0.0) throw NumericError("log of a probability that underflowed to exactly 0");
    if (v < 0.0) throw NumericError("log of a negative value");
  }
  return unary(
      a, "log_clamped", [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

namespace {

void check_mask(const Tensor& logits, const Mask* mask) {
  if (mask != nullptr && (mask->rows() != logits.rows() || mask->cols() != logits.cols())) {
    throw ConfigError("softmax mask shape does not match logits");
  }
  if (logits.cols() == 0) throw NumericError("softmax over an empty row");
}

// Fills probs with the masked softmax of logits; returns per-row log-normalizers.
std::vector<double> masked_softmax(const Tensor& logits, const Mask* mask, std::vector<double>& probs) {
  const std::size_t m = logits.rows(), n = logits.cols();
  const auto& lv = logits.values();
  probs.assign(m * n, 0.0);
  std::vector<double> log_norm(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = lv[i * n + j];
      if (!std::isfinite(v)) throw NumericError("softmax input is not finite");
      if (mask != nullptr && !mask->allowed(i, j)) continue;
      any = true;
      mx = std::max(mx, v);
    }
    if (!any) throw NumericError("softmax row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask != nullptr && !mask->allowed(i, j)) continue;
      const double e = std::exp(lv[i * n + j] - mx);
      probs[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    log_norm[i] = mx + std::log(z);
  }
  return log_norm;
}

}  // namespace

Tensor softmax_rows(const Tensor& logits, const Mask* mask) {
  check_mask(logits, mask);
  std::vector<double> probs;
  masked_softmax(logits, mask, probs);
  const std::size_t m = logits.rows(), n = logits.cols();
  const bool track = tracking({&logits});
  Tensor result = finish(logits.shape(), std::move(probs), track, "softmax_rows");
  if (track) {
    record([ln = logits.handle(), on = result.handle(), m, n] {
      if (on->grad.empty()) return;
      auto& lg = ln->grad_buffer();
      const auto& p = on->value;
      const auto& g = on->grad;
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += p[i * n + j] * g[i * n + j];
        for (std::size_t j = 0; j < n; ++j) lg[i * n + j] += p[i * n + j] * (g[i * n + j] - dot);
      }
    });
  }
  return result;
}

Tensor log_softmax_rows(const Tensor& logits, const Mask* mask) {
  check_mask(logits, mask);
  std::vector<double> probs;
  const auto log_norm = masked_softmax(logits, mask, probs);
  const std::size_t m = logits.rows(), n = logits.cols();
  const auto& lv = logits.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (mask != nullptr && !mask->allowed(i, j)) continue;
      out[i * n + j] = lv[i * n + j] - log_norm[i];
    }
  }
  const bool track = tracking({&logits});
  Tensor result = finish(logits.shape(), std::move(out), track, "log_softmax_rows");
  if (track) {
    Mask visible = mask != nullptr ? *mask : Mask(m, n, true);
    record([ln = logits.handle(), on = result.handle(), probs = std::move(probs),
            visible = std::move(visible), m, n] {
      if (on->grad.empty()) return;
      auto& lg = ln->grad_buffer();
      const auto& g = on->grad;
      for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (visible.allowed(i, j)) total += g[i * n + j];
        for (std::size_t j = 0; j < n; ++j) {
          if (!visible.allowed(i, j)) continue;
          lg[i * n + j] += g[i * n + j] - probs[i * n + j] * total;
        }
      }
    });
  }
  return result;
}

Tensor normalize_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  const auto& av = a.values();
  std::vector<double> out(m * n);
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += av[i * n + j] * av[i * n + j];
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) throw NumericError("cosine similarity on a zero-norm vector (row " + std::to_string(i) + ")");
    norms[i] = norm;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] / norm;
  }
  const bool track = tracking({&a});
  Tensor result = finish(a.shape(), std::move(out), track, "normalize_rows");
  if (track) {
    record([an = a.handle(), on = result.handle(), norms = std::move(norms), m, n] {
      if (on->grad.empty()) return;
      auto& ag = an->grad_buffer();
      const auto& y = on->value;
      const auto& g = on->grad;
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
        for (std::size_t j = 0; j < n; ++j) ag[i * n + j] += (g[i * n + j] - y[i * n + j] * dot) / norms[i];
      }
    });
  }
  return result;
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) { return matmul_nt(normalize_rows(a), normalize_rows(b)); }

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.numel() != n || bias.numel() != n) throw ConfigError("layer_norm: gain/bias width mismatch");
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  std::vector<double> xhat(m * n), out(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xv[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mean) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  const bool track = tracking({&x, &gain, &bias});
  Tensor result = finish(x.shape(), std::move(out), track, "layer_norm_rows");
  if (track) {
    record([xn = x.handle(), gn = gain.handle(), bn = bias.handle(), on = result.handle(),
            xhat = std::move(xhat), inv_std = std::move(inv_std), m, n] {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      const auto& gv = gn->value;
      if (gn->requires_grad) {
        auto& gg = gn->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
      }
      if (bn->requires_grad) {
        auto& bg = bn->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bg[j] += g[i * n + j];
      }
      if (xn->requires_grad) {
        auto& xg = xn->grad_buffer();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g[i * n + j] * gv[j];
            mean_d += d;
            mean_dx += d * xhat[i * n + j];
          }
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g[i * n + j] * gv[j];
            xg[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
          }
        }
      }
    });
  }
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ConfigError("concat_cols: row counts differ");
    offsets.push_back(n);
    n += p.cols();
  }
  std::vector<double> out(m * n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].values();
    const std::size_t w = parts[k].cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pv.data() + i * w, w, out.data() + i * n + offsets[k]);
  }
  const bool track = tracking(parts);
  Tensor result = finish(matrix_shape(m, n), std::move(out), track, "concat_cols");
  if (track) {
    std::vector<NodePtr> inputs;
    for (const auto& p : parts) inputs.push_back(p.handle());
    record([inputs = std::move(inputs), offsets = std::move(offsets), on = result.handle(), m, n] {
      if (on->grad.empty()) return;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!inputs[k]->requires_grad) continue;
        auto& g = inputs[k]->grad_buffer();
        const std::size_t w = g.size() / m;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += on->grad[i * n + offsets[k] + j];
      }
    });
  }
  return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ConfigError("concat_rows: column counts differ");
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  const bool track = tracking(parts);
  Tensor result = finish(matrix_shape(m, n), std::move(out), track, "concat_rows");
  if (track) {
    std::vector<NodePtr> inputs;
    for (const auto& p : parts) inputs.push_back(p.handle());
    record([inputs = std::move(inputs), on = result.handle()] {
      if (on->grad.empty()) return;
      std::size_t offset = 0;
      for (const auto& in : inputs) {
        const std::size_t len = in->value.size();
        if (in->requires_grad) {
          auto& g = in->grad_buffer();
          for (std::size_t i = 0; i < len; ++i) g[i] += on->grad[offset + i];
        }
        offset += len;
      }
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t n = a.cols();
  if (begin + count > a.rows()) throw ConfigError("slice_rows: range out of bounds");
  std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          a.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  const bool track = tracking({&a});
  Tensor result = finish(matrix_shape(count, n), std::move(out), track, "slice_rows");
  if (track) {
    record([an = a.handle(), on = result.handle(), offset = begin * n] {
      if (on->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < on->grad.size(); ++i) g[offset + i] += on->grad[i];
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin + count > n) throw ConfigError("slice_cols: range out of bounds");
  const auto& av = a.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(av.data() + i * n + begin, count, out.data() + i * count);
  const bool track = tracking({&a});
  Tensor result = finish(matrix_shape(m, count), std::move(out), track, "slice_cols");
  if (track) {
    record([an = a.handle(), on = result.handle(), m, n, begin, count] {
      if (on->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) g[i * n + begin + j] += on->grad[i * count + j];
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  const std::size_t n = a.cols();
  const auto& av = a.values();
  std::vector<double> out(indices.size() * n);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= a.rows()) throw ConfigError("gather_rows: index out of range");
    std::copy_n(av.data() + indices[r] * n, n, out.data() + r * n);
  }
  const bool track = tracking({&a});
  Tensor result = finish(matrix_shape(indices.size(), n), std::move(out), track, "gather_rows");
  if (track) {
    record([an = a.handle(), on = result.handle(), idx = std::vector<std::size_t>(indices.begin(), indices.end()), n] {
      if (on->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += on->grad[r * n + j];
    });
  }
  return result;
}

Tensor pick(const Tensor& a, std::span<const Index2> entries) {
  const std::size_t n = a.cols();
  std::vector<double> out(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].row >= a.rows() || entries[k].col >= n) throw ConfigError("pick: entry out of range");
    out[k] = a.values()[entries[k].row * n + entries[k].col];
  }
  const bool track = tracking({&a});
  Tensor result = finish({entries.size()}, std::move(out), track, "pick");
  if (track) {
    record([an = a.handle(), on = result.handle(), idx = std::vector<Index2>(entries.begin(), entries.end()), n] {
      if (on->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k].row * n + idx[k].col] += on->grad[k];
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const bool track = tracking({&a});
  Tensor result = finish({}, {total}, track, "sum");
  if (track) {
    record([an = a.handle(), on = result.handle()] {
      if (on->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (auto& x : g) x += on->grad[0];
    });
  }
  return result;
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> factors(a.numel());
  for (auto& f : factors) f = keep(rng) ? inv : 0.0;
  return mul(a, Tensor(a.shape(), std::move(factors)));
}

Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev) {
  const std::size_t h = c_prev.cols();
  if (gates.rows() != 1 || c_prev.rows() != 1 || gates.cols() != 4 * h) {
    throw ConfigError("lstm_cell: expected gates [1,4h] and c_prev [1,h]");
  }
  const auto& gv = gates.values();
  const auto& cv = c_prev.values();
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> out(2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i = sig(gv[k]);
    const double f = sig(gv[h + k]);
    const double u = std::tanh(gv[2 * h + k]);
    const double o = sig(gv[3 * h + k]);
    const double c = f * cv[k] + i * u;
    out[k] = o * std::tanh(c);
    out[h + k] = c;
  }
  const bool track = tracking({&gates, &c_prev});
  Tensor result = finish(matrix_shape(1, 2 * h), std::move(out), track, "lstm_cell");
  if (track) {
    record([gn = gates.handle(), cn = c_prev.handle(), on = result.handle(), h, sig] {
      if (on->grad.empty()) return;
      const auto& gv = gn->value;
      const auto& cv = cn->value;
      const auto& og = on->grad;
      std::vector<double>* gg = gn->requires_grad ? &gn->grad_buffer() : nullptr;
      std::vector<double>* cg = cn->requires_grad ? &cn->grad_buffer() : nullptr;
      for (std::size_t k = 0; k < h; ++k) {
        const double i = sig(gv[k]);
        const double f = sig(gv[h + k]);
        const double u = std::tanh(gv[2 * h + k]);
        const double o = sig(gv[3 * h + k]);
        const double c = on->value[h + k];
        const double tc = std::tanh(c);
        const double dh = og[k];
        const double dc = og[h + k] + dh * o * (1.0 - tc * tc);
        if (gg != nullptr) {
          (*gg)[k] += dc * u * i * (1.0 - i);
          (*gg)[h + k] += dc * cv[k] * f * (1.0 - f);
          (*gg)[2 * h + k] += dc * i * (1.0 - u * u);
          (*gg)[3 * h + k] += dh * tc * o * (1.0 - o);
        }
        if (cg != nullptr) (*cg)[k] += dc * f;
      }
    });
  }
  return result;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("softmax of an empty vector");
  std::vector<double> copy(logits.begin(), logits.end());
  Tensor t = Tensor::vector(std::move(copy));
  NoGrad no_grad;
  Tensor p = softmax_rows(t);
  return std::vector<double>(p.values().begin(), p.values().end());
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ConfigError("cosine_similarity: length mismatch");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (!(uu > 0.0) || !(vv > 0.0)) throw NumericError("cosine similarity on a zero-norm vector");
  const double s = (uv / std::sqrt(uu)) / std::sqrt(vv);
  return std::clamp(s, -1.0, 1.0);
}

}  // namespace qidn::num
