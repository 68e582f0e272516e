#include "qidn/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qidn/error.hpp"

namespace qidn::num {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

double step_for(std::span<const double> values, double relative_step) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  const double rms = values.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(values.size()));
  return relative_step * std::max(rms, 1e-2);
}

namespace {

struct Estimate {
  double value = 0.0;
  double error = 0.0;  // internal bound from the tableau
};

// Ridders' extrapolation of central differences from a deliberately large
// initial step: round-off stays at the level of that step while the tableau
// cancels truncation error. Returns the estimate with the smallest internal
// error bound.
Estimate ridders(const std::function<double(double)>& at, double initial_step) {
  constexpr int kTable = 10;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink, kSafe = 2.0;
  double a[kTable][kTable];
  double hh = initial_step;
  a[0][0] = (at(hh) - at(-hh)) / (2.0 * hh);
  double best = a[0][0];
  double err = std::numeric_limits<double>::infinity();
  for (int i = 1; i < kTable; ++i) {
    hh /= kShrink;
    a[0][i] = (at(hh) - at(-hh)) / (2.0 * hh);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= kSafe * err) break;
  }
  return {best, err};
}

}  // namespace

GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<NamedParam>& params, double relative_step,
                                        Stencil stencil, double refine_above) {
  GradCheckReport report;
  for (auto& p : params) p.tensor.zero_grad();
  {
    Tape tape;
    Tape::Scope scope(&tape);
    Tensor loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NumericError("grad check: non-finite loss");
    report.loss = loss.item();
    tape.backward(loss);
  }

  NoGrad no_grad;
  auto evaluate = [&] {
    const double v = loss_fn().item();
    if (!std::isfinite(v)) throw NumericError("grad check: non-finite loss under perturbation");
    return v;
  };
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    entry.elements = p.tensor.numel();
    const std::vector<double> analytic = p.tensor.grad();
    auto values = p.tensor.mutable_values();
    const double h = step_for(values, relative_step);
    entry.step = h;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      auto at = [&](double offset) {
        values[i] = original + offset;
        return evaluate();
      };
      double numeric = 0.0;
      if (stencil == Stencil::central) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        // Differences of nearby values first: they are exact, weighted sums are not.
        const double near = at(h) - at(-h);
        const double far = at(2.0 * h) - at(-2.0 * h);
        numeric = (8.0 * near - far) / (12.0 * h);
      }
      auto rel_error = [&](double estimate) {
        return std::abs(analytic[i] - estimate) / std::max({std::abs(analytic[i]), std::abs(estimate), 1e-8});
      };
      if (refine_above > 0.0 && rel_error(numeric) > refine_above) {
        // The refined estimate replaces the stencil one unconditionally; the
        // analytic value never takes part in choosing it.
        // A large start suits directions with gentle curvature and tiny
        // gradients; a small one suits sharp curvature. The tableau's own
        // error bound decides.
        const Estimate small = ridders(at, 2.0 * h);
        const Estimate large = ridders(at, 16.0 * h);
        numeric = large.error < small.error ? large.value : small.value;
        ++entry.refined;
      }
      values[i] = original;
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      if (i == 0 || abs_err / denom > entry.max_rel_error) {
        entry.max_rel_error = abs_err / denom;
        entry.worst_index = i;
        entry.worst_analytic = analytic[i];
        entry.worst_numeric = numeric;
      }
    }
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace qidn::num
