#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qidn/numerics/layers.hpp"

namespace qidn::num {

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
  double step = 0.0;             // absolute finite-difference step used
  std::size_t worst_index = 0;  // element with the largest relative error
  std::size_t refined = 0;      // elements re-estimated by extrapolation
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double loss = 0.0;

  double max_rel_error() const;
};

// central: (f(x+h) - f(x-h)) / 2h, error O(h^2).
// five_point: (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, error O(h^4),
// which tolerates a larger h and so less round-off.
enum class Stencil { central, five_point };

// Absolute step for one tensor: relative_step * max(rms(values), 0.01), so
// small-scale tensors are probed at their own scale.
double step_for(std::span<const double> values, double relative_step);

// Compares tape gradients of loss_fn against finite differences for every
// element of every parameter. loss_fn must be deterministic; it is called once
// under a tape and then without one for each stencil point.
// An element whose stencil estimate disagrees by more than refine_above
// (relative) is re-estimated with Ridders' extrapolation. No fixed step serves
// both near-zero gradients, where round-off dominates, and high-curvature
// directions, where truncation does. 0 disables refinement.
GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<NamedParam>& params, double relative_step = 5e-3,
                                        Stencil stencil = Stencil::five_point, double refine_above = 0.0);

}  // namespace qidn::num
