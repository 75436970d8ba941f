#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "imgan/neural/core.hpp"

namespace imgan::neural {

template <class S>
struct GradCheckResult {
  S max_rel_err = S(0);
  std::string worst_param;
};

// Central finite differences against already-populated analytic gradients.
// The caller runs forward+backward first (filling param.grad), then hands a
// forward-only loss functional here.  Any stochastic layer state (spectral
// norm power iteration) must be frozen so loss_fn is a pure function of the
// parameters.  Samples up to max_entries random entries per parameter.
template <class S, class F>
GradCheckResult<S> grad_check(F&& loss_fn, const std::vector<ParamRef<S>>& params,
                              S eps, int max_entries, Rng& rng) {
  GradCheckResult<S> res;
  for (const auto& pr : params) {
    Param<S>& p = *pr.p;
    const Eigen::Index n = p.numel();
    const int samples = static_cast<int>(std::min<Eigen::Index>(n, max_entries));
    for (int s = 0; s < samples; ++s) {
      const Eigen::Index idx =
          samples == static_cast<int>(n) ? s : static_cast<Eigen::Index>(rng.below(n));
      S* slot = p.value.data() + idx;
      const S saved = *slot;

      *slot = saved + eps;
      const S up = loss_fn();
      *slot = saved - eps;
      const S down = loss_fn();
      *slot = saved;

      const S fd = (up - down) / (S(2) * eps);
      const S an = p.grad.data()[idx];
      const S rel = std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), S(1));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = pr.name;
      }
    }
  }
  return res;
}

// Collect every parameter of a net exposing visit_params into a flat list.
template <class S, class Net>
std::vector<ParamRef<S>> collect_params(Net& net, const std::string& prefix) {
  std::vector<ParamRef<S>> out;
  net.visit_params(prefix, [&out](const std::string& name, Param<S>& p) {
    out.push_back({name, &p});
  });
  return out;
}

}  // namespace imgan::neural
