#pragma once

// Central finite-difference oracle for gradient checks. Independent of the
// backward pass: it only re-evaluates forward losses at perturbed parameters.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmbeam/core/params.hpp"
#include "mmbeam/core/rng.hpp"
#include "mmbeam/core/tape.hpp"

namespace mmbeam::testsupport {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  std::string worst;
};

// rel error with an absolute floor so near-zero pairs compare as equal
inline double rel_err(double a, double b) {
  double diff = std::abs(a - b);
  if (diff <= 1e-7) return 0.0;
  return diff / std::max({std::abs(a), std::abs(b), 1e-6});
}

template <typename Fwd>
double eval_scalar(const ParamStore<double>& ps, Fwd&& fwd) {
  Tape<double> t(&ps);
  int node = fwd(t);
  return t.scalar_value(node);
}

// Checks d(loss)/d(param) against central differences on a sample of
// coordinates of each named parameter.
template <typename Fwd>
GradCheckResult gradcheck_params(ParamStore<double>& ps, Fwd&& fwd,
                                 const std::vector<std::string>& names,
                                 int coords_per_param = 8, double h0 = 1e-5) {
  GradBuffer<double> gb(ps);
  {
    Tape<double> t(&ps);
    int node = fwd(t);
    t.backward_scalar(node, &gb);
  }
  GradCheckResult res;
  Rng rng(20240915);
  for (const std::string& name : names) {
    int pid = ps.id(name);
    Mat<double>& w = ps.value(pid);
    const int n = static_cast<int>(w.size());
    std::vector<int> coords;
    if (n <= coords_per_param) {
      for (int i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int k = 0; k < coords_per_param; ++k)
        coords.push_back(rng.uniform_int(n));
    }
    for (int idx : coords) {
      double orig = w.data()[idx];
      double h = h0 * std::max(1.0, std::abs(orig));
      w.data()[idx] = orig + h;
      double lp = eval_scalar(ps, fwd);
      w.data()[idx] = orig - h;
      double lm = eval_scalar(ps, fwd);
      w.data()[idx] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = gb.is_set(pid) ? gb.grad(pid).data()[idx] : 0.0;
      double re = rel_err(an, fd);
      if (re > res.max_rel_err) {
        res.max_rel_err = re;
        res.worst = name + "[" + std::to_string(idx) + "]";
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace mmbeam::testsupport
