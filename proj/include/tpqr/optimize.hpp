#pragma once

#include <functional>
#include <vector>

// Small derivative-free numerics used by the parameter solvers and the
// coupler-schedule tuner. Robustness and reproducibility are preferred over
// iteration counts: every routine is deterministic.
namespace tpqr {

// Bisection on [lo, hi]; requires f(lo) and f(hi) of opposite sign.
// Returns the midpoint once the bracket is below tol.
double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double tol = 1e-12, int max_iter = 200);

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  bool hit_bounds = false;  // best point pinned to a box face
};

// Minimizes f over a box. x0 must lie inside [lower, upper]; step sets the
// initial simplex scale per coordinate. Points outside the box are clamped
// to its faces, so the result may sit on a bound (reported via hit_bounds).
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, std::vector<double> step,
                             std::vector<double> lower, std::vector<double> upper,
                             double tol = 1e-10, int max_eval = 2000);

}  // namespace tpqr
