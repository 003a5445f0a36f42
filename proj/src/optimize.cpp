#include "tpqr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tpqr {

double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double tol, int max_iter) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw std::invalid_argument("bisect_root: no sign change on the bracket");
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, std::vector<double> step,
                             std::vector<double> lower, std::vector<double> upper,
                             double tol, int max_eval) {
  const size_t n = x0.size();
  if (step.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("nelder_mead: dimension mismatch");

  auto clamp = [&](std::vector<double> x) {
    for (size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
  };

  NelderMeadResult res;
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };

  std::vector<std::vector<double>> pts(n + 1, clamp(x0));
  std::vector<double> vals(n + 1);
  for (size_t i = 0; i < n; ++i) {
    pts[i + 1][i] += step[i];
    pts[i + 1] = clamp(pts[i + 1]);
  }
  for (size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  auto order = [&]() {
    std::vector<size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> v2;
    for (size_t i : idx) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };

  order();
  while (evals < max_eval) {
    if (std::abs(vals[n] - vals[0]) < tol) {
      res.converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (size_t j = 0; j < n; ++j) x[j] = centroid[j] + coef * (pts[n][j] - centroid[j]);
      return clamp(x);
    };

    const auto xr = blend(-1.0);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const auto xe = blend(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
    } else if (fr < vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
    } else {
      const auto xc = blend(fr < vals[n] ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, vals[n])) {
        pts[n] = xc;
        vals[n] = fc;
      } else {  // shrink toward the best vertex
        for (size_t i = 1; i <= n; ++i) {
          for (size_t j = 0; j < n; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
          pts[i] = clamp(pts[i]);
          vals[i] = eval(pts[i]);
        }
      }
    }
    order();
  }

  res.x = pts[0];
  res.value = vals[0];
  res.evaluations = evals;
  for (size_t i = 0; i < n; ++i)
    if (pts[0][i] <= lower[i] || pts[0][i] >= upper[i]) res.hit_bounds = true;
  return res;
}

}  // namespace tpqr
