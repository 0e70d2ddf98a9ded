#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace twoport {

struct NelderMeadOptions {
  double initial_step = 0.02;
  double diameter_tol = 1e-9;  ///< stop when every vertex is this close to the best one
  int max_iterations = 10000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Minimizes `f` with the standard reflection / expansion / contraction /
/// shrink simplex moves (coefficients 1, 2, 1/2, 1/2). `f` may return +inf to
/// reject a point; such vertices are never accepted over finite ones.
template <typename Fn>
NelderMeadResult nelder_mead(Fn&& f, const Eigen::VectorXd& start,
                             const NelderMeadOptions& opt = {}) {
  using Vec = Eigen::VectorXd;
  const int dim = static_cast<int>(start.size());
  const int verts = dim + 1;

  std::vector<Vec> x(verts, start);
  std::vector<double> fx(verts);
  for (int i = 0; i < dim; ++i) x[i + 1](i) += opt.initial_step;
  for (int i = 0; i < verts; ++i) fx[i] = f(x[i]);

  std::vector<int> idx(verts);
  NelderMeadResult res;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const int best = idx[0];
    const int worst = idx[dim];
    const int second = idx[std::max(dim - 1, 0)];

    double diameter = 0.0;
    for (int i = 0; i < verts; ++i) {
      diameter = std::max(diameter, (x[i] - x[best]).lpNorm<Eigen::Infinity>());
    }
    if (diameter < opt.diameter_tol) {
      res.converged = true;
      break;
    }

    Vec centroid = Vec::Zero(dim);
    for (int i = 0; i < verts; ++i) {
      if (i != worst) centroid += x[i];
    }
    centroid /= dim;

    const Vec xr = centroid + (centroid - x[worst]);
    const double fr = f(xr);
    if (fr < fx[best]) {
      const Vec xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[second]) {
      x[worst] = xr;
      fx[worst] = fr;
      continue;
    }

    // Contraction: outside if the reflected point beats the worst vertex.
    const bool outside = fr < fx[worst];
    const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid))
                           : Vec(centroid + 0.5 * (x[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : fx[worst])) {
      x[worst] = xc;
      fx[worst] = fc;
      continue;
    }

    for (int i = 0; i < verts; ++i) {
      if (i == best) continue;
      x[i] = x[best] + 0.5 * (x[i] - x[best]);
      fx[i] = f(x[i]);
    }
  }

  const int best = static_cast<int>(std::min_element(fx.begin(), fx.end()) - fx.begin());
  res.x = x[best];
  res.value = fx[best];
  res.iterations = iter;
  return res;
}

}  // namespace twoport
