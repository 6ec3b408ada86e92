#pragma once

#include "latticectl/types.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace latticectl {

struct LeastSquaresResult {
  Vector x;
  double cost = 0.0;  // |r(x)|
  int evaluations = 0;
};

/// Box-constrained Levenberg-Marquardt with a forward-difference Jacobian.
/// Stops once |r| <= target or progress stalls.
inline LeastSquaresResult levenberg_marquardt(const std::function<Vector(const Vector&)>& residual, Vector x,
                                              const Vector& lower, const Vector& upper, int max_iterations,
                                              double target = 0.0) {
  LeastSquaresResult out;
  const auto dim = x.size();
  auto clamp = [&](Vector v) {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = std::clamp(v[i], lower[i], upper[i]);
    return v;
  };
  x = clamp(x);
  Vector r = residual(x);
  ++out.evaluations;
  double cost = r.norm();
  double lambda = 1e-3;
  int stalls = 0;
  for (int it = 0; it < max_iterations && cost > target; ++it) {
    Matrix jac(r.size(), dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      double h = 1e-6 * (1.0 + std::abs(x[i]));
      if (x[i] + h > upper[i]) h = -h;
      Vector xp = x;
      xp[i] += h;
      jac.col(i) = (residual(xp) - r) / h;
      ++out.evaluations;
    }
    const Matrix jtj = jac.transpose() * jac;
    const Vector jtr = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Matrix a = jtj;
      for (Eigen::Index i = 0; i < dim; ++i) a(i, i) += lambda * (jtj(i, i) + 1e-12);
      const Vector step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Vector trial = clamp(x + step);
      const Vector rt = residual(trial);
      ++out.evaluations;
      const double ct = rt.norm();
      if (ct < cost) {
        const double gain = (cost - ct) / cost;
        x = trial, r = rt, cost = ct;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        stalls = gain < 1e-4 ? stalls + 1 : 0;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved || stalls >= 3) break;
  }
  out.x = x;
  out.cost = cost;
  return out;
}

}  // namespace latticectl
