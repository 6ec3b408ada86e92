#pragma once

#include "latticectl/dynamics.hpp"
#include "latticectl/system.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace latticectl {

/// Affine subspace {x : <c_i, x> = offset_i} over flat (q, p) coordinates.
struct Plane {
  struct Constraint {
    TangentVector coeffs;
    double offset;
  };
  std::vector<Constraint> constraints;
  std::string label;

  Plane(std::vector<Constraint> cs, std::string name) : constraints(std::move(cs)), label(std::move(name)) {
    if (constraints.empty()) return;
    const auto dim = constraints.front().coeffs.size();
    Matrix m(static_cast<Eigen::Index>(constraints.size()), dim);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      if (constraints[i].coeffs.size() != dim) throw ContractError("plane constraints of mixed dimension");
      m.row(static_cast<Eigen::Index>(i)) = constraints[i].coeffs.transpose();
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s[s.size() - 1] <= 1e-12 * s[0]) throw ContractError("plane constraints are linearly dependent");
  }

  double residual(const State& x) const {
    const Vector flat = x.flat();
    double r = 0.0;
    for (const auto& c : constraints) r = std::max(r, std::abs(c.coeffs.dot(flat) - c.offset));
    return r;
  }

  /// Constraint picking coordinate j of q (0-based) minus coordinate i.
  static Constraint q_difference(int n, int j, int i, double offset) {
    TangentVector c = TangentVector::Zero(2 * n);
    c[j] += 1.0, c[i] -= 1.0;
    return {c, offset};
  }
  static Constraint p_difference(int n, int j, int i, double offset) {
    TangentVector c = TangentVector::Zero(2 * n);
    c[n + j] += 1.0, c[n + i] -= 1.0;
    return {c, offset};
  }
  /// Zero total momentum.
  static Plane zero_momentum(int n) {
    TangentVector c = TangentVector::Zero(2 * n);
    c.tail(n).setOnes();
    return Plane({{c, 0.0}}, "zero-momentum");
  }
};

/// Polynomial force profile F(t) = sum_k coeffs[k] t^k; the counterexamples
/// require F odd.
struct OddForce {
  std::vector<double> coeffs;

  double operator()(double t) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  void require_odd() const {
    for (std::size_t k = 0; k < coeffs.size(); k += 2)
      if (coeffs[k] != 0.0) throw ContractError("F must be odd: coefficient of t^" + std::to_string(k) + " is nonzero");
  }
  std::vector<double> odd_part() const {
    std::vector<double> c;
    for (std::size_t k = 1; k < coeffs.size(); k += 2) c.push_back(coeffs[k]);
    return c;
  }
};

struct Counterexample {
  LatticeSystem system;
  Plane plane;
};

/// Periodic trimer forced at particle 1 with phi(t) = F(t - b) + phi(b); the
/// plane p3 = p2, q3 - q2 = 2b is invariant whenever F(-3b) = 0.
inline Counterexample build_periodic_degenerate_trimer(const OddForce& force, double shift, double phi_shift = 0.0) {
  force.require_odd();
  if (std::abs(force(-3.0 * shift)) > 1e-10)
    throw ContractError("F(-3b) must vanish for the plane to be invariant, got " + std::to_string(force(-3.0 * shift)));
  LatticeSystem sys({3, Topology::periodic, {1}}, Potential::from_odd_force(force.odd_part(), shift, phi_shift));
  Plane plane({Plane::p_difference(3, 2, 1, 0.0), Plane::q_difference(3, 2, 1, 2.0 * shift)}, "Pi_b");
  return {std::move(sys), std::move(plane)};
}

/// Open trimer forced at particle 2 with phi(t) = F(t - b); invariant plane
/// q3 - q1 = -2b, p3 = p1.
inline Counterexample build_nonperiodic_trimer(const OddForce& force, double shift) {
  force.require_odd();
  LatticeSystem sys({3, Topology::open, {2}}, Potential::from_odd_force(force.odd_part(), shift, 0.0));
  Plane plane({Plane::q_difference(3, 2, 0, -2.0 * shift), Plane::p_difference(3, 2, 0, 0.0)}, "Pi'_b");
  return {std::move(sys), std::move(plane)};
}

/// Signal stretched or cut to end exactly at `horizon` (zero control appended).
inline ControlSignal fit_horizon(const ControlSignal& u, double horizon) {
  ControlSignal out;
  for (const auto& site : u.sites) {
    std::vector<ControlSignal::Segment> segs;
    double t = 0.0;
    for (const auto& s : site) {
      if (t >= horizon) break;
      const double d = std::min(s.duration, horizon - t);
      if (d > 0.0) segs.push_back({d, s.value});
      t += d;
    }
    if (horizon - t > 1e-12) segs.push_back({horizon - t, 0.0});
    out.sites.push_back(std::move(segs));
  }
  return out;
}

/// Random piecewise-constant control with `pieces` segments on [0, horizon].
inline ControlSignal random_control(std::mt19937_64& rng, double horizon, int pieces, double amplitude,
                                    std::size_t site_count = 1) {
  std::uniform_real_distribution<double> val(-amplitude, amplitude), w(0.2, 1.0);
  ControlSignal s;
  for (std::size_t site = 0; site < site_count; ++site) {
    std::vector<double> ws(pieces);
    double total = 0.0;
    for (auto& x : ws) total += (x = w(rng));
    std::vector<ControlSignal::Segment> segs;
    for (double x : ws) segs.push_back({horizon * x / total, val(rng)});
    s.sites.push_back(std::move(segs));
  }
  return fit_horizon(s, horizon);
}

struct InvariantPlaneResult {
  double residual = 0.0;          // max over samples
  double error_estimate = 0.0;    // endpoint step-doubling estimate
  double threshold = 1e-7;
  bool invariant() const { return residual < threshold; }
};

/// Max plane residual along the controlled trajectory from x0 over [0, horizon].
inline InvariantPlaneResult invariant_plane_residual(const LatticeSystem& sys, const Plane& plane, const State& x0,
                                                     const ControlSignal& u, double horizon,
                                                     const IntegratorPolicy& pol = {}) {
  if (plane.residual(x0) >= 1e-12) throw ContractError("initial state is not on the plane");
  const ControlSignal signal = fit_horizon(u, horizon);
  auto run = [&](const IntegratorPolicy& p) { return controlled_flow(x0, signal, sys, p); };
  IntegratorPolicy fine = pol;
  fine.sample_every = 1;
  const Trajectory tr = run(fine);
  InvariantPlaneResult res;
  for (const auto& s : tr.states) res.residual = std::max(res.residual, plane.residual(s));
  IntegratorPolicy coarse = pol;
  coarse.step = 2.0 * pol.step;
  const double order = pol.method == Method::verlet ? 2.0 : 4.0;
  const State end_coarse = run(coarse).final();
  res.error_estimate = distance(end_coarse, tr.final()) / (std::pow(2.0, order) - 1.0);
  res.threshold = std::max(1e-7, 100.0 * res.error_estimate);
  return res;
}

}  // namespace latticectl
