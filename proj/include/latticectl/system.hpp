#pragma once

#include "latticectl/potential.hpp"
#include "latticectl/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace latticectl {

/// Configuration plus pair potential; defines the drift f and control fields g.
class LatticeSystem {
 public:
  LatticeSystem(LatticeConfig config, Potential potential)
      : config_(std::move(config)), potential_(std::move(potential)) {
    config_.validate();
  }

  const LatticeConfig& config() const { return config_; }
  const Potential& potential() const { return potential_; }
  int n() const { return config_.n; }
  int dim() const { return 2 * config_.n; }
  Topology topology() const { return config_.topology; }
  bool periodic() const { return config_.topology == Topology::periodic; }
  const std::vector<int>& control_sites() const { return config_.control_sites; }

  LatticeSystem with_topology(Topology t) const {
    auto c = config_;
    c.topology = t;
    return LatticeSystem(c, potential_);
  }
  LatticeSystem with_sites(std::vector<int> sites) const {
    auto c = config_;
    c.control_sites = std::move(sites);
    return LatticeSystem(c, potential_);
  }

  void check(const State& x) const {
    if (x.n() != config_.n)
      throw ContractError("state has " + std::to_string(x.n()) + " particles, system has " +
                          std::to_string(config_.n));
  }

  /// Momentum rates -dH/dq_k for any scalar type.
  template <class T>
  void forces(std::span<const T> q, std::span<T> out) const {
    const int n = config_.n;
    const int m = config_.bonds();
    std::vector<T> bond(m);
    for (int j = 0; j < m; ++j) bond[j] = potential_.force(T(q[j] - q[(j + 1) % n]));
    for (int k = 0; k < n; ++k) {
      T left = (k > 0) ? bond[k - 1] : (periodic() ? bond[n - 1] : T(0.0));
      T right = (k < m) ? bond[k] : T(0.0);
      out[k] = left - right;
    }
  }

  Vector forces(const Vector& q) const {
    Vector out(config_.n);
    forces<double>(std::span<const double>(q.data(), q.size()), std::span<double>(out.data(), out.size()));
    return out;
  }

  /// Drift f on the flat coordinates (q, p).
  template <class T>
  std::vector<T> drift(std::span<const T> x) const {
    const int n = config_.n;
    std::vector<T> out(2 * n);
    for (int k = 0; k < n; ++k) out[k] = x[n + k];
    forces<T>(x.subspan(0, n), std::span<T>(out).subspan(n, n));
    return out;
  }

 private:
  LatticeConfig config_;
  Potential potential_;
};

/// H = |p|^2/2 + sum over bonds of Phi(q_j - q_{j+1}).
inline double hamiltonian(const State& x, const LatticeSystem& sys) {
  sys.check(x);
  const int n = sys.n();
  double v = 0.0;
  for (int j = 0; j < sys.config().bonds(); ++j) v += sys.potential().value(x.q[j] - x.q[(j + 1) % n]);
  return 0.5 * x.p.squaredNorm() + v;
}

inline TangentVector drift(const State& x, const LatticeSystem& sys) {
  sys.check(x);
  TangentVector v(sys.dim());
  v << x.p, sys.forces(x.q);
  return v;
}

/// Constant field d/dp_site (1-based site).
inline TangentVector control_field(int site, const LatticeSystem& sys) {
  if (!sys.config().has_site(site))
    throw ContractError("site " + std::to_string(site) + " is not a control site");
  TangentVector g = TangentVector::Zero(sys.dim());
  g[sys.n() + site - 1] = 1.0;
  return g;
}

/// f(x) + sum_i g_{site_i} u_i.
inline TangentVector controlled_rhs(const State& x, const LatticeSystem& sys, std::span<const double> u) {
  if (u.size() != sys.control_sites().size()) throw ContractError("one control value per site expected");
  TangentVector v = drift(x, sys);
  for (std::size_t i = 0; i < u.size(); ++i) v[sys.n() + sys.control_sites()[i] - 1] += u[i];
  return v;
}

struct DecoupledControls {
  double u;  // site 1
  double v;  // site n
};

/// Feedback that turns the periodic system forced at {1, n} into the open chain
/// forced at the same sites: the wrap-around bond force moves into the controls.
inline DecoupledControls feedback_decouple(const LatticeSystem& sys, double u, double v, const State& x) {
  sys.check(x);
  const int n = sys.n();
  if (!sys.periodic()) throw ContractError("feedback_decouple expects a periodic system");
  const auto& s = sys.control_sites();
  const bool ok = s.size() == 2 && sys.config().has_site(1) && sys.config().has_site(n);
  if (!ok) throw ContractError("feedback_decouple needs control sites {1, n}");
  const double wrap = sys.potential().phi(x.q[n - 1] - x.q[0]);
  return {u + wrap, v - wrap};
}

}  // namespace latticectl
