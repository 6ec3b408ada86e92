#pragma once

#include "latticectl/dynamics.hpp"
#include "latticectl/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace latticectl {

/// Bounds on the energy sublevel set {H <= c} intersected with Sum p = 0, Sum q = Q.
struct EnergyBox {
  double c = 0.0;
  int n = 0;
  double lower_bound = 0.0;  // B
  double bond_bound = 0.0;   // b
  double momentum_sq_bound = 0.0;
  bool empty = false;

  double momentum_bound() const { return std::sqrt(momentum_sq_bound); }
  double lower(double Q) const { return Q / n - bond_bound * (n + 1) / 2.0; }
  double upper(double Q) const { return Q / n + bond_bound * (n - 1) / 2.0; }
  double width() const { return bond_bound * n; }

  bool contains(const State& x, double Q, double slack = 1e-12) const {
    if (empty) return false;
    for (int j = 0; j < n; ++j)
      if (x.q[j] < lower(Q) - slack || x.q[j] > upper(Q) + slack) return false;
    return x.p.squaredNorm() <= momentum_sq_bound * (1.0 + slack) + slack;
  }
};

/// b = sup{y : Phi(y) <= c + (n-1)B} and the coordinate box built from it.
/// The momentum ball uses |p|^2 <= 2(c + nB), which is what H <= c implies.
inline EnergyBox lebesgue_bound(const Potential& pot, double c, int n) {
  if (n < 2) throw ContractError("lebesgue_bound needs n >= 2");
  if (!pot.bounded_below()) throw ContractError("potential is not bounded below");
  if (!pot.grows()) throw ContractError("potential does not satisfy the growth condition");
  if (!std::isfinite(c)) throw ContractError("energy level must be finite");
  EnergyBox box;
  box.c = c;
  box.n = n;
  box.lower_bound = pot.lower_bound();
  const double B = box.lower_bound;
  if (c < n * pot.infimum()) {
    box.empty = true;
    return box;
  }
  const double target = c + (n - 1) * B;
  double hi = 1.0;
  for (int i = 0; i < 2000 && !(pot.value(hi) > target && pot.phi(hi) > 0.0); ++i) hi *= 2.0;
  if (!(pot.value(hi) > target)) throw NumericalError("no bracket for the bond bound");
  // walk down to the last point at or below the target, so the root found is the largest one
  double lo = hi, step = std::max(1.0, std::abs(hi)) / 1024.0;
  int walked = 0;
  while (!(pot.value(lo) <= target)) {
    hi = lo;
    lo -= step;
    if (++walked % 1024 == 0) step *= 2.0;
    if (walked > 1024 * 60) {
      box.empty = true;
      return box;
    }
  }
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pot.value(mid) <= target ? lo : hi) = mid;
  }
  box.bond_bound = lo;
  box.momentum_sq_bound = 2.0 * (c + n * B);
  if (box.bond_bound < 0.0) box.empty = true;
  return box;
}

struct CompactnessReport {
  EnergyBox box;
  double Q = 0.0;
  long requested = 0;
  long accepted = 0;
  long attempts = 0;
  long box_violations = 0;
  long momentum_violations = 0;
  bool starved = false;
  double acceptance_rate() const { return attempts ? double(accepted) / double(attempts) : 0.0; }
  long violations() const { return box_violations + momentum_violations; }
};

/// Rejection sampler over {H <= c} with Sum p = 0, Sum q = Q. Candidates come
/// from the box and momentum ball inflated by 1.5, so a wrong box shows up as
/// accepted samples outside it.
inline CompactnessReport verify_compactness(const Potential& pot, double c, double Q, int n, long samples,
                                            std::uint64_t seed, std::vector<State>* accepted_states = nullptr) {
  CompactnessReport rep;
  rep.box = lebesgue_bound(pot, c, n);
  rep.Q = Q;
  rep.requested = samples;
  if (rep.box.empty) throw ContractError("energy sublevel set is empty");
  const LatticeSystem sys({n, Topology::periodic, {1}}, pot);
  std::mt19937_64 rng(seed);
  const double center = 0.5 * (rep.box.lower(Q) + rep.box.upper(Q));
  const double half = 0.75 * rep.box.width();
  const double radius = 1.5 * rep.box.momentum_bound();
  std::uniform_real_distribution<double> uq(center - half, center + half), up(-radius, radius);
  const long max_attempts = std::max<long>(samples * 1000000L, 1000000L);
  State x = State::zero(n);
  while (rep.accepted < samples && rep.attempts < max_attempts) {
    if (rep.accepted == 0 && rep.attempts >= 1000000L) break;
    ++rep.attempts;
    for (int j = 0; j < n; ++j) x.q[j] = uq(rng);
    x.q.array() += Q / n - x.q.mean();
    do {
      for (int j = 0; j < n; ++j) x.p[j] = up(rng);
    } while (x.p.squaredNorm() > radius * radius);
    x.p.array() -= x.p.mean();
    if (hamiltonian(x, sys) > c) continue;
    ++rep.accepted;
    if (accepted_states) accepted_states->push_back(x);
    for (int j = 0; j < n; ++j)
      if (x.q[j] < rep.box.lower(Q) - 1e-12 || x.q[j] > rep.box.upper(Q) + 1e-12) {
        ++rep.box_violations;
        break;
      }
    if (x.p.squaredNorm() > rep.box.momentum_sq_bound * (1.0 + 1e-12)) ++rep.momentum_violations;
  }
  rep.starved = rep.accepted < samples && rep.acceptance_rate() < 1e-6;
  return rep;
}

struct ConservationReport {
  std::size_t samples = 0;
  double horizon = 0.0;
  double initial_energy = 0.0;
  double max_energy_drift = 0.0;           // max |H(t) - H(0)|, meaningful for free runs
  double max_relative_energy_drift = 0.0;  // divided by max(|H(0)|, 1e-300)
  double max_step_energy_change = 0.0;     // between consecutive uncontrolled samples
  double max_momentum_error = 0.0;         // max |P(t) - P(0) - integral of u|
  double momentum_change = 0.0;            // P(T) - P(0)
  double control_integral = 0.0;
};

/// Energy and momentum bookkeeping of a trajectory. Controls recorded at a
/// sample are taken to act until the next sample.
inline ConservationReport conservation_report(const Trajectory& traj, const LatticeSystem& sys) {
  if (traj.size() == 0) throw ContractError("conservation_report needs a nonempty trajectory");
  ConservationReport r;
  r.samples = traj.size();
  r.horizon = traj.times.back() - traj.times.front();
  r.initial_energy = hamiltonian(traj.states[0], sys);
  const double p0 = traj.states[0].total_momentum();
  double integral = 0.0, h_prev = r.initial_energy;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (k > 0) {
      const double dt = traj.times[k] - traj.times[k - 1];
      double usum = 0.0;
      for (double u : traj.controls[k - 1]) usum += u;
      integral += usum * dt;
    }
    const double h = hamiltonian(traj.states[k], sys);
    r.max_energy_drift = std::max(r.max_energy_drift, std::abs(h - r.initial_energy));
    if (k > 0) {
      bool free = true;
      for (double u : traj.controls[k - 1]) free = free && u == 0.0;
      if (free) r.max_step_energy_change = std::max(r.max_step_energy_change, std::abs(h - h_prev));
    }
    h_prev = h;
    r.max_momentum_error = std::max(r.max_momentum_error, std::abs(traj.states[k].total_momentum() - p0 - integral));
  }
  r.max_relative_energy_drift = r.max_energy_drift / std::max(std::abs(r.initial_energy), 1e-300);
  r.momentum_change = traj.final().total_momentum() - p0;
  r.control_integral = integral;
  return r;
}

}  // namespace latticectl
