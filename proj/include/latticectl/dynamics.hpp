#pragma once

#include "latticectl/system.hpp"
#include "latticectl/types.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace latticectl {

/// Piecewise-constant, right-continuous control on [0, T] for each control site.
struct ControlSignal {
  struct Segment {
    double duration;
    double value;
  };
  std::vector<std::vector<Segment>> sites;  // indexed like LatticeSystem::control_sites()

  static ControlSignal single(std::vector<Segment> segs) { return ControlSignal{{std::move(segs)}}; }
  static ControlSignal constant(double u, double duration, std::size_t site_count = 1) {
    ControlSignal s;
    s.sites.assign(site_count, {{duration, 0.0}});
    s.sites[0][0].value = u;
    return s;
  }

  double horizon(std::size_t site = 0) const {
    double t = 0.0;
    if (site < sites.size())
      for (const auto& s : sites[site]) t += s.duration;
    return t;
  }

  /// Integral of the control applied at `site`.
  double integral(std::size_t site = 0) const {
    double a = 0.0;
    for (const auto& s : sites.at(site)) a += s.duration * s.value;
    return a;
  }

  void validate(std::size_t site_count) const {
    if (sites.size() != site_count)
      throw ContractError("control signal has " + std::to_string(sites.size()) + " sites, system has " +
                          std::to_string(site_count));
    for (const auto& site : sites)
      for (const auto& s : site) {
        if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw ContractError("control durations must be > 0");
        if (!std::isfinite(s.value)) throw ContractError("control values must be finite");
      }
    for (std::size_t i = 1; i < sites.size(); ++i)
      if (std::abs(horizon(i) - horizon(0)) > 1e-12 * (1.0 + horizon(0)))
        throw ContractError("control sites have different horizons");
  }

  /// Common refinement of all sites: pieces on which every value is constant.
  struct Piece {
    double duration;
    std::vector<double> values;
  };
  std::vector<Piece> pieces() const {
    std::vector<Piece> out;
    if (sites.empty()) return out;
    std::vector<std::size_t> idx(sites.size(), 0);
    std::vector<double> left(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) left[i] = sites[i].empty() ? 0.0 : sites[i][0].duration;
    while (idx[0] < sites[0].size()) {
      double d = left[0];
      for (std::size_t i = 1; i < sites.size(); ++i)
        if (idx[i] < sites[i].size()) d = std::min(d, left[i]);
      Piece p{d, {}};
      for (std::size_t i = 0; i < sites.size(); ++i) p.values.push_back(idx[i] < sites[i].size() ? sites[i][idx[i]].value : 0.0);
      out.push_back(std::move(p));
      for (std::size_t i = 0; i < sites.size(); ++i) {
        if (idx[i] >= sites[i].size()) continue;
        left[i] -= d;
        if (left[i] <= 1e-14 * (1.0 + d)) {
          ++idx[i];
          left[i] = idx[i] < sites[i].size() ? sites[i][idx[i]].duration : 0.0;
        }
      }
    }
    return out;
  }
};

enum class Method { yoshida4, verlet, reference };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::yoshida4: return "yoshida4";
    case Method::verlet: return "verlet";
    case Method::reference: return "rkf78";
  }
  return "?";
}

struct IntegratorPolicy {
  Method method = Method::yoshida4;
  double step = 1e-3;
  int sample_every = 10;           // record every k-th step in trajectories
  double reference_rel_tol = 1e-10;
  double reference_abs_tol = 1e-12;
  std::optional<double> control_clamp;  // |u| bound; unbounded by default

  static IntegratorPolicy reference() {
    IntegratorPolicy p;
    p.method = Method::reference;
    return p;
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<std::vector<double>> controls;  // value(s) active from each sample on
  std::string method;
  double step = 0.0;

  const State& initial() const { return states.front(); }
  const State& final() const { return states.back(); }
  std::size_t size() const { return times.size(); }
  void push(double t, const State& x, std::vector<double> u) {
    times.push_back(t);
    states.push_back(x);
    controls.push_back(std::move(u));
  }
};

namespace detail {

inline void require_finite(const State& x) {
  if (!x.finite()) throw NumericalError("integration produced a non-finite state");
}

inline void add_controls(Vector& force, const LatticeSystem& sys, std::span<const double> u) {
  for (std::size_t i = 0; i < u.size(); ++i) force[sys.control_sites()[i] - 1] += u[i];
}

/// Kick-drift-kick with cached end force; `force` holds F(q) + u on entry and exit.
inline void verlet_substep(State& x, Vector& force, double h, const LatticeSystem& sys, std::span<const double> u) {
  x.p.noalias() += 0.5 * h * force;
  x.q.noalias() += h * x.p;
  force = sys.forces(x.q);
  add_controls(force, sys, u);
  x.p.noalias() += 0.5 * h * force;
}

inline constexpr double kYoshidaOuter = 1.3512071919596578;   // 1 / (2 - 2^(1/3))
inline constexpr double kYoshidaInner = -1.7024143839193153;  // -2^(1/3) / (2 - 2^(1/3))

inline int step_count(double duration, double h) {
  if (duration <= 0.0) return 0;
  const double r = duration / h;
  return std::max(1, static_cast<int>(std::ceil(r - 1e-9)));
}

/// Advances x by `duration` with constant controls u. `on_step(k, t, x)` sees
/// the state after every step k = 1..N, t measured from the piece start, and
/// may return false to stop early. A negative duration runs the symmetric
/// scheme backwards.
template <class OnStep>
void advance_fixed(State& x, double duration, std::span<const double> u, const LatticeSystem& sys,
                   const IntegratorPolicy& pol, OnStep&& on_step) {
  const int steps = step_count(std::abs(duration), pol.step);
  if (steps == 0) return;
  const double h = duration / steps;
  Vector force = sys.forces(x.q);
  add_controls(force, sys, u);
  for (int k = 1; k <= steps; ++k) {
    if (pol.method == Method::verlet) {
      verlet_substep(x, force, h, sys, u);
    } else {
      verlet_substep(x, force, kYoshidaOuter * h, sys, u);
      verlet_substep(x, force, kYoshidaInner * h, sys, u);
      verlet_substep(x, force, kYoshidaOuter * h, sys, u);
    }
    if ((k & 1023) == 0 || k == steps) require_finite(x);
    const double t = (k == steps) ? duration : k * h;
    if constexpr (std::is_same_v<decltype(on_step(k, t, x)), bool>) {
      if (!on_step(k, t, x)) return;
    } else {
      on_step(k, t, x);
    }
  }
}

template <class OnSample>
void advance_reference(State& x, double duration, std::span<const double> u, const LatticeSystem& sys,
                       const IntegratorPolicy& pol, double sample_dt, OnSample&& on_sample) {
  namespace odeint = boost::numeric::odeint;
  using Buffer = std::vector<double>;
  const int n = sys.n();
  Buffer y(2 * n);
  for (int k = 0; k < n; ++k) y[k] = x.q[k], y[n + k] = x.p[k];
  auto rhs = [&](const Buffer& s, Buffer& ds, double) {
    Vector q = Eigen::Map<const Vector>(s.data(), n);
    Vector f = sys.forces(q);
    add_controls(f, sys, u);
    for (int k = 0; k < n; ++k) ds[k] = s[n + k], ds[n + k] = f[k];
  };
  auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<Buffer>>(pol.reference_abs_tol,
                                                                                  pol.reference_rel_tol);
  const double dir = duration < 0.0 ? -1.0 : 1.0;
  const double total = std::abs(duration);
  const int chunks = std::max(1, static_cast<int>(std::ceil(total / sample_dt - 1e-9)));
  double t = 0.0;
  try {
    for (int c = 1; c <= chunks; ++c) {
      const double t_next = (c == chunks) ? total : c * (total / chunks);
      odeint::integrate_adaptive(stepper, rhs, y, dir * t, dir * t_next, dir * std::min(pol.step, t_next - t));
      t = t_next;
      for (int k = 0; k < n; ++k) x.q[k] = y[k], x.p[k] = y[n + k];
      require_finite(x);
      on_sample(dir * t, x);
    }
  } catch (const odeint::step_adjustment_error& e) {
    throw NumericalError(std::string("step-size underflow: ") + e.what());
  } catch (const odeint::no_progress_error& e) {
    throw NumericalError(std::string("integrator made no progress: ") + e.what());
  }
}

inline void advance(State& x, double duration, std::span<const double> u, const LatticeSystem& sys,
                    const IntegratorPolicy& pol) {
  if (pol.method == Method::reference)
    advance_reference(x, duration, u, sys, pol, std::max(std::abs(duration), pol.step), [](double, const State&) {});
  else
    advance_fixed(x, duration, u, sys, pol, [](int, double, const State&) {});
}

inline std::vector<double> clamp_controls(std::vector<double> u, const IntegratorPolicy& pol) {
  if (pol.control_clamp)
    for (double& v : u) v = std::clamp(v, -*pol.control_clamp, *pol.control_clamp);
  return u;
}

}  // namespace detail

/// e^{t f}(x) for t >= 0.
inline State free_flow(const State& x, double t, const LatticeSystem& sys, const IntegratorPolicy& pol = {}) {
  sys.check(x);
  if (!(t >= 0.0)) throw ContractError("free_flow needs t >= 0");
  State y = x;
  const std::vector<double> zero(sys.control_sites().size(), 0.0);
  detail::advance(y, t, zero, sys, pol);
  return y;
}

/// Flow of f + sum g_i u_i(t) under a piecewise-constant signal.
inline Trajectory controlled_flow(const State& x, const ControlSignal& signal, const LatticeSystem& sys,
                                  const IntegratorPolicy& pol = {}) {
  sys.check(x);
  signal.validate(sys.control_sites().size());
  Trajectory tr;
  tr.method = to_string(pol.method);
  tr.step = pol.step;
  const auto pieces = signal.pieces();
  State y = x;
  double t0 = 0.0;
  tr.push(0.0, y, pieces.empty() ? std::vector<double>(sys.control_sites().size(), 0.0)
                                 : detail::clamp_controls(pieces.front().values, pol));
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto u = detail::clamp_controls(pieces[i].values, pol);
    const auto next_u = i + 1 < pieces.size() ? detail::clamp_controls(pieces[i + 1].values, pol) : u;
    const double d = pieces[i].duration;
    if (pol.method == Method::reference) {
      const double dt = pol.step * pol.sample_every;
      const int chunks = std::max(1, static_cast<int>(std::ceil(d / dt - 1e-9)));
      detail::advance_reference(y, d, u, sys, pol, d / chunks, [&](double t, const State& s) {
        tr.push(t0 + t, s, t >= d ? next_u : u);
      });
    } else {
      const int steps = detail::step_count(d, pol.step);
      detail::advance_fixed(y, d, u, sys, pol, [&](int k, double t, const State& s) {
        if (k == steps)
          tr.push(t0 + d, s, next_u);
        else if (k % pol.sample_every == 0)
          tr.push(t0 + t, s, u);
      });
    }
    t0 += d;
  }
  return tr;
}

namespace oracle {

/// Test-only access token: reverse-time flow must not leak into steering.
struct ReverseTimeAccess {
  explicit ReverseTimeAccess() = default;
};

/// e^{-t f}(x), run with the same symmetric scheme at negative step.
inline State reverse_free_flow(ReverseTimeAccess, const State& x, double t, const LatticeSystem& sys,
                               const IntegratorPolicy& pol = {}) {
  sys.check(x);
  if (!(t >= 0.0)) throw ContractError("reverse_free_flow needs t >= 0");
  State y = x;
  const std::vector<double> zero(sys.control_sites().size(), 0.0);
  detail::advance(y, -t, zero, sys, pol);
  return y;
}

}  // namespace oracle

}  // namespace latticectl
