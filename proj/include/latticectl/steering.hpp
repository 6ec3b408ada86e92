#pragma once

#include "latticectl/dynamics.hpp"
#include "latticectl/least_squares.hpp"
#include "latticectl/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace latticectl {

enum class PlanMode { idealized, admissible };

inline std::string to_string(PlanMode m) { return m == PlanMode::idealized ? "idealized" : "admissible"; }

struct FreeFlow {
  double t;
};
/// e^{sign g} o e^{t f} o e^{-sign g}
struct ConjugatedFlow {
  int sign;
  double t;
};
/// Exact translation of the forced momentum (idealized e^{amount g}).
struct GShift {
  double amount;
};
/// Flow of f + sign*theta*g for time 1/theta.
struct Pulse {
  int sign;
  double theta;
};
struct ConstantLeg {
  double u;
  double duration;
};

using Primitive = std::variant<FreeFlow, ConjugatedFlow, GShift, Pulse, ConstantLeg>;

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

inline std::string describe(const Primitive& p) {
  return std::visit(overloaded{
                        [](const FreeFlow& v) { return "FreeFlow(" + std::to_string(v.t) + ")"; },
                        [](const ConjugatedFlow& v) {
                          return std::string("ConjugatedFlow(") + (v.sign > 0 ? "+" : "-") + ", " + std::to_string(v.t) + ")";
                        },
                        [](const GShift& v) { return "GShift(" + std::to_string(v.amount) + ")"; },
                        [](const Pulse& v) {
                          return std::string("Pulse(") + (v.sign > 0 ? "+" : "-") + ", " + std::to_string(v.theta) + ")";
                        },
                        [](const ConstantLeg& v) {
                          return "ConstantLeg(" + std::to_string(v.u) + ", " + std::to_string(v.duration) + ")";
                        },
                    },
                    p);
}

struct SteeringPlan {
  std::vector<Primitive> steps;
  PlanMode mode = PlanMode::idealized;
  double theta = 1e3;
  double achieved_distance = 0.0;
  bool reached = true;
  long evaluations = 0;

  void validate() const {
    if (!(theta > 0.0)) throw ContractError("plan theta must be > 0");
    for (const auto& s : steps) {
      std::visit(overloaded{
                     [](const FreeFlow& v) { if (!(v.t >= 0.0)) throw ContractError("negative FreeFlow duration"); },
                     [](const ConjugatedFlow& v) {
                       if (!(v.t >= 0.0) || (v.sign != 1 && v.sign != -1)) throw ContractError("bad ConjugatedFlow");
                     },
                     [this](const GShift&) {
                       if (mode == PlanMode::admissible) throw ContractError("admissible plans cannot contain GShift");
                     },
                     [](const Pulse& v) {
                       if (!(v.theta > 0.0) || (v.sign != 1 && v.sign != -1)) throw ContractError("bad Pulse");
                     },
                     [](const ConstantLeg& v) {
                       if (!(v.duration >= 0.0) || !std::isfinite(v.u)) throw ContractError("bad ConstantLeg");
                     },
                 },
                 s);
    }
  }

  /// Momentum change the plan must produce: legs plus idealized shifts.
  double momentum_budget() const {
    double d = 0.0;
    for (const auto& s : steps) {
      if (auto* l = std::get_if<ConstantLeg>(&s)) d += l->u * l->duration;
      if (auto* g = std::get_if<GShift>(&s)) d += g->amount;
      if (auto* p = std::get_if<Pulse>(&s)) d += p->sign;
    }
    return d;
  }
};

// ---------------------------------------------------------------------------
// Primitives

inline State g_shift(const State& x, double amount, int site = 1) {
  State y = x;
  y.p[site - 1] += amount;
  return y;
}

namespace detail {

inline std::vector<double> site_control(const LatticeSystem& sys, double u) {
  std::vector<double> v(sys.control_sites().size(), 0.0);
  v[0] = u;
  return v;
}

}  // namespace detail

inline State pulse(const State& x, int sign, double theta, const LatticeSystem& sys, const IntegratorPolicy& pol = {}) {
  sys.check(x);
  if (!(theta > 0.0)) throw ContractError("pulse needs theta > 0");
  State y = x;
  detail::advance(y, 1.0 / theta, detail::site_control(sys, sign * theta), sys, pol);
  return y;
}

inline State conjugated_flow(const State& x, int sign, double t, const LatticeSystem& sys, PlanMode mode,
                             double theta = 1e3, const IntegratorPolicy& pol = {}) {
  if (!(t >= 0.0)) throw ContractError("conjugated_flow needs t >= 0");
  const int site = sys.control_sites().front();
  if (mode == PlanMode::idealized) return g_shift(free_flow(g_shift(x, -sign, site), t, sys, pol), sign, site);
  return pulse(free_flow(pulse(x, -sign, theta, sys, pol), t, sys, pol), sign, theta, sys, pol);
}

/// Endpoint of one primitive, in place.
inline void apply_primitive(State& x, const Primitive& prim, const LatticeSystem& sys, PlanMode mode, double theta,
                            const IntegratorPolicy& pol = {}) {
  const int site = sys.control_sites().front();
  std::visit(overloaded{
                 [&](const FreeFlow& v) { detail::advance(x, v.t, detail::site_control(sys, 0.0), sys, pol); },
                 [&](const ConjugatedFlow& v) { x = conjugated_flow(x, v.sign, v.t, sys, mode, theta, pol); },
                 [&](const GShift& v) { x.p[site - 1] += v.amount; },
                 [&](const Pulse& v) { x = pulse(x, v.sign, v.theta, sys, pol); },
                 [&](const ConstantLeg& v) { detail::advance(x, v.duration, detail::site_control(sys, v.u), sys, pol); },
             },
             prim);
}

// ---------------------------------------------------------------------------
// Moving to the zero-momentum hyperplane

struct MomentumProjection {
  double u_const;
  State endpoint;
};

/// Constant control -P(x) for time 1 lands on Sum p = 0.
inline MomentumProjection project_to_zero_momentum(const State& x, const LatticeSystem& sys,
                                                   const IntegratorPolicy& pol = {}) {
  sys.check(x);
  const double u = -x.total_momentum();
  State y = x;
  detail::advance(y, 1.0, detail::site_control(sys, u), sys, pol);
  return {u, y};
}

/// Point z on Sum p = 0 with ConstantLeg(u, 1)(z) = target, found with forward
/// legs only: ten backward sub-legs, each solved by least squares.
inline State leg_preimage(const State& target, double u, const LatticeSystem& sys, const IntegratorPolicy& pol = {}) {
  constexpr int kSub = 10;
  const double dt = 1.0 / kSub;
  const int n = sys.n();
  const int site = sys.control_sites().front();
  const auto uc = detail::site_control(sys, u);
  State y = target;
  for (int s = 0; s < kSub; ++s) {
    State guess = y;
    guess += -dt * controlled_rhs(y, sys, uc);
    const State goal = y;
    auto residual = [&](const Vector& z) {
      State w = State::from_flat(z);
      detail::advance(w, dt, uc, sys, pol);
      return Vector(w.flat() - goal.flat());
    };
    const Vector inf = Vector::Constant(2 * n, std::numeric_limits<double>::infinity());
    y = State::from_flat(levenberg_marquardt(residual, guess.flat(), -inf, inf, 30, 1e-13).x);
  }
  // pin the momentum sum exactly; the leg then adds exactly u
  y.p[site - 1] -= y.total_momentum();
  return y;
}

// ---------------------------------------------------------------------------
// Recurrence on the zero-momentum hyperplane

struct RecurrenceResult {
  bool found = false;
  double tau = 0.0;
  double distance = std::numeric_limits<double>::infinity();
  double best_tau = 0.0;  // closest return seen, found or not
  double best_distance = std::numeric_limits<double>::infinity();
};

/// First tau in [t_min, t_max] on the integrator grid with |e^{tau f}(x) - x| <= eps.
inline RecurrenceResult recurrence_search(const State& x, double eps, double t_min, double t_max,
                                          const LatticeSystem& sys, const IntegratorPolicy& pol = {}) {
  sys.check(x);
  if (std::abs(x.total_momentum()) >= 1e-10) throw ContractError("recurrence_search needs a state with Sum p = 0");
  if (!(t_min > 0.0 && t_min < t_max)) throw ContractError("recurrence_search needs 0 < t_min < t_max");
  RecurrenceResult res;
  State y = x;
  const auto zero = detail::site_control(sys, 0.0);
  const auto dist = [&](const State& s) { return std::sqrt((s.q - x.q).squaredNorm() + (s.p - x.p).squaredNorm()); };
  // the last two grid samples; a local minimum between grid points is refined by golden section
  State s2 = x, s1 = x;
  double t2 = -1.0, t1 = -1.0, d2 = std::numeric_limits<double>::infinity(), d1 = d2;
  detail::advance_fixed(y, t_max, zero, sys, pol, [&](int, double t, const State& s) {
    if (t < t_min - 1e-12) return true;
    const double d = dist(s);
    if (d < res.best_distance) res.best_distance = d, res.best_tau = t;
    if (d <= eps) {
      res.found = true, res.tau = t, res.distance = d;
      return false;
    }
    if (t2 >= 0.0 && d1 < d2 && d1 < d && d1 < 4.0 * eps) {
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double lo = 0.0, hi = t - t2;
      const auto at = [&](double dt) { return dt == 0.0 ? s2 : free_flow(s2, dt, sys, pol); };
      for (int it = 0; it < 40; ++it) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (dist(at(a)) < dist(at(b))) hi = b; else lo = a;
      }
      const double dt = 0.5 * (lo + hi), dm = dist(at(dt));
      if (dm < res.best_distance) res.best_distance = dm, res.best_tau = t2 + dt;
      if (dm <= eps) {
        res.found = true, res.tau = t2 + dt, res.distance = dm;
        return false;
      }
    }
    s2 = s1, t2 = t1, d2 = d1;
    s1 = s, t1 = t, d1 = d;
    return true;
  });
  return res;
}

struct ReverseApproximation {
  bool found = false;
  double tau_prime = 0.0;   // forward time used
  State state;              // e^{tau' f}(x)
  double distance = std::numeric_limits<double>::infinity();  // to the reverse-time target
  double return_time = 0.0;
  double return_distance = 0.0;
};

/// Approximates e^{-t f}(x) by e^{tau' f}(x), tau' = tau_r - t for successive
/// near-returns tau_r of x. `target` (the exact reverse point) only scores
/// candidates; the candidates themselves come from return-distance minima.
inline ReverseApproximation reverse_flow_approx(const State& x, double t, double eps, double t_max, const State& target,
                                                const LatticeSystem& sys, const IntegratorPolicy& pol = {}) {
  sys.check(x);
  if (std::abs(x.total_momentum()) >= 1e-10) throw ContractError("reverse_flow_approx needs a state with Sum p = 0");
  if (!(t > 0.0)) throw ContractError("reverse_flow_approx needs t > 0");
  ReverseApproximation best;
  best.state = x;
  const int lag = detail::step_count(t, pol.step);
  std::deque<State> window;  // states at the last lag+1 steps
  window.push_back(x);
  double d_prev2 = std::numeric_limits<double>::infinity(), d_prev = std::numeric_limits<double>::infinity();
  double t_prev = 0.0;
  const auto zero = detail::site_control(sys, 0.0);
  State y = x;
  const double h = pol.step;
  detail::advance_fixed(y, std::ceil(t_max / h - 1e-9) * h, zero, sys, pol, [&](int k, double tk, const State& s) {
    window.push_back(s);
    if (static_cast<int>(window.size()) > lag + 2) window.pop_front();
    const double d = distance(s, x);
    // previous sample was a local minimum of the return distance
    if (k - 1 > lag && d_prev <= d_prev2 && d_prev <= d) {
      const State& cand = window[window.size() - 2 - lag];
      const double err = distance(cand, target);
      if (err < best.distance) {
        best.distance = err;
        best.state = cand;
        best.tau_prime = t_prev - lag * (t_prev / (k - 1));
        best.return_time = t_prev;
        best.return_distance = d_prev;
      }
      if (err <= eps) {
        best.found = true;
        return false;
      }
    }
    d_prev2 = d_prev, d_prev = d, t_prev = tk;
    return true;
  });
  return best;
}

// ---------------------------------------------------------------------------
// Plan execution

struct PlanExecution {
  Trajectory trajectory;
  std::optional<ControlSignal> control;  // present for admissible plans
  State final;
};

/// Control signal realizing an admissible plan.
inline ControlSignal realize(const SteeringPlan& plan, const LatticeSystem& sys) {
  if (plan.mode != PlanMode::admissible) throw ContractError("only admissible plans are realizable as controls");
  plan.validate();
  std::vector<ControlSignal::Segment> segs;
  auto push = [&](double d, double u) {
    if (d > 0.0) segs.push_back({d, u});
  };
  for (const auto& s : plan.steps) {
    std::visit(overloaded{
                   [&](const FreeFlow& v) { push(v.t, 0.0); },
                   [&](const ConjugatedFlow& v) {
                     push(1.0 / plan.theta, -v.sign * plan.theta);
                     push(v.t, 0.0);
                     push(1.0 / plan.theta, v.sign * plan.theta);
                   },
                   [&](const GShift&) {},
                   [&](const Pulse& v) { push(1.0 / v.theta, v.sign * v.theta); },
                   [&](const ConstantLeg& v) { push(v.duration, v.u); },
               },
               s);
  }
  ControlSignal sig;
  sig.sites.assign(sys.control_sites().size(), {});
  sig.sites[0] = segs;
  if (segs.empty()) sig.sites.assign(sys.control_sites().size(), {});
  for (std::size_t i = 1; i < sig.sites.size(); ++i)
    for (const auto& s : segs) sig.sites[i].push_back({s.duration, 0.0});
  return sig;
}

/// Runs a plan. Idealized GShifts are instantaneous, so the trajectory then
/// holds two samples at the same time (before and after the jump).
inline PlanExecution execute_plan(const State& x, const SteeringPlan& plan, const LatticeSystem& sys,
                                  const IntegratorPolicy& pol = {}) {
  sys.check(x);
  plan.validate();
  PlanExecution out;
  if (plan.mode == PlanMode::admissible) {
    ControlSignal sig = realize(plan, sys);
    if (sig.sites.empty() || sig.sites[0].empty()) {
      out.trajectory.push(0.0, x, detail::site_control(sys, 0.0));
      out.trajectory.method = to_string(pol.method);
      out.trajectory.step = pol.step;
    } else {
      out.trajectory = controlled_flow(x, sig, sys, pol);
    }
    out.control = std::move(sig);
    out.final = out.trajectory.final();
    return out;
  }
  Trajectory& tr = out.trajectory;
  tr.method = to_string(pol.method);
  tr.step = pol.step;
  tr.push(0.0, x, detail::site_control(sys, 0.0));
  State y = x;
  double t0 = 0.0;
  auto run = [&](double d, double u) {
    if (d <= 0.0) return;
    Trajectory piece = controlled_flow(y, ControlSignal::constant(u, d, sys.control_sites().size()), sys, pol);
    tr.controls.back() = detail::site_control(sys, u);
    for (std::size_t i = 1; i < piece.size(); ++i) tr.push(t0 + piece.times[i], piece.states[i], piece.controls[i]);
    tr.controls.back() = detail::site_control(sys, 0.0);
    y = piece.final();
    t0 += d;
  };
  auto jump = [&](double a) {
    y.p[sys.control_sites().front() - 1] += a;
    tr.push(t0, y, detail::site_control(sys, 0.0));
  };
  for (const auto& s : plan.steps) {
    std::visit(overloaded{
                   [&](const FreeFlow& v) { run(v.t, 0.0); },
                   [&](const ConjugatedFlow& v) {
                     jump(-v.sign);
                     run(v.t, 0.0);
                     jump(v.sign);
                   },
                   [&](const GShift& v) { jump(v.amount); },
                   [&](const Pulse& v) { run(1.0 / v.theta, v.sign * v.theta); },
                   [&](const ConstantLeg& v) { run(v.duration, v.u); },
               },
               s);
  }
  out.final = y;
  return out;
}

/// Endpoint only.
inline State plan_endpoint(const State& x, const SteeringPlan& plan, const LatticeSystem& sys,
                           const IntegratorPolicy& pol = {}) {
  State y = x;
  for (const auto& s : plan.steps) apply_primitive(y, s, sys, plan.mode, plan.theta, pol);
  return y;
}

// ---------------------------------------------------------------------------
// Planner

struct PlannerOptions {
  int beam_width = 8;
  int max_length = 8;
  double max_duration = 50.0;
  double short_horizon = 5.0;  // scans also keep the best duration below this
  double scan_spacing = 0.01;  // time between scan samples
  double search_step = 4e-3;   // fixed-step integrators search at this step, then polish at the policy step
  int scan_candidates = 3;     // local minima kept per scan
  int lm_iterations = 10;
  int final_lm_iterations = 40;
  PlanMode mode = PlanMode::idealized;
  double theta = 1e3;
  long evaluation_budget = 400000;
};

namespace detail {

// 0 = FreeFlow, 1 = ConjugatedFlow(+), 2 = ConjugatedFlow(-)
inline Primitive make_primitive(int type, double t) {
  if (type == 0) return FreeFlow{t};
  return ConjugatedFlow{type == 1 ? 1 : -1, t};
}

struct Node {
  std::vector<int> types;
  std::vector<double> durations;
  State end;
  double score = std::numeric_limits<double>::infinity();
};

inline bool node_less(const Node& a, const Node& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.types.size() != b.types.size()) return a.types.size() < b.types.size();
  return a.types < b.types;
}

class InnerPlanner {
 public:
  InnerPlanner(const LatticeSystem& sys, const IntegratorPolicy& pol, const PlannerOptions& opt, State start,
               State target, double tol)
      : sys_(sys), pol_(pol), search_(pol), opt_(opt), start_(std::move(start)), target_(std::move(target)), tol_(tol) {
    if (pol.method != Method::reference) search_.step = std::max(pol.step, opt.search_step);
  }

  Node run() {
    Node root;
    root.end = start_;
    root.score = distance(start_, target_);
    best_ = root;
    std::vector<Node> beam{root};
    for (int level = 1; level <= opt_.max_length && best_.score > tol_ && !exhausted(); ++level) {
      std::vector<Node> children;
      for (const Node& node : beam) {
        for (int type = 0; type < 3; ++type) {
          if (!node.types.empty() && node.types.back() == type) continue;
          for (double t : scan(node.end, type)) {
            Node child = node;
            child.types.push_back(type);
            child.durations.push_back(t);
            polish(child, opt_.lm_iterations);
            consider(child);
            children.push_back(std::move(child));
            if (best_.score <= tol_ || exhausted()) break;
          }
          if (best_.score <= tol_ || exhausted()) break;
        }
        if (best_.score <= tol_ || exhausted()) break;
      }
      std::sort(children.begin(), children.end(), node_less);
      beam.clear();
      for (auto& c : children) {
        bool dup = false;
        for (const auto& b : beam)
          if (b.types == c.types && std::abs(b.score - c.score) <= 1e-12 * (1.0 + b.score)) dup = true;
        if (!dup) beam.push_back(std::move(c));
        if (static_cast<int>(beam.size()) >= opt_.beam_width) break;
      }
      if (!beam.empty() && best_.score > tol_ && !exhausted()) {
        Node top = beam.front();
        polish(top, opt_.final_lm_iterations);
        consider(top);
        if (node_less(top, beam.front())) beam.front() = top;
      }
    }
    exact_ = true;
    if (!best_.types.empty()) {
      Node top = best_;
      polish(top, opt_.final_lm_iterations);
      best_ = top;
    }
    return best_;
  }

  long evaluations() const { return evaluations_; }
  bool exhausted() const { return evaluations_ >= opt_.evaluation_budget; }

 private:
  const IntegratorPolicy& policy() const { return exact_ ? pol_ : search_; }

  State endpoint(const std::vector<int>& types, const std::vector<double>& durations) {
    ++evaluations_;
    State y = start_;
    for (std::size_t i = 0; i < types.size(); ++i)
      apply_primitive(y, make_primitive(types[i], durations[i]), sys_, opt_.mode, opt_.theta, policy());
    return y;
  }

  void consider(const Node& n) {
    if (node_less(n, best_)) best_ = n;
  }

  /// One integration over [0, max_duration] sampling the closing map; returns
  /// the deepest local minima of the closing distance plus the best duration
  /// below short_horizon.
  std::vector<double> scan(const State& from, int type) {
    ++evaluations_;
    const int site = sys_.control_sites().front();
    const int sign = type == 1 ? 1 : -1;
    State y = from;
    if (type != 0) {
      if (opt_.mode == PlanMode::idealized)
        y.p[site - 1] -= sign;
      else
        y = pulse(y, -sign, opt_.theta, sys_, search_);
    }
    auto close = [&](const State& s) {
      if (type == 0) return distance(s, target_);
      if (opt_.mode == PlanMode::idealized) return distance(g_shift(s, sign, site), target_);
      return distance(pulse(s, sign, opt_.theta, sys_, search_), target_);
    };
    std::vector<std::pair<double, double>> samples{{close(y), 0.0}};
    const int stride = std::max(1, static_cast<int>(std::lround(opt_.scan_spacing / search_.step)));
    detail::advance_fixed(y, opt_.max_duration, site_control(sys_, 0.0), sys_, search_, [&](int k, double t, const State& s) {
      if (k % stride == 0) samples.emplace_back(close(s), t);
    });
    std::vector<std::pair<double, double>> minima;
    double best_short = std::numeric_limits<double>::infinity(), t_short = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double d = samples[i].first;
      if (samples[i].second <= opt_.short_horizon && d < best_short) best_short = d, t_short = samples[i].second;
      const bool left = i == 0 || samples[i - 1].first >= d;
      const bool right = i + 1 == samples.size() || samples[i + 1].first > d;
      if (left && right) minima.push_back(samples[i]);
    }
    std::sort(minima.begin(), minima.end());
    std::vector<double> out;
    for (const auto& m : minima) {
      if (static_cast<int>(out.size()) >= opt_.scan_candidates) break;
      out.push_back(m.second);
    }
    if (std::none_of(out.begin(), out.end(), [&](double t) { return std::abs(t - t_short) < 1e-9; }))
      out.push_back(t_short);
    return out;
  }

  void polish(Node& node, int iterations) {
    const auto dim = static_cast<Eigen::Index>(node.durations.size());
    Vector d0 = Eigen::Map<const Vector>(node.durations.data(), dim);
    auto residual = [&](const Vector& d) {
      std::vector<double> ds(d.data(), d.data() + d.size());
      return Vector(endpoint(node.types, ds).flat() - target_.flat());
    };
    const auto res = levenberg_marquardt(residual, d0, Vector::Zero(dim), Vector::Constant(dim, opt_.max_duration),
                                         iterations, 0.1 * tol_);
    node.durations.assign(res.x.data(), res.x.data() + res.x.size());
    node.end = endpoint(node.types, node.durations);
    node.score = distance(node.end, target_);
  }

  const LatticeSystem& sys_;
  const IntegratorPolicy& pol_;
  IntegratorPolicy search_;
  bool exact_ = false;
  const PlannerOptions& opt_;
  State start_;
  State target_;
  double tol_;
  Node best_;
  long evaluations_ = 0;
};

}  // namespace detail

/// Steers start to goal: a constant leg onto Sum p = 0, an in-plane
/// composition of free and conjugated flows, and a constant leg off the plane
/// (legs are skipped when start and goal already share total momentum).
/// On failure the best plan found is returned with reached = false.
inline SteeringPlan plan_steering(const State& start, const State& goal, double tol, const LatticeSystem& sys,
                                  const PlannerOptions& opt = {}, const IntegratorPolicy& pol = {}) {
  sys.check(start);
  sys.check(goal);
  SteeringPlan plan;
  plan.mode = opt.mode;
  plan.theta = opt.theta;
  plan.achieved_distance = distance(start, goal);
  plan.reached = plan.achieved_distance <= tol;
  if (plan.reached) return plan;

  std::vector<Primitive> prefix, suffix;
  State from = start, to = goal;
  const double p_start = start.total_momentum(), p_goal = goal.total_momentum();
  if (std::abs(p_start - p_goal) > 1e-12) {
    if (std::abs(p_start) > 1e-12) {
      const auto proj = project_to_zero_momentum(start, sys, pol);
      prefix.push_back(ConstantLeg{proj.u_const, 1.0});
      from = proj.endpoint;
    }
    if (std::abs(p_goal) > 1e-12) {
      to = leg_preimage(goal, p_goal, sys, pol);
      suffix.push_back(ConstantLeg{p_goal, 1.0});
    }
  }
  // the in-plane tolerance is tightened so the final leg cannot push us out
  const double inner_tol = suffix.empty() ? tol : 0.25 * tol;
  detail::InnerPlanner inner(sys, pol, opt, from, to, inner_tol);
  const detail::Node best = inner.run();

  plan.steps = prefix;
  for (std::size_t i = 0; i < best.types.size(); ++i) plan.steps.push_back(detail::make_primitive(best.types[i], best.durations[i]));
  plan.steps.insert(plan.steps.end(), suffix.begin(), suffix.end());
  plan.evaluations = inner.evaluations();
  plan.achieved_distance = distance(plan_endpoint(start, plan, sys, pol), goal);
  plan.reached = plan.achieved_distance <= tol;
  return plan;
}

}  // namespace latticectl
