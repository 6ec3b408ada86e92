#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace latticectl {

/// Raised when inputs violate a documented precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an integration produces non-finite values or cannot proceed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tangent vectors are stored as (dq_1..dq_n, dp_1..dp_n).
using TangentVector = Eigen::VectorXd;

enum class Topology { periodic, open };

inline std::string to_string(Topology t) { return t == Topology::periodic ? "periodic" : "open"; }

/// Particle count, boundary convention and the (1-based) particles a force acts on.
struct LatticeConfig {
  int n = 3;
  Topology topology = Topology::periodic;
  std::vector<int> control_sites{1};

  void validate() const {
    if (n < 2) throw ContractError("lattice needs n >= 2 particles, got " + std::to_string(n));
    for (std::size_t i = 0; i < control_sites.size(); ++i) {
      int s = control_sites[i];
      if (s < 1 || s > n)
        throw ContractError("control site " + std::to_string(s) + " outside 1.." + std::to_string(n));
      for (std::size_t j = 0; j < i; ++j)
        if (control_sites[j] == s) throw ContractError("duplicate control site " + std::to_string(s));
    }
  }

  int bonds() const { return topology == Topology::periodic ? n : n - 1; }

  bool has_site(int s) const {
    return std::find(control_sites.begin(), control_sites.end(), s) != control_sites.end();
  }
};

/// Positions q and momenta p (unit masses).
struct State {
  Vector q;
  Vector p;

  State() = default;
  State(Vector q_, Vector p_) : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size()) throw ContractError("State: q and p lengths differ");
  }
  static State zero(int n) { return State(Vector::Zero(n), Vector::Zero(n)); }

  int n() const { return static_cast<int>(q.size()); }
  double total_momentum() const { return p.sum(); }
  double center_sum() const { return q.sum(); }

  bool finite() const { return q.allFinite() && p.allFinite(); }

  Vector flat() const {
    Vector x(2 * q.size());
    x << q, p;
    return x;
  }
  static State from_flat(const Vector& x) {
    const auto n = x.size() / 2;
    return State(x.head(n), x.tail(n));
  }
};

inline double distance(const State& a, const State& b) {
  return std::sqrt((a.q - b.q).squaredNorm() + (a.p - b.p).squaredNorm());
}

inline State& operator+=(State& s, const TangentVector& v) {
  const auto n = s.q.size();
  s.q += v.head(n);
  s.p += v.tail(n);
  return s;
}

}  // namespace latticectl
