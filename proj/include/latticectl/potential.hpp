#pragma once

#include "latticectl/multidual.hpp"
#include "latticectl/types.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace latticectl {

enum class PotentialKind { toda, harmonic, quartic, shifted_odd, polynomial };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::toda: return "toda";
    case PotentialKind::harmonic: return "harmonic";
    case PotentialKind::quartic: return "quartic";
    case PotentialKind::shifted_odd: return "shifted-odd";
    case PotentialKind::polynomial: return "polynomial";
  }
  return "?";
}

/// Pair interaction Phi of neighbouring particles, with phi = Phi' and two
/// further derivatives. Everything except Toda is stored as a polynomial in
/// (t - shift) plus a linear term, which keeps derivatives exact.
class Potential {
 public:
  static Potential toda() {
    Potential p;
    p.kind_ = PotentialKind::toda;
    p.lower_bound_ = 0.0;
    p.infimum_ = 0.0;
    return p;
  }

  static Potential harmonic() {
    auto p = polynomial({0.0, 0.0, 0.5});
    p.kind_ = PotentialKind::harmonic;
    return p;
  }

  static Potential quartic() {
    auto p = polynomial({0.0, 0.0, 0.0, 0.0, 0.25});
    p.kind_ = PotentialKind::quartic;
    return p;
  }

  /// Phi(t) = sum_k coeffs[k] (t - shift)^k + linear * t.
  static Potential polynomial(std::vector<double> coeffs, double shift = 0.0, double linear = 0.0) {
    Potential p;
    p.kind_ = PotentialKind::polynomial;
    p.coeffs_ = std::move(coeffs);
    if (p.coeffs_.empty()) p.coeffs_.push_back(0.0);
    p.shift_ = shift;
    p.linear_ = linear;
    p.params_["shift"] = shift;
    p.params_["linear"] = linear;
    for (std::size_t k = 0; k < p.coeffs_.size(); ++k) p.params_["a" + std::to_string(k)] = p.coeffs_[k];
    p.resolve_bounds();
    return p;
  }

  /// phi(t) = F(t - shift) + phi_shift, with F odd given by its t, t^3, t^5... coefficients.
  /// Then phi' is even about `shift`.
  static Potential from_odd_force(const std::vector<double>& odd_coeffs, double shift, double phi_shift = 0.0) {
    std::vector<double> c(2 * odd_coeffs.size() + 2, 0.0);
    for (std::size_t j = 0; j < odd_coeffs.size(); ++j) {
      const std::size_t k = 2 * j + 1;       // F term s^k
      c[k + 1] = odd_coeffs[j] / double(k + 1);  // integrated once
    }
    auto p = polynomial(std::move(c), shift, phi_shift);
    return p;
  }

  /// phi'(t) = odd polynomial in (t - shift); the c = -1 family. Not bounded below.
  static Potential shifted_odd(const std::vector<double>& odd_coeffs, double shift, double phi_shift = 0.0) {
    std::vector<double> c(2 * odd_coeffs.size() + 3, 0.0);
    for (std::size_t j = 0; j < odd_coeffs.size(); ++j) {
      const std::size_t k = 2 * j + 1;  // phi' term s^k
      c[k + 2] = odd_coeffs[j] / double((k + 1) * (k + 2));
    }
    auto p = polynomial(std::move(c), shift, phi_shift);
    p.kind_ = PotentialKind::shifted_odd;
    return p;
  }

  PotentialKind kind() const { return kind_; }
  std::string name() const { return to_string(kind_); }
  const std::map<std::string, double>& params() const { return params_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double shift() const { return shift_; }
  double linear() const { return linear_; }

  bool bounded_below() const { return std::isfinite(lower_bound_); }
  /// B >= 0 with Phi >= -B everywhere (infinite when unbounded).
  double lower_bound() const { return lower_bound_; }
  double infimum() const { return infimum_; }
  /// Phi -> +inf as t -> +inf.
  bool grows() const {
    if (kind_ == PotentialKind::toda) return true;
    const int d = degree();
    if (d <= 0) return false;
    if (d == 1) return coeffs_[1] + linear_ > 0.0;
    return coeffs_[d] > 0.0;
  }
  void declare_lower_bound(double b) {
    lower_bound_ = b;
    if (!std::isfinite(infimum_) || infimum_ < -b) infimum_ = -b;
  }

  /// True when phi is affine in the bond, so the drift is linear up to a constant.
  bool linear_force() const {
    if (kind_ == PotentialKind::toda) return false;
    return degree() <= 2;
  }
  /// Spring constant for linear-force potentials.
  double stiffness() const { return coeffs_.size() > 2 ? 2.0 * coeffs_[2] : 0.0; }

  /// k-th derivative of Phi; k = 0 is Phi itself.
  double derivative(int k, double t) const {
    if (kind_ == PotentialKind::toda) return std::ldexp(std::exp(2.0 * t), k);
    const double s = t - shift_;
    double acc = 0.0;
    for (int j = degree(); j >= k; --j) acc = acc * s + coeffs_[j] * falling(j, k);
    if (k == 0) acc += linear_ * t;
    if (k == 1) acc += linear_;
    return acc;
  }
  double value(double t) const { return derivative(0, t); }
  double phi(double t) const { return derivative(1, t); }
  double dphi(double t) const { return derivative(2, t); }
  double ddphi(double t) const { return derivative(3, t); }

  /// phi = Phi' for any scalar supporting +, * and exp.
  template <class T>
  T force(const T& t) const {
    if (kind_ == PotentialKind::toda) return 2.0 * exp(2.0 * t);
    const T s = t - T(shift_);
    T acc(0.0);
    for (int j = degree(); j >= 1; --j) acc = acc * s + T(coeffs_[j] * j);
    return acc + T(linear_);
  }

  int degree() const {
    int d = static_cast<int>(coeffs_.size()) - 1;
    while (d > 0 && coeffs_[d] == 0.0) --d;
    return d;
  }

 private:
  static double falling(int j, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= double(j - i);
    return r;
  }

  void resolve_bounds() {
    const int d = degree();
    const bool even_lead = d >= 2 && d % 2 == 0 && coeffs_[d] > 0.0;
    if (d == 0 && linear_ == 0.0) {
      infimum_ = coeffs_[0];
      lower_bound_ = std::max(0.0, -infimum_);
      return;
    }
    if (!even_lead) {
      lower_bound_ = std::numeric_limits<double>::infinity();
      infimum_ = -std::numeric_limits<double>::infinity();
      return;
    }
    // Minimum over a grid wide enough to contain all critical points, then polish.
    double radius = 1.0;
    for (int j = 0; j < d; ++j) radius = std::max(radius, 1.0 + std::abs((j == 1 ? coeffs_[j] + linear_ : coeffs_[j]) / coeffs_[d]));
    radius += std::abs(shift_);
    const int samples = 20001;
    double best_t = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      const double t = -radius + 2.0 * radius * i / (samples - 1);
      const double v = value(t);
      if (v < best) best = v, best_t = t;
    }
    const double h = 2.0 * radius / (samples - 1);
    double lo = best_t - h, hi = best_t + h;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (value(a) < value(b)) hi = b; else lo = a;
    }
    best = std::min(best, value(0.5 * (lo + hi)));
    // a hair of slack so roundoff never makes the declared bound false
    infimum_ = best < 0.0 ? best - 1e-12 * (1.0 + std::abs(best)) : best;
    lower_bound_ = std::max(0.0, -infimum_);
  }

  PotentialKind kind_ = PotentialKind::toda;
  std::vector<double> coeffs_;
  double shift_ = 0.0;
  double linear_ = 0.0;
  double lower_bound_ = 0.0;
  double infimum_ = 0.0;
  std::map<std::string, double> params_;
};

}  // namespace latticectl
