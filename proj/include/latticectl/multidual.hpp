#pragma once

// Numbers of the form sum_S c_S e_S over subsets S of {e_0, ..., e_{k-1}} with
// e_i^2 = 0. Evaluating a field at x + e_k v yields its exact directional
// derivative in the e_k coefficient, and nesting one new unit per Lie bracket
// gives brackets of any depth without finite-difference noise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace latticectl {

class MultiDual {
 public:
  MultiDual() : c_(1, 0.0) {}
  MultiDual(double v) : c_(1, v) {}  // NOLINT(google-explicit-constructor)

  /// v + e_unit (a seed variable along a fresh infinitesimal).
  static MultiDual unit(int unit, double scale = 1.0) {
    MultiDual r;
    r.c_.assign(std::size_t{1} << (unit + 1), 0.0);
    r.c_[std::size_t{1} << unit] = scale;
    return r;
  }

  double value() const { return c_[0]; }
  int order() const {
    int k = 0;
    while ((std::size_t{1} << k) < c_.size()) ++k;
    return k;
  }
  std::size_t size() const { return c_.size(); }
  double coeff(std::size_t mask) const { return mask < c_.size() ? c_[mask] : 0.0; }

  /// Coefficient of e_unit, as a number over the remaining units below it.
  MultiDual part(int unit) const {
    MultiDual r;
    const std::size_t bit = std::size_t{1} << unit;
    if (c_.size() <= bit) return r;
    r.c_.assign(bit, 0.0);
    for (std::size_t a = 0; a < bit; ++a) r.c_[a] = c_[a | bit];
    r.trim();
    return r;
  }

  MultiDual& operator+=(const MultiDual& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  MultiDual& operator-=(const MultiDual& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  MultiDual& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }

  friend MultiDual operator+(MultiDual a, const MultiDual& b) { return a += b; }
  friend MultiDual operator-(MultiDual a, const MultiDual& b) { return a -= b; }
  friend MultiDual operator-(MultiDual a) {
    for (double& v : a.c_) v = -v;
    return a;
  }
  friend MultiDual operator*(MultiDual a, double s) { return a *= s; }
  friend MultiDual operator*(double s, MultiDual a) { return a *= s; }

  friend MultiDual operator*(const MultiDual& a, const MultiDual& b) {
    if (a.c_.size() == 1) return b * a.c_[0];
    if (b.c_.size() == 1) return a * b.c_[0];
    const std::size_t na = a.c_.size(), nb = b.c_.size();
    const std::size_t n = na > nb ? na : nb;
    MultiDual r;
    r.c_.assign(n, 0.0);
    const std::size_t full = n - 1;
    const std::size_t bmask = nb - 1;
    for (std::size_t ia = 0; ia < na; ++ia) {
      const double av = a.c_[ia];
      if (av == 0.0) continue;
      const std::size_t comp = full & ~ia & bmask;
      // all submasks of comp, including 0
      for (std::size_t ib = comp;; ib = (ib - 1) & comp) {
        const double bv = b.c_[ib];
        if (bv != 0.0) r.c_[ia | ib] += av * bv;
        if (ib == 0) break;
      }
    }
    return r;
  }
  MultiDual& operator*=(const MultiDual& o) { return *this = *this * o; }

  friend MultiDual exp(const MultiDual& x) {
    const double e0 = std::exp(x.c_[0]);
    if (x.c_.size() == 1) return MultiDual(e0);
    MultiDual nil = x;
    nil.c_[0] = 0.0;
    // nil^(k+1) = 0 for k = order, so the series is a finite Horner sum
    const int k = x.order();
    MultiDual s(1.0);
    for (int j = k; j >= 1; --j) {
      s = nil * s;
      s *= 1.0 / j;
      s.c_[0] += 1.0;
    }
    return s * e0;
  }

 private:
  void trim() {
    if (c_.empty()) c_.assign(1, 0.0);
  }

  std::vector<double> c_;
};

inline double value_of(double v) { return v; }
inline double value_of(const MultiDual& v) { return v.value(); }

using std::exp;

}  // namespace latticectl
