#pragma once

#include "latticectl/multidual.hpp"
#include "latticectl/system.hpp"
#include "latticectl/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace latticectl {

// ---------------------------------------------------------------------------
// Finite-difference brackets (double precision fields)

struct VectorFieldHandle {
  std::string label;
  std::function<TangentVector(const State&)> eval;

  TangentVector operator()(const State& x) const { return eval(x); }
};

inline VectorFieldHandle drift_field(const LatticeSystem& sys) {
  return {"f", [sys](const State& x) { return drift(x, sys); }};
}

inline VectorFieldHandle constant_field(std::string label, TangentVector v) {
  return {std::move(label), [v = std::move(v)](const State&) { return v; }};
}

inline VectorFieldHandle control_field_handle(int site, const LatticeSystem& sys) {
  return constant_field(site == 1 ? "g" : "g" + std::to_string(site), control_field(site, sys));
}

inline double default_bracket_step(const State& x) { return 3e-4 * (1.0 + x.flat().norm()); }

namespace detail {

/// Central-difference estimate of DY(x) v.
inline TangentVector directional_fd(const VectorFieldHandle& y, const State& x, const TangentVector& v, double h) {
  const double nv = v.norm();
  if (nv == 0.0) return TangentVector::Zero(v.size());
  const TangentVector dir = v / nv;
  State plus = x, minus = x;
  plus += h * dir;
  minus += -h * dir;
  TangentVector d = (y(plus) - y(minus)) * (nv / (2.0 * h));
  if (!d.allFinite()) throw NumericalError("non-finite field value in bracket difference");
  return d;
}

}  // namespace detail

/// [X, Y](x) = DY X - DX Y by central differences, O(h^2).
inline TangentVector numeric_bracket(const VectorFieldHandle& x_field, const VectorFieldHandle& y_field,
                                     const State& x, double h) {
  if (!(h > 0.0)) throw ContractError("numeric_bracket needs h > 0");
  const TangentVector xv = x_field(x), yv = y_field(x);
  return detail::directional_fd(y_field, x, xv, h) - detail::directional_fd(x_field, x, yv, h);
}

/// The bracket as a field, re-differenced at each evaluation point.
inline VectorFieldHandle numeric_bracket_field(VectorFieldHandle a, VectorFieldHandle b) {
  std::string label = "[" + a.label + "," + b.label + "]";
  return {std::move(label), [a = std::move(a), b = std::move(b)](const State& x) {
            return numeric_bracket(a, b, x, default_bracket_step(x));
          }};
}

// ---------------------------------------------------------------------------
// Exact brackets by nested multi-dual directional derivatives

using DualVector = std::vector<MultiDual>;

struct DualField {
  std::string label;
  std::function<DualVector(const DualVector&)> eval;
  int depth = 0;  // bracket nesting

  DualVector operator()(const DualVector& x) const { return eval(x); }
};

inline int dual_order(const DualVector& x) {
  int m = 0;
  for (const auto& c : x) m = std::max(m, c.order());
  return m;
}

inline DualField dual_drift(const LatticeSystem& sys) {
  return {"f", [sys](const DualVector& x) { return sys.drift<MultiDual>(std::span<const MultiDual>(x)); }, 0};
}

inline DualField dual_constant(std::string label, const TangentVector& v) {
  DualVector c(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) c[i] = MultiDual(v[i]);
  return {std::move(label), [c](const DualVector&) { return c; }, 0};
}

/// [X, Y] = DY X - DX Y, each directional derivative taken along a fresh unit.
inline DualField dual_bracket(DualField a, DualField b, std::string label = {}) {
  if (label.empty()) label = "[" + a.label + "," + b.label + "]";
  const int depth = std::max(a.depth, b.depth) + 1;
  auto eval = [a, b](const DualVector& x) {
    const int unit = dual_order(x);
    const DualVector av = a(x), bv = b(x);
    DualVector xa = x, xb = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xa[i] += MultiDual::unit(unit) * av[i];
      xb[i] += MultiDual::unit(unit) * bv[i];
    }
    const DualVector db = b(xa), da = a(xb);
    DualVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = db[i].part(unit) - da[i].part(unit);
    return out;
  };
  return {std::move(label), std::move(eval), depth};
}

inline TangentVector evaluate(const DualField& field, const State& x) {
  const Vector flat = x.flat();
  DualVector in(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) in[i] = MultiDual(flat[i]);
  const DualVector out = field(in);
  TangentVector v(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) v[i] = out[i].value();
  return v;
}

// ---------------------------------------------------------------------------
// Closed-form brackets of the single-forced periodic system

struct BracketFamily {
  TangentVector ad_f_g;         // [f, g] = -d/dq_1
  TangentVector ad2_f_g;        // [f, [f, g]]
  TangentVector ad2_f_g_ad_f_g; // [[f, [f, g]], [f, g]]
};

inline BracketFamily closed_form_bracket_family(const State& x, const LatticeSystem& sys) {
  sys.check(x);
  if (!sys.periodic() || sys.control_sites() != std::vector<int>{1})
    throw ContractError("closed-form brackets need the periodic system forced at site 1");
  const int n = sys.n();
  const auto& pot = sys.potential();
  const double a = x.q[0] - x.q[1];
  const double d = x.q[n - 1] - x.q[0];
  BracketFamily fam;
  fam.ad_f_g = TangentVector::Zero(2 * n);
  fam.ad_f_g[0] = -1.0;
  auto combo = [&](double ca, double cd) {
    TangentVector v = TangentVector::Zero(2 * n);
    v[n + 1] += ca;
    v[n + 0] -= ca;
    v[n + n - 1] += cd;
    v[n + 0] -= cd;
    return v;
  };
  fam.ad2_f_g = combo(pot.dphi(a), pot.dphi(d));
  fam.ad2_f_g_ad_f_g = combo(pot.ddphi(a), -pot.ddphi(d));
  return fam;
}

/// -phi'(a) phi''(d) - phi'(d) phi''(a) for bonds a = q1 - q2, d = qn - q1.
inline double genericity_determinant(const Potential& pot, double a, double d) {
  return -pot.dphi(a) * pot.ddphi(d) - pot.dphi(d) * pot.ddphi(a);
}

// ---------------------------------------------------------------------------
// Inductive chain on the zero-momentum hyperplane

struct LabeledVector {
  std::string label;
  TangentVector value;
};

/// f, g, [f,g], then Y^2 = dp2 - dp1, Y^n = dpn - dp1 and their repeated
/// brackets with f: Z = [Y, f], [Z, f], ... up to `depth` rounds.
inline std::vector<LabeledVector> spanning_chain(const State& x, const LatticeSystem& sys, int depth) {
  sys.check(x);
  if (depth < 1) throw ContractError("spanning_chain needs depth >= 1");
  const int n = sys.n();
  const int site = sys.control_sites().front();
  std::vector<LabeledVector> out;
  const DualField f = dual_drift(sys);
  const DualField g = dual_constant("g", control_field(site, sys));
  out.push_back({"f", drift(x, sys)});
  out.push_back({"g", control_field(site, sys)});
  out.push_back({"[f,g]", evaluate(dual_bracket(f, g), x)});

  TangentVector y2 = TangentVector::Zero(2 * n), yn = TangentVector::Zero(2 * n);
  y2[n + 1] = 1.0, y2[n] = -1.0;
  yn[n + n - 1] = 1.0, yn[n] = -1.0;
  std::vector<DualField> front{dual_constant("Y2", y2), dual_constant("Y" + std::to_string(n), yn)};
  out.push_back({front[0].label, y2});
  out.push_back({front[1].label, yn});
  for (int level = 1; level <= depth; ++level) {
    for (auto& fld : front) {
      const std::string base = fld.label;
      fld = dual_bracket(fld, f, level == 1 ? (base == "Y2" ? "Z2" : "Z" + std::to_string(n)) : "");
      out.push_back({fld.label, evaluate(fld, x)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Accessibility rank

struct RankReport {
  State point;
  std::vector<std::string> family;
  std::vector<double> singular_values;  // descending
  int rank = 0;
  int rank_with_drift = 0;
  double tolerance = 1e-8;
};

namespace detail {

inline std::vector<double> normalized_singular_values(const std::vector<TangentVector>& cols, int dim) {
  double biggest = 0.0;
  for (const auto& c : cols) biggest = std::max(biggest, c.norm());
  std::vector<TangentVector> kept;
  for (const auto& c : cols)
    if (c.norm() > 1e-10 * biggest && c.norm() > 0.0) kept.push_back(c / c.norm());
  if (kept.empty()) return {};
  Matrix m(dim, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = kept[j];
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

inline int threshold_rank(const std::vector<double>& s, double tol) {
  if (s.empty() || s.front() == 0.0) return 0;
  return static_cast<int>(std::count_if(s.begin(), s.end(), [&](double v) { return v > tol * s.front(); }));
}

}  // namespace detail

/// Rank of the ideal generated by the control fields in Lie{f, g}, assembled
/// from ad_f^k g and ad_f^k [ad_f^2 g, ad_f g] up to bracket nesting `depth`
/// (default 2n). The rank including f itself is reported alongside.
inline RankReport lie_rank(const State& x, const LatticeSystem& sys, int depth = 0, double tol = 1e-8) {
  sys.check(x);
  const int dim = sys.dim();
  if (depth <= 0) depth = dim;
  RankReport rep;
  rep.point = x;
  rep.tolerance = tol;

  const DualField f = dual_drift(sys);
  std::vector<TangentVector> cols;
  auto add = [&](const DualField& fld) {
    cols.push_back(evaluate(fld, x));
    rep.family.push_back(fld.label);
    rep.singular_values = detail::normalized_singular_values(cols, dim);
    rep.rank = detail::threshold_rank(rep.singular_values, tol);
    return rep.rank == dim;
  };

  bool full = false;
  for (int site : sys.control_sites()) {
    std::vector<DualField> chain{dual_constant(site == 1 ? "g" : "g" + std::to_string(site), control_field(site, sys))};
    full = add(chain[0]);
    for (int k = 1; k <= depth && !full; ++k) {
      chain.push_back(dual_bracket(f, chain.back(), k == 1 ? "ad f " + chain[0].label : "ad^" + std::to_string(k) + " f " + chain[0].label));
      full = add(chain.back());
      if (k == 2 && !full && depth >= 3) {
        // the mixed bracket carries the directions missed by ad_f^k g alone
        DualField w = dual_bracket(chain[2], chain[1], "[" + chain[2].label + "," + chain[1].label + "]");
        std::vector<DualField> wchain{w};
        full = add(w);
        for (int j = 1; w.depth + j <= depth && !full; ++j) {
          wchain.push_back(dual_bracket(f, wchain.back(), "ad^" + std::to_string(j) + " f " + w.label));
          full = add(wchain.back());
        }
      }
    }
    if (full) break;
  }

  std::vector<TangentVector> with_drift = cols;
  with_drift.push_back(drift(x, sys));
  rep.rank_with_drift = detail::threshold_rank(detail::normalized_singular_values(with_drift, dim), tol);
  return rep;
}

// ---------------------------------------------------------------------------
// Linear oracle

/// Rank of [B, AB, ..., A^{2n-1}B] for the linear drift of an affine-force potential.
inline int kalman_rank(const LatticeSystem& sys, int site) {
  const auto& pot = sys.potential();
  if (!pot.linear_force()) throw ContractError("kalman_rank needs an affine force (polynomial Phi of degree <= 2)");
  if (!sys.config().has_site(site)) throw ContractError("kalman_rank: site is not a control site");
  const int n = sys.n();
  const double k = pot.stiffness();
  Matrix lap = Matrix::Zero(n, n);  // dp/dq
  for (int j = 0; j < sys.config().bonds(); ++j) {
    const int i1 = j, i2 = (j + 1) % n;
    lap(i1, i1) -= k;
    lap(i1, i2) += k;
    lap(i2, i1) += k;
    lap(i2, i2) -= k;
  }
  Matrix a = Matrix::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = lap;
  Vector b = Vector::Zero(2 * n);
  b[n + site - 1] = 1.0;
  std::vector<TangentVector> cols;
  for (int j = 0; j < 2 * n; ++j) {
    cols.push_back(b);
    b = a * b;
  }
  return detail::threshold_rank(detail::normalized_singular_values(cols, 2 * n), 1e-9);
}

// ---------------------------------------------------------------------------
// Degeneracy of phi'

enum class Degeneracy { generic, even_shift, odd_shift };

inline std::string to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::generic: return "generic";
    case Degeneracy::even_shift: return "even-shift";
    case Degeneracy::odd_shift: return "odd-shift";
  }
  return "?";
}

struct DegeneracyReport {
  Degeneracy classification = Degeneracy::generic;
  double shift = 0.0;     // b
  int sign = 1;           // c
  double residual = 0.0;  // best fit residual (relative)
  double even_residual = 0.0;
  double odd_residual = 0.0;
};

struct ScanGrid {
  double lo = -5.0;
  double hi = 5.0;
  int points = 201;
};

/// Relative mismatch of phi'(s) against c phi'(2b - s) over the grid.
inline double symmetry_residual(const Potential& pot, double b, int c, const ScanGrid& grid) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < grid.points; ++i) {
    const double s = grid.lo + (grid.hi - grid.lo) * i / (grid.points - 1);
    const double l = pot.dphi(s), r = pot.dphi(2.0 * b - s);
    num += (l - c * r) * (l - c * r);
    den += l * l + r * r;
  }
  if (den == 0.0) return 0.0;
  return std::sqrt(num / den);
}

/// Searches a centre b in [-10, 10] and c = +-1 with phi'(b + t) = c phi'(b - t).
inline DegeneracyReport degeneracy_scan(const Potential& pot, const ScanGrid& grid = {}) {
  if (grid.hi - grid.lo < 10.0 - 1e-12 || grid.lo > -5.0 || grid.hi < 5.0 || grid.points < 201)
    throw ContractError("degeneracy_scan grid must cover [-5, 5] with at least 201 points");
  constexpr double kSpan = 10.0;
  constexpr int kCoarse = 801;
  constexpr double kThreshold = 1e-8;
  DegeneracyReport rep;
  auto best_for = [&](int c) {
    std::vector<double> bs(kCoarse), rs(kCoarse);
    double rmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kCoarse; ++i) {
      bs[i] = -kSpan + 2.0 * kSpan * i / (kCoarse - 1);
      rs[i] = symmetry_residual(pot, bs[i], c, grid);
      rmin = std::min(rmin, rs[i]);
    }
    // ties: prefer the smallest |b|
    int pick = -1;
    for (int i = 0; i < kCoarse; ++i)
      if (rs[i] <= rmin + 1e-14 && (pick < 0 || std::abs(bs[i]) < std::abs(bs[pick]))) pick = i;
    double b = bs[pick], r = rs[pick];
    if (r > 1e-14) {
      const double h = 2.0 * kSpan / (kCoarse - 1);
      double lo = std::max(-kSpan, b - h), hi = std::min(kSpan, b + h);
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = symmetry_residual(pot, x1, c, grid), f2 = symmetry_residual(pot, x2, c, grid);
      for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
          hi = x2, x2 = x1, f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = symmetry_residual(pot, x1, c, grid);
        } else {
          lo = x1, x1 = x2, f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = symmetry_residual(pot, x2, c, grid);
        }
      }
      const double bm = 0.5 * (lo + hi), rm = symmetry_residual(pot, bm, c, grid);
      if (rm < r) b = bm, r = rm;
    }
    return std::pair{b, r};
  };
  const auto [be, re] = best_for(+1);
  const auto [bo, ro] = best_for(-1);
  rep.even_residual = re;
  rep.odd_residual = ro;
  if (re <= ro) {
    rep.shift = be, rep.sign = 1, rep.residual = re;
  } else {
    rep.shift = bo, rep.sign = -1, rep.residual = ro;
  }
  if (rep.residual < kThreshold)
    rep.classification = rep.sign > 0 ? Degeneracy::even_shift : Degeneracy::odd_shift;
  return rep;
}

}  // namespace latticectl
