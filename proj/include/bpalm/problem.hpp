#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "bpalm/core.hpp"
#include "bpalm/special.hpp"

namespace bpalm {

using Triplet = Eigen::Triplet<double>;

/// Upper estimate of the spectral norm of a sparse matrix by power iteration
/// on AᵀA. The Rayleigh quotient never overshoots, so the converged value is
/// inflated by a relative 1e−9 to stay on the safe side of the true norm.
inline double spectral_norm_bound(const SparseMatrix& a, int max_iters = 2000) {
  if (a.rows() == 0 || a.cols() == 0 || a.nonZeros() == 0) return 0.0;
  Vector v(a.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) break;
    const double next = std::sqrt(v.dot(w));
    v = w / norm;
    if (std::abs(next - estimate) <= 1e-14 * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  // One more Rayleigh step with the final vector.
  estimate = std::max(estimate, (a * v).norm());
  return estimate * (1.0 + 1e-9);
}

/// Affine map x ↦ Ax − b with a cached operator-norm bound.
struct AffineMap {
  SparseMatrix A;
  Vector b;
  double op_norm_bound = 0.0;

  /// Builds A from triplets; duplicate entries are summed.
  static AffineMap from_triplets(Index rows, Index cols, const std::vector<Triplet>& triplets,
                                 Vector rhs) {
    require_dimension(rhs.size(), rows, "constraint right-hand side");
    for (const auto& t : triplets) {
      if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols) {
        throw std::out_of_range("constraint triplet (" + std::to_string(t.row()) + ", " +
                                std::to_string(t.col()) + ") outside " + std::to_string(rows) +
                                "x" + std::to_string(cols));
      }
    }
    AffineMap map;
    map.A.resize(rows, cols);
    map.A.setFromTriplets(triplets.begin(), triplets.end());
    map.A.makeCompressed();
    map.b = std::move(rhs);
    map.op_norm_bound = spectral_norm_bound(map.A);
    return map;
  }

  static AffineMap from_dense(const Matrix& dense, Vector rhs) {
    std::vector<Triplet> triplets;
    for (Index j = 0; j < dense.cols(); ++j) {
      for (Index i = 0; i < dense.rows(); ++i) {
        if (dense(i, j) != 0.0) triplets.emplace_back(i, j, dense(i, j));
      }
    }
    return from_triplets(dense.rows(), dense.cols(), triplets, std::move(rhs));
  }

  Index rows() const { return A.rows(); }
  Index cols() const { return A.cols(); }
  Vector residual(const Vector& x) const { return A * x - b; }
};

enum class SmoothKind { quadratic, callback };

/// Smooth part f of the composite objective.
///
/// The quadratic variant is ½xᵀWx + cᵀx, optionally restricted to a box
/// [l, u]. The box makes f extended-valued; it is the domain the box-barrier
/// geometry has to reproduce.
struct SmoothObjective {
  SmoothKind kind = SmoothKind::quadratic;
  std::string name = "quadratic";
  Index n = 0;

  SparseMatrix W;
  Vector c;
  std::optional<std::pair<Vector, Vector>> box;

  std::function<double(const Vector&)> value_fn;
  std::function<Vector(const Vector&)> grad_fn;
  std::function<Matrix(const Vector&)> hess_fn;
  std::function<bool(const Vector&)> interior_fn;
  std::function<double(const Vector&)> conjugate_fn;

  double qsc_modulus = 0.0;
  std::optional<double> lipschitz_modulus;
  std::optional<double> sc_modulus;

  static SmoothObjective quadratic(SparseMatrix w, Vector lin) {
    require_dimension(w.rows(), lin.size(), "quadratic W rows");
    require_dimension(w.cols(), lin.size(), "quadratic W cols");
    const Matrix dense(w);
    if ((dense - dense.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + dense.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("quadratic W is not symmetric");
    }
    SmoothObjective f;
    f.kind = SmoothKind::quadratic;
    f.n = lin.size();
    f.W = std::move(w);
    f.W.makeCompressed();
    f.c = std::move(lin);
    double top = 0.0;
    if (f.n > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(f.W), Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-10 * (1.0 + eig.eigenvalues().cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("quadratic W is not positive semidefinite");
      }
      top = std::max(0.0, eig.eigenvalues().maxCoeff());
    }
    f.qsc_modulus = 0.0;
    f.lipschitz_modulus = top;
    f.sc_modulus = 0.0;
    return f;
  }

  static SmoothObjective quadratic(const Matrix& w, Vector lin) {
    return quadratic(SparseMatrix(w.sparseView()), std::move(lin));
  }

  /// Same quadratic restricted to the box [lower, upper].
  static SmoothObjective box_quadratic(SparseMatrix w, Vector lin, Vector lower, Vector upper) {
    SmoothObjective f = quadratic(std::move(w), std::move(lin));
    require_dimension(lower.size(), f.n, "box lower bound");
    require_dimension(upper.size(), f.n, "box upper bound");
    for (Index i = 0; i < f.n; ++i) {
      if (!(lower[i] < upper[i])) throw std::invalid_argument("box bounds must satisfy l < u");
    }
    f.box = std::make_pair(std::move(lower), std::move(upper));
    return f;
  }

  /// f(x) = log Σ exp(xᵢ) + cᵀx. Quasi-self-concordant with constant 2 and
  /// 1-smooth.
  static SmoothObjective logsumexp(Vector lin) {
    SmoothObjective f;
    f.kind = SmoothKind::callback;
    f.name = "logsumexp";
    f.n = lin.size();
    f.c = lin;
    f.value_fn = [lin](const Vector& x) { return special::log_sum_exp(x) + lin.dot(x); };
    f.grad_fn = [lin](const Vector& x) -> Vector { return special::softmax(x) + lin; };
    f.hess_fn = [](const Vector& x) -> Matrix {
      const Vector s = special::softmax(x);
      Matrix h = -s * s.transpose();
      h.diagonal() += s;
      return h;
    };
    f.conjugate_fn = [lin](const Vector& v) {
      const Vector p = v - lin;
      if ((p.array() < -1e-12).any() || std::abs(p.sum() - 1.0) > 1e-10) return kInfinity;
      double total = 0.0;
      for (Index i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) total += p[i] * std::log(p[i]);
      }
      return total;
    };
    f.qsc_modulus = 2.0;
    f.lipschitz_modulus = 1.0;
    return f;
  }

  /// f(x) = Σ softplus(xᵢ) + cᵀx. Quasi-self-concordant with constant 1 and
  /// ¼-smooth.
  static SmoothObjective softplus_sum(Vector lin) {
    SmoothObjective f;
    f.kind = SmoothKind::callback;
    f.name = "softplus_sum";
    f.n = lin.size();
    f.c = lin;
    f.value_fn = [lin](const Vector& x) {
      double total = lin.dot(x);
      for (Index i = 0; i < x.size(); ++i) total += special::softplus(x[i]);
      return total;
    };
    f.grad_fn = [lin](const Vector& x) -> Vector {
      Vector g = lin;
      for (Index i = 0; i < x.size(); ++i) g[i] += special::sigmoid(x[i]);
      return g;
    };
    f.hess_fn = [](const Vector& x) -> Matrix {
      Vector d(x.size());
      for (Index i = 0; i < x.size(); ++i) {
        const double p = special::sigmoid(x[i]);
        d[i] = p * (1.0 - p);
      }
      return d.asDiagonal();
    };
    f.conjugate_fn = [lin](const Vector& v) {
      const Vector p = v - lin;
      double total = 0.0;
      for (Index i = 0; i < p.size(); ++i) {
        if (p[i] < -1e-12 || p[i] > 1.0 + 1e-12) return kInfinity;
        const double a = std::clamp(p[i], 0.0, 1.0);
        if (a > 0.0) total += a * std::log(a);
        if (a < 1.0) total += (1.0 - a) * std::log1p(-a);
      }
      return total;
    };
    f.qsc_modulus = 1.0;
    f.lipschitz_modulus = 0.25;
    return f;
  }

  bool has_box() const { return box.has_value(); }

  bool in_domain(const Vector& x) const {
    if (x.size() != n || !x.allFinite()) return false;
    if (box) {
      return (x.array() >= box->first.array()).all() && (x.array() <= box->second.array()).all();
    }
    return true;
  }

  bool in_domain_interior(const Vector& x) const {
    if (x.size() != n || !x.allFinite()) return false;
    if (box) {
      return (x.array() > box->first.array()).all() && (x.array() < box->second.array()).all();
    }
    if (interior_fn) return interior_fn(x);
    return true;
  }

  double value(const Vector& x) const {
    if (!in_domain(x)) return kInfinity;
    if (kind == SmoothKind::quadratic) return 0.5 * x.dot(W * x) + c.dot(x);
    return value_fn(x);
  }

  /// Gradient of the smooth part; for boxed quadratics this is the gradient
  /// of the quadratic alone (defined on the closed box).
  Vector grad(const Vector& x) const {
    if (!in_domain(x)) throw DomainError("objective gradient outside dom f");
    if (kind == SmoothKind::quadratic) return W * x + c;
    return grad_fn(x);
  }

  Matrix hess(const Vector& x) const {
    if (!in_domain(x)) throw DomainError("objective Hessian outside dom f");
    if (kind == SmoothKind::quadratic) return Matrix(W);
    return hess_fn(x);
  }

  /// f*(v). Quadratics need a positive-definite W and no box.
  double conjugate(const Vector& v) const {
    require_dimension(v.size(), n, "objective conjugate");
    if (kind == SmoothKind::quadratic) {
      if (box) throw UnsupportedError("conjugate of a box-restricted quadratic");
      Eigen::LLT<Matrix> llt{Matrix(W)};
      if (llt.info() != Eigen::Success) {
        throw UnsupportedError("conjugate of a quadratic with singular W");
      }
      const Vector shifted = v - c;
      return 0.5 * shifted.dot(llt.solve(shifted));
    }
    if (!conjugate_fn) throw UnsupportedError("objective '" + name + "' has no conjugate evaluator");
    return conjugate_fn(v);
  }
};

enum class NonsmoothKind { zero, nonpositive, vecmax, one_norm };

inline const char* to_string(NonsmoothKind kind) {
  switch (kind) {
    case NonsmoothKind::zero: return "zero";
    case NonsmoothKind::nonpositive: return "nonpositive";
    case NonsmoothKind::vecmax: return "vecmax";
    case NonsmoothKind::one_norm: return "one_norm";
  }
  return "unknown";
}

/// Nonsmooth part g and its conjugate g*.
///   zero:        g = indicator of {0},      g* = 0
///   nonpositive: g = indicator of −R₊ᵐ,     g* = indicator of R₊ᵐ
///   vecmax:      g = max_i rᵢ,              g* = indicator of the unit simplex
///   one_norm:    g = ‖r‖₁,                  g* = indicator of the ∞-norm unit ball
struct NonsmoothTerm {
  NonsmoothKind kind = NonsmoothKind::zero;
  static constexpr double kMembershipTol = 1e-12;

  double value(const Vector& r) const {
    switch (kind) {
      case NonsmoothKind::zero:
        return (r.size() == 0 || r.cwiseAbs().maxCoeff() <= kMembershipTol) ? 0.0 : kInfinity;
      case NonsmoothKind::nonpositive:
        return (r.size() == 0 || r.maxCoeff() <= kMembershipTol) ? 0.0 : kInfinity;
      case NonsmoothKind::vecmax: return r.size() == 0 ? -kInfinity : r.maxCoeff();
      case NonsmoothKind::one_norm: return r.lpNorm<1>();
    }
    return kInfinity;
  }

  bool in_conjugate_domain(const Vector& y) const {
    if (!y.allFinite()) return false;
    switch (kind) {
      case NonsmoothKind::zero: return true;
      case NonsmoothKind::nonpositive: return y.size() == 0 || y.minCoeff() >= -kMembershipTol;
      case NonsmoothKind::vecmax:
        return y.size() > 0 && y.minCoeff() >= -kMembershipTol &&
               std::abs(y.sum() - 1.0) <= kMembershipTol * std::max<double>(1.0, static_cast<double>(y.size()));
      case NonsmoothKind::one_norm: return y.size() == 0 || y.cwiseAbs().maxCoeff() <= 1.0 + kMembershipTol;
    }
    return false;
  }

  double conjugate(const Vector& y) const { return in_conjugate_domain(y) ? 0.0 : kInfinity; }
};

/// Euclidean projection onto the unit simplex.
inline Vector project_simplex(const Vector& y) {
  const Index m = y.size();
  Vector sorted = y;
  std::sort(sorted.data(), sorted.data() + m, std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index i = 0; i < m; ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  return (y.array() - theta).max(0.0).matrix();
}

/// min f(x) + g(Ax − b).
struct ProblemSpec {
  SmoothObjective f;
  NonsmoothTerm g;
  AffineMap map;

  Index n() const { return f.n; }
  Index m() const { return map.rows(); }

  void validate() const {
    require_dimension(map.cols(), f.n, "constraint matrix columns");
    require_dimension(map.b.size(), map.rows(), "constraint right-hand side");
    if (g.kind == NonsmoothKind::vecmax && map.rows() == 0) {
      throw std::invalid_argument("vecmax term needs at least one row");
    }
  }
};

struct KktResiduals {
  double dual_res = 0.0;
  double primal_res = 0.0;
  double compl_res = 0.0;

  double max() const { return std::max({dual_res, primal_res, compl_res}); }
};

/// L(x, y) = f(x) + ⟨Ax − b, y⟩ − g*(y).
inline double lagrangian(const ProblemSpec& ps, const Vector& x, const Vector& y) {
  require_dimension(x.size(), ps.n(), "Lagrangian x");
  require_dimension(y.size(), ps.m(), "Lagrangian y");
  const double fx = ps.f.value(x);
  if (fx == kInfinity) return kInfinity;
  if (!ps.g.in_conjugate_domain(y)) return -kInfinity;
  return fx + ps.map.residual(x).dot(y);
}

/// Residuals of the KKT system at (x, y). With a box in f the stationarity
/// residual is the natural map x − Π_box(x − ∇ₓL), so boundary solutions
/// score zero.
inline KktResiduals kkt_residuals(const ProblemSpec& ps, const Vector& x, const Vector& y) {
  require_dimension(x.size(), ps.n(), "KKT x");
  require_dimension(y.size(), ps.m(), "KKT y");
  if (!ps.f.in_domain(x)) throw DomainError("KKT residuals: x outside dom f");
  if (!y.allFinite()) throw DomainError("KKT residuals: non-finite multiplier");

  KktResiduals res;
  const Vector grad_l = ps.f.grad(x) + ps.map.A.transpose() * y;
  if (ps.f.box) {
    const Vector stepped = (x - grad_l).cwiseMax(ps.f.box->first).cwiseMin(ps.f.box->second);
    res.dual_res = (x - stepped).norm();
  } else {
    res.dual_res = grad_l.norm();
  }

  const Vector r = ps.map.residual(x);
  switch (ps.g.kind) {
    case NonsmoothKind::zero:
      res.primal_res = r.norm();
      break;
    case NonsmoothKind::nonpositive:
      res.primal_res = r.cwiseMax(0.0).norm();
      res.compl_res = std::abs(y.dot(r));
      break;
    case NonsmoothKind::vecmax: {
      const double dist = (y - project_simplex(y)).norm();
      res.primal_res = dist + std::max(0.0, r.maxCoeff() - y.dot(r));
      break;
    }
    case NonsmoothKind::one_norm: {
      const Vector selected = (y + r).cwiseMax(-1.0).cwiseMin(1.0);
      res.primal_res = (y - selected).norm();
      break;
    }
  }
  return res;
}

/// F*(v, y) = f*(v − Aᵀy) + ⟨b, y⟩ + g*(y).
inline double dual_perturbation_value(const ProblemSpec& ps, const Vector& v, const Vector& y) {
  require_dimension(v.size(), ps.n(), "dual perturbation v");
  require_dimension(y.size(), ps.m(), "dual perturbation y");
  const double gy = ps.g.conjugate(y);
  if (gy == kInfinity) return kInfinity;
  const Vector shifted = v - ps.map.A.transpose() * y;
  return ps.f.conjugate(shifted) + ps.map.b.dot(y) + gy;
}

}  // namespace bpalm
