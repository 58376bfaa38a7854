#pragma once

// Reference solvers for tests and acceptance checks. They share no code path
// with the solver beyond the basic types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bpalm/core.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/problem.hpp"

namespace bpalm::oracle {

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScaleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QpSolution {
  Vector x;
  Vector y;
};

/// Solves [W Aᵀ; A 0](x, y) = (−c, b) with full pivoting.
inline QpSolution solve_equality_qp(const Matrix& W, const Vector& c, const Matrix& A, const Vector& b) {
  const Index n = W.rows();
  const Index m = A.rows();
  Matrix kkt = Matrix::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = W;
  kkt.topRightCorner(n, m) = A.transpose();
  kkt.bottomLeftCorner(m, n) = A;
  Vector rhs(n + m);
  rhs << -c, b;
  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw SingularSystemError("equality QP KKT matrix is singular");
  const Vector sol = lu.solve(rhs);
  return {sol.head(n), sol.tail(m)};
}

/// min ½xᵀWx + cᵀx  s.t.  l ≤ x ≤ u,  A_eq x = b_eq,  A_in x ≤ b_in.
struct EnumerationQp {
  Matrix W;
  Vector c;
  Vector lower;
  Vector upper;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;
};

struct EnumerationSolution {
  Vector x;
  Vector y_eq;
  Vector y_in;
  double objective = std::numeric_limits<double>::infinity();
};

/// Global solution by enumerating every box face (free, at lower, at upper)
/// and every subset of active inequality rows, solving the equality KKT
/// system of each, and keeping the best KKT point. Exponential; meant for
/// n ≤ 12 and a handful of inequality rows.
inline EnumerationSolution solve_qp_enumeration(const EnumerationQp& qp, double tol = 1e-9) {
  const Index n = qp.W.rows();
  const Index me = qp.A_eq.rows();
  const Index mi = qp.A_in.rows();
  if (n > 12) throw ScaleError("enumeration oracle limited to n <= 12");
  if (mi > 16) throw ScaleError("enumeration oracle limited to 16 inequality rows");
  Vector lower = qp.lower.size() ? qp.lower : Vector::Constant(n, -kInfinity);
  Vector upper = qp.upper.size() ? qp.upper : Vector::Constant(n, kInfinity);

  std::vector<std::vector<int>> options(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    options[static_cast<std::size_t>(i)].push_back(0);
    if (std::isfinite(lower[i])) options[static_cast<std::size_t>(i)].push_back(1);
    if (std::isfinite(upper[i])) options[static_cast<std::size_t>(i)].push_back(2);
  }

  EnumerationSolution best;
  std::vector<int> face(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> pick(static_cast<std::size_t>(n), 0);

  auto try_face = [&](unsigned long mask) {
    std::vector<Index> free_idx;
    Vector x = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      const int f = face[static_cast<std::size_t>(i)];
      if (f == 0) free_idx.push_back(i);
      else x[i] = f == 1 ? lower[i] : upper[i];
    }
    std::vector<Index> active;
    for (Index r = 0; r < mi; ++r) {
      if (mask & (1ul << r)) active.push_back(r);
    }
    const Index nf = static_cast<Index>(free_idx.size());
    const Index na = static_cast<Index>(active.size());
    const Index rows = me + na;
    Matrix C(rows, n);
    Vector d(rows);
    if (me) {
      C.topRows(me) = qp.A_eq;
      d.head(me) = qp.b_eq;
    }
    for (Index a = 0; a < na; ++a) {
      C.row(me + a) = qp.A_in.row(active[static_cast<std::size_t>(a)]);
      d[me + a] = qp.b_in[active[static_cast<std::size_t>(a)]];
    }
    // Unknowns (x_free, multipliers).
    Matrix K = Matrix::Zero(nf + rows, nf + rows);
    Vector rhs = Vector::Zero(nf + rows);
    const Vector fixed_grad = qp.W * x + qp.c;
    for (Index p = 0; p < nf; ++p) {
      const Index i = free_idx[static_cast<std::size_t>(p)];
      for (Index q = 0; q < nf; ++q) K(p, q) = qp.W(i, free_idx[static_cast<std::size_t>(q)]);
      for (Index r = 0; r < rows; ++r) K(p, nf + r) = C(r, i);
      rhs[p] = -fixed_grad[i];
    }
    const Vector fixed_row = C * x;
    for (Index r = 0; r < rows; ++r) {
      for (Index q = 0; q < nf; ++q) K(nf + r, q) = C(r, free_idx[static_cast<std::size_t>(q)]);
      rhs[nf + r] = d[r] - fixed_row[r];
    }
    Vector sol;
    if (K.size() > 0) {
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
      sol = cod.solve(rhs);
      if ((K * sol - rhs).norm() > tol * (1.0 + rhs.norm())) return;
    }
    for (Index p = 0; p < nf; ++p) x[free_idx[static_cast<std::size_t>(p)]] = sol[p];
    const Vector mult = sol.tail(rows);

    // Primal feasibility.
    for (Index i = 0; i < n; ++i) {
      if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return;
    }
    if (me && (qp.A_eq * x - qp.b_eq).norm() > tol * (1.0 + qp.b_eq.norm())) return;
    Vector y_in = Vector::Zero(mi);
    for (Index a = 0; a < na; ++a) y_in[active[static_cast<std::size_t>(a)]] = mult[me + a];
    if (mi) {
      const Vector slack = qp.A_in * x - qp.b_in;
      if (slack.maxCoeff() > tol * (1.0 + qp.b_in.cwiseAbs().maxCoeff())) return;
      if (y_in.minCoeff() < -tol) return;
    }
    // Dual feasibility of the box multipliers.
    Vector y_eq = me ? Vector(mult.head(me)) : Vector(0);
    Vector grad = qp.W * x + qp.c;
    if (me) grad += qp.A_eq.transpose() * y_eq;
    if (mi) grad += qp.A_in.transpose() * y_in;
    for (Index i = 0; i < n; ++i) {
      const int f = face[static_cast<std::size_t>(i)];
      const double scale = tol * (1.0 + grad.cwiseAbs().maxCoeff());
      if (f == 0 && std::abs(grad[i]) > 1e3 * scale) return;
      if (f == 1 && grad[i] < -scale) return;
      if (f == 2 && grad[i] > scale) return;
    }
    const double obj = 0.5 * x.dot(qp.W * x) + qp.c.dot(x);
    if (obj < best.objective - 1e-12 * (1.0 + std::abs(obj))) {
      best = {x, y_eq, y_in.cwiseMax(0.0), obj};
    }
  };

  const unsigned long subsets = 1ul << mi;
  while (true) {
    for (Index i = 0; i < n; ++i) {
      face[static_cast<std::size_t>(i)] = options[static_cast<std::size_t>(i)][pick[static_cast<std::size_t>(i)]];
    }
    for (unsigned long mask = 0; mask < subsets; ++mask) try_face(mask);
    Index pos = 0;
    while (pos < n) {
      auto& p = pick[static_cast<std::size_t>(pos)];
      if (++p < options[static_cast<std::size_t>(pos)].size()) break;
      p = 0;
      ++pos;
    }
    if (pos == n) break;
  }
  if (!std::isfinite(best.objective)) throw SingularSystemError("enumeration found no KKT point");
  return best;
}

/// Box-constrained QP with equality rows. Uses face enumeration for n ≤ 12;
/// without equality rows, projected gradient covers n ≤ 50.
inline QpSolution solve_box_qp_bruteforce(const Matrix& W, const Vector& c, const Vector& l,
                                          const Vector& u, const Matrix& A, const Vector& b) {
  const Index n = W.rows();
  if (n <= 12) {
    const auto sol = solve_qp_enumeration({W, c, l, u, A, b, Matrix(0, n), Vector(0)});
    return {sol.x, sol.y_eq};
  }
  if (A.rows() == 0 && n <= 50) {
    const double step = 1.0 / std::max(1e-12, Eigen::SelfAdjointEigenSolver<Matrix>(W).eigenvalues().maxCoeff());
    Vector x = (0.5 * (l + u)).cwiseMax(l).cwiseMin(u);
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(x[i])) x[i] = std::clamp(0.0, l[i], u[i]);
    }
    for (int it = 0; it < 1000000; ++it) {
      const Vector next = (x - step * (W * x + c)).cwiseMax(l).cwiseMin(u);
      const double moved = (next - x).norm();
      x = next;
      if (moved <= 1e-14 * (1.0 + x.norm())) break;
    }
    return {x, Vector(0)};
  }
  throw ScaleError("box QP oracle limited to n <= 12 (or n <= 50 without equality rows)");
}

/// min ½xᵀWx + cᵀx  s.t.  Ax ≤ b; y ≥ 0 are the row multipliers.
inline QpSolution solve_inequality_qp(const Matrix& W, const Vector& c, const Matrix& A, const Vector& b) {
  const Index n = W.rows();
  const auto sol = solve_qp_enumeration({W, c, Vector(), Vector(), Matrix(0, n), Vector(0), A, b});
  return {sol.x, sol.y_in};
}

/// min ½xᵀWx + cᵀx + max_i (Ax − b)_i through the epigraph variable t; the
/// multiplier lies on the simplex.
inline QpSolution solve_vecmax_qp(const Matrix& W, const Vector& c, const Matrix& A, const Vector& b) {
  const Index n = W.rows();
  const Index m = A.rows();
  Matrix W2 = Matrix::Zero(n + 1, n + 1);
  W2.topLeftCorner(n, n) = W;
  Vector c2(n + 1);
  c2 << c, 1.0;
  Matrix A2(m, n + 1);
  A2 << A, -Vector::Ones(m);
  const auto sol = solve_qp_enumeration({W2, c2, Vector(), Vector(), Matrix(0, n + 1), Vector(0), A2, b});
  return {sol.x.head(n), sol.y_in};
}

/// min ½xᵀWx + cᵀx + ‖Ax − b‖₁ through epigraph variables t ∈ Rᵐ; the
/// multiplier is the difference of the two row families.
inline QpSolution solve_l1_qp(const Matrix& W, const Vector& c, const Matrix& A, const Vector& b) {
  const Index n = W.rows();
  const Index m = A.rows();
  Matrix W2 = Matrix::Zero(n + m, n + m);
  W2.topLeftCorner(n, n) = W;
  Vector c2(n + m);
  c2 << c, Vector::Ones(m);
  Matrix A2(2 * m, n + m);
  A2 << A, -Matrix::Identity(m, m), -A, -Matrix::Identity(m, m);
  Vector b2(2 * m);
  b2 << b, -b;
  const auto sol = solve_qp_enumeration({W2, c2, Vector(), Vector(), Matrix(0, n + m), Vector(0), A2, b2});
  return {sol.x.head(n), sol.y_in.head(m) - sol.y_in.tail(m)};
}

/// sup_η ⟨u, η⟩ − φ(η) − σ·g*(η) by grid search with three rounds of 10×
/// zoom around the incumbent. m ≤ 2.
inline double penalty_bruteforce(NonsmoothKind g, LegendreKind dual, double sigma, const Vector& u,
                                 int grid = 201) {
  const Index m = u.size();
  if (m < 1 || m > 2) throw ScaleError("penalty brute force supports m in {1, 2}");
  const LegendreFunction phi = dual == LegendreKind::energy        ? LegendreFunction::energy(m)
                               : dual == LegendreKind::von_neumann ? LegendreFunction::von_neumann(m)
                               : dual == LegendreKind::spence      ? LegendreFunction::spence(m)
                                                                   : throw ScaleError("unsupported dual kind");
  const NonsmoothTerm term{g};

  // Objective on the search parameters. vecmax searches the simplex through
  // its first m − 1 coordinates.
  const bool simplex = g == NonsmoothKind::vecmax;
  const Index dims = simplex ? m - 1 : m;
  auto embed = [&](const Vector& p) {
    if (!simplex) return p;
    Vector eta(m);
    eta.head(m - 1) = p;
    eta[m - 1] = 1.0 - p.sum();
    return eta;
  };
  auto objective = [&](const Vector& p) {
    const Vector eta = embed(p);
    const double pen = term.conjugate(eta);
    if (pen == kInfinity) return -kInfinity;
    const double v = phi.value(eta);
    if (v == kInfinity) return -kInfinity;
    return u.dot(eta) - v - sigma * pen;
  };
  if (dims == 0) return objective(Vector(0));

  const double umax = u.cwiseAbs().maxCoeff();
  Vector lo(dims), hi(dims);
  for (Index i = 0; i < dims; ++i) {
    if (simplex || g == NonsmoothKind::one_norm) {
      lo[i] = simplex ? 0.0 : -1.0;
      hi[i] = 1.0;
    } else if (dual == LegendreKind::energy) {
      lo[i] = g == NonsmoothKind::nonpositive ? 0.0 : -(2.0 * umax + 2.0);
      hi[i] = 2.0 * umax + 2.0;
    } else {
      lo[i] = 0.0;
      hi[i] = 2.0 * std::exp(umax) + 2.0 * umax + 2.0;
    }
  }

  double best = -kInfinity;
  Vector best_p = 0.5 * (lo + hi);
  for (int round = 0; round < 4; ++round) {
    const Vector width = (hi - lo) / static_cast<double>(grid - 1);
    Vector p(dims);
    if (dims == 1) {
      for (int i = 0; i < grid; ++i) {
        p[0] = lo[0] + width[0] * i;
        const double v = objective(p);
        if (v > best) { best = v; best_p = p; }
      }
    } else {
      for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
          p << lo[0] + width[0] * i, lo[1] + width[1] * j;
          const double v = objective(p);
          if (v > best) { best = v; best_p = p; }
        }
      }
    }
    // Zoom: new box is a tenth of the old one, centered on the incumbent but
    // never beyond the original constraint bounds.
    const Vector half = 0.05 * (hi - lo);
    const Vector new_lo = (best_p - half).cwiseMax(lo);
    const Vector new_hi = (best_p + half).cwiseMin(hi);
    lo = new_lo;
    hi = new_hi;
  }
  return best;
}

}  // namespace bpalm::oracle
