#pragma once

#include <cmath>
#include <utility>

#include "bpalm/core.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/penalty.hpp"
#include "bpalm/problem.hpp"

namespace bpalm {

/// Multiplier candidate y⁺(s) together with its mirror image ∇φ(y⁺(s)).
struct DualUpdate {
  Vector y;
  Vector mirror;
};

struct StoppingCheck {
  bool accepted = false;
  double lhs = kInfinity;
  double rhs = 0.0;
  Vector x_plus;
  /// Set when ∇ψ(s) − σ∇J(s) left the interior of dom ψ*.
  bool correction_outside_domain = false;
};

/// Frozen state of one outer iteration. It defines
///
///   J(s) = f(s) + (1/σ)·P(m_k + σ(As − b)) + (1/σ)·D_ψ(s, x_k)
///
/// where m_k = ∇φ(y_k) is the dual anchor in mirror coordinates. The constant
/// −(1/σ)·φ*(m_k) is left out of every value reported here.
///
/// Holds references: everything passed in must outlive the context.
class SubproblemContext {
 public:
  SubproblemContext(const ProblemSpec& problem, const BregmanGeometry& geometry,
                    const DualPenalty& penalty, Vector x_anchor, Vector dual_mirror,
                    double sigma, double rho)
      : problem_(&problem),
        geometry_(&geometry),
        penalty_(&penalty),
        x_k_(std::move(x_anchor)),
        mirror_k_(std::move(dual_mirror)),
        sigma_(sigma),
        rho_(rho) {
    require_dimension(x_k_.size(), problem.n(), "primal anchor");
    require_dimension(mirror_k_.size(), problem.m(), "dual anchor");
    require_dimension(geometry.primal.dimension(), problem.n(), "primal geometry");
    require_dimension(geometry.dual.dimension(), problem.m(), "dual geometry");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (!geometry.primal.in_interior(x_k_)) throw DomainError("primal anchor outside int dom ψ");
    if (!mirror_k_.allFinite()) throw DomainError("dual anchor outside int dom φ");
    grad_psi_k_ = geometry.primal.grad(x_k_);
  }

  /// Builds the context from a multiplier y_k in int dom φ.
  static SubproblemContext from_multiplier(const ProblemSpec& problem,
                                           const BregmanGeometry& geometry,
                                           const DualPenalty& penalty, const Vector& x_anchor,
                                           const Vector& y_anchor, double sigma, double rho) {
    return SubproblemContext(problem, geometry, penalty, x_anchor,
                             geometry.dual.grad(y_anchor), sigma, rho);
  }

  const ProblemSpec& problem() const { return *problem_; }
  const BregmanGeometry& geometry() const { return *geometry_; }
  const DualPenalty& penalty() const { return *penalty_; }
  const Vector& x_anchor() const { return x_k_; }
  const Vector& dual_mirror() const { return mirror_k_; }
  Vector y_anchor() const { return geometry_->dual.conj_grad(mirror_k_); }
  double sigma() const { return sigma_; }
  double rho() const { return rho_; }

  /// m_k + σ(As − b).
  Vector penalty_argument(const Vector& s) const {
    return mirror_k_ + sigma_ * problem_->map.residual(s);
  }

  bool in_interior(const Vector& s) const {
    return geometry_->primal.in_interior(s) && problem_->f.in_domain_interior(s);
  }

  double value(const Vector& s) const {
    if (s.size() != problem_->n() || !in_interior(s)) return kInfinity;
    return problem_->f.value(s) + penalty_->value(penalty_argument(s)) / sigma_ +
           geometry_->primal.bregman_distance(s, x_k_) / sigma_;
  }

  Vector grad(const Vector& s) const {
    check(s, "subproblem gradient");
    return problem_->f.grad(s) + problem_->map.A.transpose() * penalty_->grad(penalty_argument(s)) +
           (geometry_->primal.grad(s) - grad_psi_k_) / sigma_;
  }

  Matrix hess(const Vector& s) const {
    check(s, "subproblem Hessian");
    const Matrix a(problem_->map.A);
    Matrix h = problem_->f.hess(s);
    if (a.rows() > 0) h += sigma_ * a.transpose() * penalty_->hess(penalty_argument(s)) * a;
    h.diagonal() += geometry_->primal.hess_diag(s) / sigma_;
    return h;
  }

  DualUpdate dual_update(const Vector& s) const {
    const Vector u = penalty_argument(s);
    return {penalty_->grad(u), penalty_->mirror(u)};
  }

  /// B(s) = D_ψ(s, x_k) + D_φ(y⁺(s), y_k); the dual term is evaluated as
  /// D_φ*(m_k, ∇φ(y⁺)).
  double b_measure(const Vector& s) const {
    check(s, "B measure");
    const DualUpdate up = dual_update(s);
    return geometry_->primal.bregman_distance(s, x_k_) +
           geometry_->dual.conj_bregman_distance(mirror_k_, up.mirror);
  }

  /// Relative error test D_ψ(s, x⁺(s)) ≤ ρ·B(s) with x⁺(s) = ∇ψ*(∇ψ(s) − σ∇J(s)).
  StoppingCheck stopping_check(const Vector& s) const { return stopping_check(s, grad(s)); }

  StoppingCheck stopping_check(const Vector& s, const Vector& grad_j) const {
    check(s, "stopping check");
    StoppingCheck out;
    out.rhs = rho_ * b_measure(s);
    const auto& psi = geometry_->primal;
    if (psi.kind() == LegendreKind::energy) {
      out.x_plus = s - sigma_ * grad_j;
      out.lhs = 0.5 * sigma_ * sigma_ * grad_j.squaredNorm();
    } else {
      const Vector grad_psi_s = psi.grad(s);
      const Vector corrected = grad_psi_s - sigma_ * grad_j;
      if (!psi.in_conj_interior(corrected)) {
        out.correction_outside_domain = true;
        return out;
      }
      out.x_plus = psi.conj_grad(corrected);
      if (!psi.in_interior(out.x_plus)) {
        out.correction_outside_domain = true;
        return out;
      }
      out.lhs = psi.conj_bregman_distance(corrected, grad_psi_s);
    }
    out.accepted = out.lhs <= out.rhs;
    return out;
  }

 private:
  void check(const Vector& s, const char* what) const {
    require_dimension(s.size(), problem_->n(), what);
    if (!in_interior(s)) throw DomainError(std::string(what) + ": point outside the interior");
  }

  const ProblemSpec* problem_;
  const BregmanGeometry* geometry_;
  const DualPenalty* penalty_;
  Vector x_k_;
  Vector mirror_k_;
  Vector grad_psi_k_;
  double sigma_;
  double rho_;
};

}  // namespace bpalm
