#pragma once

#include <algorithm>
#include <climits>
#include <limits>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "bpalm/auglag.hpp"
#include "bpalm/core.hpp"

namespace bpalm {

enum class Regime { qsc, qsc_lipschitz, sc };

inline const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::qsc: return "qsc";
    case Regime::qsc_lipschitz: return "qsc_lipschitz";
    case Regime::sc: return "sc";
  }
  return "unknown";
}

/// One inner iterate s_t. Every iterate, including the accepted one, gets a
/// record; step_norm is zero for the last.
struct NewtonStepRecord {
  double grad_norm = 0.0;
  double decrement = 0.0;
  double step_norm = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool accepted = false;
};

struct NewtonTrace {
  std::vector<NewtonStepRecord> steps;
  int iterations_used = 0;
  std::optional<int> predicted_T;
  double decrement_modulus = 1.0;
  bool lifted = false;
  bool precision_floor = false;
  bool clamped = false;
  bool correction_outside_domain = false;
};

struct SubproblemResult {
  Vector s;
  NewtonTrace trace;
  bool accepted = false;
  StoppingCheck check;
};

/// Cholesky factor of a Newton matrix. A diagonal lift of
/// 1e−12·(1 + trace/n) is tried once when the plain factorization fails.
class NewtonSystem {
 public:
  explicit NewtonSystem(const Matrix& h) {
    llt_.compute(h);
    if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().allFinite()) return;
    const double n = static_cast<double>(std::max<Index>(1, h.rows()));
    Matrix lifted = h;
    lifted.diagonal().array() += 1e-12 * (1.0 + std::abs(h.trace()) / n);
    llt_.compute(lifted);
    if (llt_.info() != Eigen::Success || !llt_.matrixLLT().diagonal().allFinite()) {
      throw FactorizationError("Newton matrix is not numerically positive definite");
    }
    lifted_ = true;
  }

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  bool lifted() const { return lifted_; }

 private:
  Eigen::LLT<Matrix> llt_;
  bool lifted_ = false;
};

namespace detail {

// Largest fraction of the step d keeping s + t·d strictly inside the
// componentwise bounds, shrunk by 0.99; 1 when the full step is admissible.
inline double feasible_fraction(const Vector& s, const Vector& d, const Vector& lower,
                                const Vector& upper) {
  double t_max = kInfinity;
  for (Index i = 0; i < s.size(); ++i) {
    if (d[i] > 0.0 && std::isfinite(upper[i])) t_max = std::min(t_max, (upper[i] - s[i]) / d[i]);
    if (d[i] < 0.0 && std::isfinite(lower[i])) t_max = std::min(t_max, (lower[i] - s[i]) / d[i]);
  }
  if (t_max > 1.0) return 1.0;
  return 0.99 * t_max;
}

}  // namespace detail

/// s − ∇²J(s)⁻¹∇J(s), shortened when the full step would leave int dom ψ.
inline Vector newton_step(const SubproblemContext& ctx, const Vector& s, bool* clamped = nullptr) {
  const NewtonSystem system(ctx.hess(s));
  const Vector direction = -system.solve(ctx.grad(s));
  Vector next = s + direction;
  const auto& psi = ctx.geometry().primal;
  if (psi.has_bounded_domain() && !ctx.in_interior(next)) {
    const double t = detail::feasible_fraction(s, direction, psi.lower_bounds(), psi.upper_bounds());
    next = s + t * direction;
    if (clamped) *clamped = true;
  }
  return next;
}

/// M·sqrt(⟨∇J(s), ∇²J(s)⁻¹∇J(s)⟩).
inline double newton_decrement(const SubproblemContext& ctx, const Vector& s, double modulus) {
  if (!(modulus > 0.0)) throw std::invalid_argument("decrement modulus must be positive");
  const Vector g = ctx.grad(s);
  const NewtonSystem system(ctx.hess(s));
  return modulus * std::sqrt(std::max(0.0, g.dot(system.solve(g))));
}

/// Pure Newton iterations from `start` until the relative stopping test
/// accepts, s is stationary to working precision (σ‖∇J‖ ≤ 1e−12·(1 + ‖s‖) or
/// a Newton step below 8ε·(1 + ‖s‖)), or `cap` steps have been taken.
inline SubproblemResult solve_subproblem(const SubproblemContext& ctx, const Vector& start,
                                         int cap, double decrement_modulus = 1.0) {
  if (cap < 0) throw std::invalid_argument("Newton cap must be nonnegative");
  SubproblemResult out;
  out.trace.decrement_modulus = decrement_modulus;
  Vector s = start;
  const auto& psi = ctx.geometry().primal;
  for (int t = 0;; ++t) {
    const Vector g = ctx.grad(s);
    out.check = ctx.stopping_check(s, g);
    const NewtonSystem system(ctx.hess(s));
    out.trace.lifted = out.trace.lifted || system.lifted();
    const Vector direction = -system.solve(g);

    NewtonStepRecord rec;
    rec.grad_norm = g.norm();
    rec.decrement = decrement_modulus * std::sqrt(std::max(0.0, -g.dot(direction)));
    rec.lhs = out.check.lhs;
    rec.rhs = out.check.rhs;
    // Either the gradient is at the floor or the Newton step no longer moves
    // s in floating point; further steps cannot improve the criterion.
    const bool stationary = ctx.sigma() * rec.grad_norm <= 1e-12 * (1.0 + s.norm()) ||
                            direction.norm() <= 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + s.norm());
    const bool at_floor = stationary && !out.check.correction_outside_domain;
    rec.accepted = out.check.accepted || at_floor;
    if (at_floor && !out.check.accepted) {
      out.trace.precision_floor = true;
      if (out.check.x_plus.size() == 0) out.check.x_plus = s;
    }
    out.trace.correction_outside_domain = out.check.correction_outside_domain;

    if (rec.accepted || t >= cap) {
      out.trace.steps.push_back(rec);
      out.trace.iterations_used = t;
      out.accepted = rec.accepted;
      out.s = s;
      return out;
    }

    Vector next = s + direction;
    if (psi.has_bounded_domain() && !ctx.in_interior(next)) {
      const double frac = detail::feasible_fraction(s, direction, psi.lower_bounds(), psi.upper_bounds());
      next = s + frac * direction;
      out.trace.clamped = true;
    }
    rec.step_norm = (next - s).norm();
    out.trace.steps.push_back(rec);
    s = std::move(next);
  }
}

/// Moduli feeding the predicted inner iteration counts.
struct PredictionInputs {
  double sigma = 1.0;
  double rho = 0.0;
  double b_measure = 0.0;
  /// M_k: quasi-self-concordance (qsc) or self-concordance (sc) constant of J.
  std::optional<double> modulus;
  /// L_k = L_f + β·σ·‖A‖² + 1/σ.
  std::optional<double> lipschitz;
  /// Self-concordance constant of ψ.
  std::optional<double> psi_modulus;
  /// c(σ) with ∇²F ≼ c(σ)·∇²ψ.
  std::optional<double> hessian_bound;
};

namespace detail {

inline int ceil_log2_clamped(double v) {
  if (!(v > 1.0)) return 0;
  if (!std::isfinite(v)) return INT_MAX;
  const double t = std::ceil(std::log2(v));
  return t >= static_cast<double>(INT_MAX) ? INT_MAX : static_cast<int>(t);
}

}  // namespace detail

/// Predicted number of pure Newton steps. Nonpositive inner logarithms give
/// 0; ρ = 0 or B = 0 give INT_MAX (the criterion only holds at exact
/// stationarity).
inline int predicted_iterations(Regime regime, const PredictionInputs& in) {
  switch (regime) {
    case Regime::qsc: {
      if (!in.modulus || !(*in.modulus > 0.0)) {
        throw InvalidRegimeError("qsc prediction needs a positive modulus M_k");
      }
      if (in.rho <= 0.0 || in.b_measure <= 0.0) return INT_MAX;
      // After t steps ‖∇J‖ ≤ θ^(2^t)/(2Mσ/e) with θ ≤ 1/e, and the energy
      // criterion asks for ‖∇J‖ ≤ √(2ρB)/σ, so θ^(2^t) ≤ 2M·e⁻¹·√(2ρB)
      // suffices. A constant of 4 here would undercount by one step.
      const double inner = 2.0 * (*in.modulus) * std::exp(-1.0) * std::sqrt(2.0 * in.rho) *
                           std::sqrt(in.b_measure);
      return detail::ceil_log2_clamped(-std::log(inner));
    }
    case Regime::qsc_lipschitz: {
      if (!in.lipschitz) throw InvalidRegimeError("qsc_lipschitz prediction needs L_k");
      if (in.rho <= 0.0) return INT_MAX;
      const double root = std::sqrt(in.rho);
      const double v = std::log(std::sqrt(2.0) * (*in.lipschitz) * in.sigma + root) - std::log(root) + 1.0;
      return detail::ceil_log2_clamped(v);
    }
    case Regime::sc: {
      if (!in.modulus || !(*in.modulus > 0.0) || !in.psi_modulus || !in.hessian_bound) {
        throw InvalidRegimeError("sc prediction needs M_k, M_psi and c(sigma)");
      }
      if (in.rho <= 0.0 || in.b_measure <= 0.0) return INT_MAX;
      const double scale = std::log(in.sigma / (*in.modulus) * std::sqrt(*in.hessian_bound + 1.0 / in.sigma));
      const double gap = std::max(0.5 * std::log(1.0 / (2.0 * in.rho * in.b_measure)),
                                  std::log(3.0 * (*in.psi_modulus)));
      return detail::ceil_log2_clamped((scale + gap) / std::log(2.0));
    }
  }
  return 0;
}

/// Modulus M_k of J for the regime: max(σ·α·‖A‖, M_f) under qsc and
/// max(M_f, √σ·M_ψ) under sc. Returns nullopt when the regime does not apply.
inline std::optional<double> subproblem_modulus(const SubproblemContext& ctx, Regime regime) {
  const auto& ps = ctx.problem();
  const double sigma = ctx.sigma();
  if (regime == Regime::sc) {
    const auto m_psi = ctx.geometry().primal.self_concordance_modulus();
    if (!m_psi || !ps.f.sc_modulus) return std::nullopt;
    return std::max(*ps.f.sc_modulus, std::sqrt(sigma) * (*m_psi));
  }
  const double alpha = ctx.penalty().moduli(sigma).alpha;
  return std::max(sigma * alpha * ps.map.op_norm_bound, ps.f.qsc_modulus);
}

/// Collects the moduli a regime's prediction formula needs. Missing pieces
/// stay empty and make predicted_iterations throw.
inline PredictionInputs prediction_inputs(const SubproblemContext& ctx, Regime regime, double b_measure) {
  PredictionInputs in;
  in.sigma = ctx.sigma();
  in.rho = ctx.rho();
  in.b_measure = b_measure;
  const auto& ps = ctx.problem();
  const double norm_a = ps.map.op_norm_bound;
  const auto moduli = ctx.penalty().moduli(ctx.sigma());
  // The qsc bounds treat the proximal term as a plain quadratic.
  if (regime != Regime::sc && ctx.geometry().primal.kind() != LegendreKind::energy) return in;
  switch (regime) {
    case Regime::qsc: in.modulus = subproblem_modulus(ctx, regime); break;
    case Regime::qsc_lipschitz:
      in.modulus = subproblem_modulus(ctx, regime);
      if (moduli.beta && ps.f.lipschitz_modulus) {
        in.lipschitz = *ps.f.lipschitz_modulus + (*moduli.beta) * ctx.sigma() * norm_a * norm_a + 1.0 / ctx.sigma();
      }
      break;
    case Regime::sc: {
      const auto kind = ctx.geometry().primal.kind();
      const bool hessian_above_identity = kind == LegendreKind::energy || kind == LegendreKind::box_barrier;
      if (ctx.penalty().form() != PenaltyForm::half_square || !hessian_above_identity) break;
      in.modulus = subproblem_modulus(ctx, regime);
      in.psi_modulus = ctx.geometry().primal.self_concordance_modulus();
      if (ps.f.lipschitz_modulus) in.hessian_bound = ctx.sigma() * norm_a * norm_a + *ps.f.lipschitz_modulus;
      break;
    }
  }
  return in;
}

}  // namespace bpalm
