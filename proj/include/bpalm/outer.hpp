#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bpalm/auglag.hpp"
#include "bpalm/core.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/newton.hpp"
#include "bpalm/penalty.hpp"
#include "bpalm/problem.hpp"

namespace bpalm {

/// ρ_k = initial·factor^k; factor 1 gives a constant schedule.
struct RhoSchedule {
  double initial = 0.5;
  double factor = 1.0;

  static RhoSchedule constant(double rho) { return {rho, 1.0}; }
  static RhoSchedule geometric(double rho0, double factor) { return {rho0, factor}; }

  double at(int k) const { return initial * std::pow(factor, static_cast<double>(k)); }
};

struct BisectionConfig {
  int max_iters = 40;
  double shrink = 0.5;
};

struct SolverConfig {
  BregmanGeometry geometry;
  Regime regime = Regime::qsc;
  double sigma0 = 1.0;
  double sigma_growth = 2.0;
  double sigma_max = 1e6;
  RhoSchedule rho;
  double tol_B = 1e-16;
  double tol_kkt = 1e-8;
  int max_outer = 500;
  int newton_cap = 50;
  BisectionConfig bisection;

  void validate() const {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
    if (!(sigma_growth >= 1.0)) throw std::invalid_argument("sigma_growth must be at least 1");
    if (!(sigma_max >= sigma0)) throw std::invalid_argument("sigma_max must be at least sigma0");
    if (!(rho.initial >= 0.0 && rho.initial < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (!(rho.factor >= 0.0 && rho.factor <= 1.0)) throw std::invalid_argument("rho decay must lie in [0, 1]");
    if (!(tol_B > 0.0) || !(tol_kkt > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (max_outer < 0 || newton_cap < 0) throw std::invalid_argument("iteration limits must be nonnegative");
    if (!(bisection.shrink > 0.0 && bisection.shrink < 1.0) || bisection.max_iters < 1) {
      throw std::invalid_argument("bisection needs shrink in (0, 1) and at least one try");
    }
  }
};

enum class SolveStatus { Optimal, MaxIter, InnerFailure, Diverged };

inline const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::InnerFailure: return "InnerFailure";
    case SolveStatus::Diverged: return "Diverged";
  }
  return "unknown";
}

/// One outer iteration as recorded in the trace. The fields x and y (with y's
/// mirror image) hold z_{k+1}; s is the accepted inner point.
struct IterRecord {
  int k = 0;
  double sigma = 0.0;
  double sigma_target = 0.0;
  double rho = 0.0;
  int newton_steps = 0;
  /// Steps spent on subproblems abandoned for a smaller σ.
  int rejected_newton_steps = 0;
  int sigma_retries = 0;
  std::optional<int> predicted;
  double b_measure = 0.0;
  double grad_norm = 0.0;
  double initial_decrement = 0.0;
  KktResiduals residuals;
  Vector s;
  Vector x;
  Vector y;
  Vector mirror;
  NewtonTrace newton;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIter;
  std::string message;
  Vector x;
  Vector y;
  Vector mirror;
  KktResiduals residuals;
  int outer_iterations = 0;
  int newton_steps_total = 0;
  double sigma_final = 0.0;
  double wall_time_ms = 0.0;
  Vector x0;
  Vector y0;
  Vector mirror0;
  std::vector<IterRecord> trace;
  Vector ergodic_x;
  Vector ergodic_y;
  double weight_sum = 0.0;
};

class EmptyStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct IterateState {
  Vector x;
  Vector y;
  Vector mirror;
  Vector ergodic_x_sum;
  Vector ergodic_y_sum;
  double weight_sum = 0.0;
  double sigma_prev = 0.0;
  double sigma_ceiling = kInfinity;
  int k = 0;

  static IterateState initial(const BregmanGeometry& geometry, const Vector& x0, const Vector& y0) {
    if (!geometry.primal.in_interior(x0)) throw DomainError("x0 must lie in int dom ψ");
    if (!geometry.dual.in_interior(y0)) throw DomainError("y0 must lie in int dom φ");
    IterateState st;
    st.x = x0;
    st.y = y0;
    st.mirror = geometry.dual.grad(y0);
    st.ergodic_x_sum = Vector::Zero(x0.size());
    st.ergodic_y_sum = Vector::Zero(y0.size());
    return st;
  }
};

struct ErgodicIterates {
  Vector x_bar;
  Vector y_bar;
};

/// σ-weighted averages of the inner points s_k and the multipliers y_{k+1}.
inline ErgodicIterates ergodic_iterates(const IterateState& st) {
  if (!(st.weight_sum > 0.0)) throw EmptyStateError("ergodic iterates need at least one iteration");
  return {st.ergodic_x_sum / st.weight_sum, st.ergodic_y_sum / st.weight_sum};
}

/// Largest σ in {target·shrinkʲ : j < max_iters} accepted by `admissible`.
inline double select_sigma(double target, const std::function<bool(double)>& admissible,
                           const BisectionConfig& bisection = {}) {
  double sigma = target;
  for (int j = 0; j < bisection.max_iters; ++j) {
    if (sigma < 1e-12) break;
    if (admissible(sigma)) return sigma;
    sigma *= bisection.shrink;
  }
  throw BisectionFailedError("no step size down to 1e-12 satisfies the regime bound");
}

/// σ ≤ min{1/(2·g(σ)·M_f), 1/√(2·g(σ)·α·‖A‖)}, written without divisions so
/// that g = 0 or vanishing moduli accept every σ.
inline std::function<bool(double)> qsc_sigma_rule(std::function<double(double)> grad_norm_at,
                                                  double m_f, double alpha, double norm_a) {
  return [=](double sigma) {
    const double g = grad_norm_at(sigma);
    if (!std::isfinite(g)) return false;
    return 2.0 * g * m_f * sigma <= 1.0 && 2.0 * g * alpha * norm_a * sigma * sigma <= 1.0;
  };
}

/// 16·M(σ)²·q(σ)·σ < 1 with M(σ) = max{M_f, √σ·M_ψ} and
/// q(σ) = ⟨∇J(x_k), ∇²ψ(x_k)⁻¹∇J(x_k)⟩.
inline std::function<bool(double)> sc_sigma_rule(std::function<double(double)> local_norm_sq_at,
                                                 double m_f, double m_psi) {
  return [=](double sigma) {
    const double q = local_norm_sq_at(sigma);
    if (!std::isfinite(q)) return false;
    const double m = std::max(m_f, std::sqrt(sigma) * m_psi);
    return 16.0 * m * m * q * sigma < 1.0;
  };
}

struct OuterStep {
  IterRecord record;
  bool accepted = false;
  std::string failure;
};

namespace detail {

inline double regime_sigma(const SolverConfig& cfg, const ProblemSpec& ps, const DualPenalty& penalty,
                           const IterateState& st, double target) {
  auto context_at = [&](double sigma) {
    return SubproblemContext(ps, cfg.geometry, penalty, st.x, st.mirror, sigma, cfg.rho.at(st.k));
  };
  if (cfg.regime == Regime::sc) {
    const auto m_psi = cfg.geometry.primal.self_concordance_modulus();
    if (!m_psi || !ps.f.sc_modulus) {
      throw InvalidRegimeError("sc regime needs self-concordant f and ψ");
    }
    const Vector h_psi = cfg.geometry.primal.hess_diag(st.x);
    auto q = [&](double sigma) {
      const Vector g = context_at(sigma).grad(st.x);
      return (g.array().square() / h_psi.array()).sum();
    };
    return select_sigma(target, sc_sigma_rule(q, *ps.f.sc_modulus, *m_psi), cfg.bisection);
  }
  const double alpha = penalty.moduli(target).alpha;
  auto g = [&](double sigma) { return context_at(sigma).grad(st.x).norm(); };
  return select_sigma(target, qsc_sigma_rule(g, ps.f.qsc_modulus, alpha, ps.map.op_norm_bound),
                      cfg.bisection);
}

}  // namespace detail

/// One outer step: select σ_k, solve the subproblem from x_k, then apply
/// x_{k+1} = ∇ψ*(∇ψ(s_k) − σ_k∇J(s_k)) and y_{k+1} = ∇P(∇φ(y_k) + σ_k(As_k − b)).
/// On failure the state is left untouched and `failure` says why.
inline OuterStep outer_iteration(const SolverConfig& cfg, const ProblemSpec& ps,
                                 const DualPenalty& penalty, IterateState& st) {
  OuterStep out;
  IterRecord& rec = out.record;
  rec.k = st.k;
  rec.rho = cfg.rho.at(st.k);
  // An inner solve that ended on the precision floor caps σ from then on:
  // the correction s − σ∇J(s) amplifies rounding in ∇J by σ.
  rec.sigma_target = st.k == 0 ? cfg.sigma0
                               : std::min({st.sigma_prev * cfg.sigma_growth, cfg.sigma_max, st.sigma_ceiling});
  // A subproblem that misses the stopping test within the Newton cap is
  // retried from x_k with the next smaller admissible σ.
  double target = rec.sigma_target;
  SubproblemResult inner;
  std::optional<SubproblemContext> accepted_ctx;
  for (int attempt = 0; attempt < cfg.bisection.max_iters; ++attempt) {
    try {
      rec.sigma = detail::regime_sigma(cfg, ps, penalty, st, target);
    } catch (const BisectionFailedError& e) {
      out.failure = e.what();
      return out;
    }
    const SubproblemContext ctx(ps, cfg.geometry, penalty, st.x, st.mirror, rec.sigma, rec.rho);
    const double modulus = subproblem_modulus(ctx, cfg.regime).value_or(1.0);
    try {
      inner = solve_subproblem(ctx, st.x, cfg.newton_cap, modulus > 0.0 ? modulus : 1.0);
    } catch (const FactorizationError& e) {
      out.failure = e.what();
      return out;
    } catch (const DomainError& e) {
      out.failure = e.what();
      return out;
    }
    if (inner.accepted) {
      accepted_ctx.emplace(ctx);
      break;
    }
    rec.rejected_newton_steps += inner.trace.iterations_used;
    ++rec.sigma_retries;
    target = rec.sigma * cfg.bisection.shrink;
    if (target < 1e-12) break;
  }
  rec.newton = inner.trace;
  rec.newton_steps = inner.trace.iterations_used;
  rec.s = inner.s;
  rec.initial_decrement = inner.trace.steps.front().decrement;
  rec.grad_norm = inner.trace.steps.back().grad_norm;
  if (!accepted_ctx) {
    out.failure = inner.trace.correction_outside_domain
                      ? "corrected primal point left int dom ψ"
                      : "Newton cap reached before the stopping test accepted";
    return out;
  }
  const SubproblemContext& ctx = *accepted_ctx;

  rec.b_measure = ctx.b_measure(inner.s);
  try {
    rec.predicted = predicted_iterations(cfg.regime, prediction_inputs(ctx, cfg.regime, rec.b_measure));
  } catch (const InvalidRegimeError&) {
    rec.predicted.reset();
  }
  rec.newton.predicted_T = rec.predicted;

  const DualUpdate up = ctx.dual_update(inner.s);
  rec.x = inner.check.x_plus;
  rec.y = up.y;
  rec.mirror = up.mirror;
  rec.residuals = kkt_residuals(ps, rec.x, rec.y);

  st.ergodic_x_sum += rec.sigma * rec.s;
  st.ergodic_y_sum += rec.sigma * rec.y;
  st.weight_sum += rec.sigma;
  st.x = rec.x;
  st.y = rec.y;
  st.mirror = rec.mirror;
  st.sigma_prev = rec.sigma;
  if (inner.trace.precision_floor) st.sigma_ceiling = std::min(st.sigma_ceiling, rec.sigma);
  st.k += 1;
  out.accepted = true;
  return out;
}

/// Outer loop. Stops with Optimal once the KKT residuals are below tol_kkt
/// and, for geometries without a bounded primal domain, B_k ≤ tol_B as well.
inline SolveReport run(const SolverConfig& cfg, const ProblemSpec& ps, const Vector& x0, const Vector& y0) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  ps.validate();
  require_dimension(cfg.geometry.primal.dimension(), ps.n(), "primal geometry");
  require_dimension(cfg.geometry.dual.dimension(), ps.m(), "dual geometry");
  const DualPenalty penalty = DualPenalty::for_pairing(ps.g.kind, cfg.geometry.dual.kind());

  IterateState st = IterateState::initial(cfg.geometry, x0, y0);
  SolveReport report;
  report.x0 = x0;
  report.y0 = y0;
  report.mirror0 = st.mirror;
  report.residuals = kkt_residuals(ps, x0, y0);
  report.status = SolveStatus::MaxIter;

  const bool barrier_primal = cfg.geometry.primal.has_bounded_domain();
  int stagnant = 0;
  double best_primal = kInfinity;

  for (int k = 0; k < cfg.max_outer; ++k) {
    OuterStep step = outer_iteration(cfg, ps, penalty, st);
    report.newton_steps_total += step.record.newton_steps + step.record.rejected_newton_steps;
    if (!step.accepted) {
      report.status = SolveStatus::InnerFailure;
      report.message = step.failure;
      report.trace.push_back(std::move(step.record));
      break;
    }
    const IterRecord& rec = report.trace.emplace_back(std::move(step.record));
    report.residuals = rec.residuals;
    report.sigma_final = rec.sigma;

    const bool kkt_ok = rec.residuals.max() <= cfg.tol_kkt;
    if (kkt_ok && (barrier_primal || rec.b_measure <= cfg.tol_B)) {
      report.status = SolveStatus::Optimal;
      break;
    }
    if (!(rec.y.allFinite()) || rec.y.norm() > 1e12) {
      report.status = SolveStatus::Diverged;
      report.message = "multiplier norm exceeded 1e12";
      break;
    }
    const bool sigma_at_bound = rec.sigma < rec.sigma_target || rec.sigma >= cfg.sigma_max;
    const double primal = rec.residuals.primal_res;
    if (primal > cfg.tol_kkt && sigma_at_bound && primal >= best_primal) {
      ++stagnant;
    } else {
      stagnant = 0;
    }
    best_primal = std::min(best_primal, primal);
    if (stagnant >= 50) {
      report.status = SolveStatus::Diverged;
      report.message = "primal residual stagnated for 50 iterations with sigma at its bound";
      break;
    }
  }

  report.x = st.x;
  report.y = st.y;
  report.mirror = st.mirror;
  report.outer_iterations = st.k;
  if (st.weight_sum > 0.0) {
    const ErgodicIterates avg = ergodic_iterates(st);
    report.ergodic_x = avg.x_bar;
    report.ergodic_y = avg.y_bar;
    report.weight_sum = st.weight_sum;
  }
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return report;
}

/// Default starting multiplier: uniform weights on the simplex for vecmax,
/// all ones otherwise.
inline Vector default_dual_start(const ProblemSpec& ps) {
  if (ps.g.kind == NonsmoothKind::vecmax && ps.m() > 0) {
    return Vector::Constant(ps.m(), 1.0 / static_cast<double>(ps.m()));
  }
  return Vector::Ones(ps.m());
}

/// Default primal start: the origin, or the box midpoint (one unit inside a
/// finite bound when the other is infinite) under a bounded geometry.
inline Vector default_primal_start(const LegendreFunction& psi) {
  const Vector lo = psi.lower_bounds();
  const Vector hi = psi.upper_bounds();
  Vector x = Vector::Zero(psi.dimension());
  for (Index i = 0; i < x.size(); ++i) {
    const bool fl = std::isfinite(lo[i]);
    const bool fh = std::isfinite(hi[i]);
    if (fl && fh) x[i] = 0.5 * (lo[i] + hi[i]);
    else if (fl) x[i] = std::max(0.0, lo[i] + 1.0);
    else if (fh) x[i] = std::min(0.0, hi[i] - 1.0);
  }
  return x;
}

}  // namespace bpalm
