#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "bpalm/core.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/outer.hpp"
#include "bpalm/problem.hpp"

namespace bpalm {

class InsufficientTraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// d_k = D_Φ(z*, z_k) for k = 0 (the start) through the last accepted
/// iterate. The dual part goes through mirror coordinates, so multipliers
/// that underflowed to zero still give finite distances.
inline std::vector<double> distances_to_solution(const SolveReport& report, const Vector& x_star,
                                                 const Vector& y_star, const BregmanGeometry& geometry) {
  if (!geometry.primal.in_domain(x_star) || !geometry.dual.in_domain(y_star)) {
    throw DomainError("reference solution outside dom Φ");
  }
  std::vector<double> d;
  d.reserve(report.trace.size() + 1);
  d.push_back(geometry.primal.bregman_distance(x_star, report.x0) +
              geometry.dual.bregman_distance_to_mirror(y_star, report.mirror0));
  for (const auto& rec : report.trace) {
    if (rec.x.size() == 0) break;
    d.push_back(geometry.primal.bregman_distance(x_star, rec.x) +
                geometry.dual.bregman_distance_to_mirror(y_star, rec.mirror));
  }
  return d;
}

struct FejerResult {
  bool monotone = true;
  std::vector<int> violations;
  std::vector<double> distances;
};

/// Monotone iff d_{k+1} ≤ d_k + slack·max(1, d_k) for every k.
inline FejerResult fejer_check(std::vector<double> distances, double slack = 1e-10) {
  FejerResult out;
  for (std::size_t k = 0; k + 1 < distances.size(); ++k) {
    if (distances[k + 1] > distances[k] + slack * std::max(1.0, distances[k])) {
      out.violations.push_back(static_cast<int>(k + 1));
    }
  }
  out.monotone = out.violations.empty();
  out.distances = std::move(distances);
  return out;
}

inline FejerResult fejer_check(const SolveReport& report, const Vector& x_star, const Vector& y_star,
                               const BregmanGeometry& geometry, double slack = 1e-10) {
  return fejer_check(distances_to_solution(report, x_star, y_star, geometry), slack);
}

struct RateEstimate {
  std::vector<double> distances;
  std::vector<double> q;
  bool superlinear = false;
  /// Index of the first distance at or below the floor, if any.
  std::optional<int> truncated_at;
};

/// Contraction factors q_k = d_{k+1}/d_k, cut where the distances reach
/// `floor` (roughly where rounding dominates). Superlinear means the last
/// five factors decrease strictly and the final one is below 0.1.
inline RateEstimate rate_fit(std::vector<double> distances, double floor = 1e-26) {
  if (distances.size() < 6) throw InsufficientTraceError("rate fit needs at least 6 iterates");
  RateEstimate out;
  for (std::size_t k = 0; k + 1 < distances.size(); ++k) {
    if (!(distances[k] > floor)) {
      out.truncated_at = static_cast<int>(k);
      break;
    }
    if (!(distances[k + 1] > floor)) {
      out.truncated_at = static_cast<int>(k + 1);
      break;
    }
    out.q.push_back(distances[k + 1] / distances[k]);
  }
  if (out.q.size() >= 5) {
    const std::size_t n = out.q.size();
    bool decreasing = true;
    for (std::size_t i = n - 5; i + 1 < n; ++i) decreasing = decreasing && out.q[i + 1] < out.q[i];
    out.superlinear = decreasing && out.q.back() < 0.1;
  }
  out.distances = std::move(distances);
  return out;
}

inline RateEstimate rate_fit(const SolveReport& report, const Vector& x_star, const Vector& y_star,
                             const BregmanGeometry& geometry, double floor = 1e-26) {
  return rate_fit(distances_to_solution(report, x_star, y_star, geometry), floor);
}

struct ErgodicGapResult {
  /// max over K and test points of lhs − rhs.
  double max_violation = -kInfinity;
  int checks = 0;
};

/// L(s̆_K, y) − L(x, y̆_K) ≤ (D_ψ(x, x⁰) + D_φ(y, y⁰)) / Σ_{k≤K} σ_k at every
/// prefix K of the trace and every test point (x, y).
inline ErgodicGapResult ergodic_gap_check(const SolveReport& report, const ProblemSpec& ps,
                                          const BregmanGeometry& geometry,
                                          const std::vector<std::pair<Vector, Vector>>& test_points) {
  ErgodicGapResult out;
  std::vector<double> radius;
  for (const auto& [x, y] : test_points) {
    radius.push_back(geometry.primal.bregman_distance(x, report.x0) +
                     geometry.dual.bregman_distance_to_mirror(y, report.mirror0));
  }
  Vector sum_s = Vector::Zero(ps.n());
  Vector sum_y = Vector::Zero(ps.m());
  double weight = 0.0;
  for (const auto& rec : report.trace) {
    if (rec.x.size() == 0) break;
    sum_s += rec.sigma * rec.s;
    sum_y += rec.sigma * rec.y;
    weight += rec.sigma;
    const Vector s_bar = sum_s / weight;
    const Vector y_bar = sum_y / weight;
    for (std::size_t i = 0; i < test_points.size(); ++i) {
      const auto& [x, y] = test_points[i];
      const double lhs = lagrangian(ps, s_bar, y) - lagrangian(ps, x, y_bar);
      const double rhs = radius[i] / weight;
      out.max_violation = std::max(out.max_violation, lhs - rhs);
      ++out.checks;
    }
  }
  return out;
}

namespace detail {

// Max of D_φ(·, y⁰) over R₊ᵐ ∩ B_R. The function is convex, so the maximum
// sits at an extreme point: the origin or the spherical cap. For m ≤ 3 the
// cap is sampled on a fine angular grid; larger m falls back to the
// separable box bound Σ max(D(0), D(R)), which can only be larger.
inline std::pair<double, bool> max_dual_distance_on_cap(const LegendreFunction& phi,
                                                        const Vector& mirror0, double radius) {
  const Index m = mirror0.size();
  auto dist = [&](const Vector& y) { return phi.bregman_distance_to_mirror(y, mirror0); };
  double best = dist(Vector::Zero(m));
  constexpr double half_pi = 0.5 * std::numbers::pi;
  if (m == 1) {
    best = std::max(best, dist(Vector::Constant(1, radius)));
    return {best, true};
  }
  if (m == 2) {
    const int steps = 20000;
    for (int i = 0; i <= steps; ++i) {
      const double a = half_pi * i / steps;
      Vector y(2);
      y << radius * std::cos(a), radius * std::sin(a);
      best = std::max(best, dist(y));
    }
    return {best, true};
  }
  if (m == 3) {
    const int steps = 600;
    for (int i = 0; i <= steps; ++i) {
      const double a = half_pi * i / steps;
      for (int j = 0; j <= steps; ++j) {
        const double b = half_pi * j / steps;
        Vector y(3);
        y << radius * std::sin(a) * std::cos(b), radius * std::sin(a) * std::sin(b), radius * std::cos(a);
        best = std::max(best, dist(y));
      }
    }
    return {best, true};
  }
  // Separability: D(y) = Σ dᵢ(yᵢ), and max over [0, R] of each convex dᵢ is
  // at an endpoint; dist(R·eᵢ) − dist(0) = dᵢ(R) − dᵢ(0).
  const double base = best;
  double bound = 0.0;
  for (Index i = 0; i < m; ++i) {
    Vector corner = Vector::Zero(m);
    corner[i] = radius;
    bound += std::max(0.0, dist(corner) - base);
  }
  return {base + bound, false};
}

}  // namespace detail

struct ConicFeasibilityResult {
  /// max over K of lhs − rhs.
  double max_violation = -kInfinity;
  int checks = 0;
  /// False when the dual maximum was replaced by an upper bound.
  bool exact_dual_max = true;
  double dual_max = 0.0;
};

/// Ergodic feasibility for g = indicator of −R₊ᵐ: at every prefix K,
/// max{|f(s̆_K) − f(x*)|, dist(As̆_K − b, −R₊ᵐ)} ≤
/// (D_ψ(x*, x⁰) + max_{y ∈ R₊ᵐ, ‖y‖ ≤ 2‖y*‖+1} D_φ(y, y⁰)) / Σσ_k.
inline ConicFeasibilityResult conic_feasibility_check(const SolveReport& report, const ProblemSpec& ps,
                                                      const BregmanGeometry& geometry,
                                                      const Vector& x_star, const Vector& y_star) {
  if (ps.g.kind != NonsmoothKind::nonpositive) {
    throw UnsupportedError("conic feasibility check needs an orthant constraint");
  }
  ConicFeasibilityResult out;
  const double radius = 2.0 * y_star.norm() + 1.0;
  const auto [dual_max, exact] = detail::max_dual_distance_on_cap(geometry.dual, report.mirror0, radius);
  out.exact_dual_max = exact;
  out.dual_max = dual_max;
  const double numerator = geometry.primal.bregman_distance(x_star, report.x0) + dual_max;
  const double f_star = ps.f.value(x_star);
  Vector sum_s = Vector::Zero(ps.n());
  double weight = 0.0;
  for (const auto& rec : report.trace) {
    if (rec.x.size() == 0) break;
    sum_s += rec.sigma * rec.s;
    weight += rec.sigma;
    const Vector s_bar = sum_s / weight;
    const double infeasibility = ps.map.residual(s_bar).cwiseMax(0.0).norm();
    const double lhs = std::max(std::abs(ps.f.value(s_bar) - f_star), infeasibility);
    out.max_violation = std::max(out.max_violation, lhs - numerator / weight);
    ++out.checks;
  }
  return out;
}

struct SummabilityResult {
  bool bounded = true;
  double bound = 0.0;
  std::vector<double> partial_sums;
};

/// Partial sums of B_k = D_Φ(p_k, z_k) against D_Φ(z*, z⁰)/(1 − ρ_max) + 1e−6.
inline SummabilityResult summability_check(const SolveReport& report, const Vector& x_star,
                                           const Vector& y_star, const BregmanGeometry& geometry) {
  SummabilityResult out;
  double rho_max = 0.0;
  for (const auto& rec : report.trace) rho_max = std::max(rho_max, rec.rho);
  const double d0 = geometry.primal.bregman_distance(x_star, report.x0) +
                    geometry.dual.bregman_distance_to_mirror(y_star, report.mirror0);
  out.bound = d0 / (1.0 - rho_max) + 1e-6;
  double total = 0.0;
  for (const auto& rec : report.trace) {
    if (rec.x.size() == 0) break;
    total += rec.b_measure;
    out.partial_sums.push_back(total);
    out.bounded = out.bounded && total <= out.bound;
  }
  return out;
}

/// Restricted gap G_R(p) approximated over a finite candidate set: the
/// maximum of ⟨w, p − z⟩ over candidates z = (x, y) with ‖z‖ ≤ R, using the
/// selection w = (∇f(x) + Aᵀy, b − Ax) ∈ T(z). Candidates must satisfy
/// x ∈ int dom f and y ∈ dom g*; others are skipped. The value is floored at
/// zero (the candidate z = p contributes zero).
inline double restricted_gap_estimate(const ProblemSpec& ps, const Vector& p_x, const Vector& p_y,
                                      double radius,
                                      const std::vector<std::pair<Vector, Vector>>& candidates) {
  double gap = 0.0;
  for (const auto& [x, y] : candidates) {
    if (std::sqrt(x.squaredNorm() + y.squaredNorm()) > radius) continue;
    if (!ps.f.in_domain_interior(x) || !ps.g.in_conjugate_domain(y)) continue;
    const Vector wx = ps.f.grad(x) + ps.map.A.transpose() * y;
    const Vector wy = -ps.map.residual(x);
    gap = std::max(gap, wx.dot(p_x - x) + wy.dot(p_y - y));
  }
  return gap;
}

/// F*(0, y_{k+1}) − F*(0, y*) along the trace; every entry is ≥ 0 up to
/// rounding and the sequence tends to zero when the duals converge.
inline std::vector<double> dual_objective_gaps(const SolveReport& report, const ProblemSpec& ps,
                                               const Vector& y_star) {
  const Vector zero = Vector::Zero(ps.n());
  const double best = dual_perturbation_value(ps, zero, y_star);
  std::vector<double> gaps;
  for (const auto& rec : report.trace) {
    if (rec.x.size() == 0) break;
    gaps.push_back(dual_perturbation_value(ps, zero, rec.y) - best);
  }
  return gaps;
}

}  // namespace bpalm
