#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bpalm/core.hpp"
#include "bpalm/special.hpp"

namespace bpalm {

enum class LegendreKind { energy, von_neumann, burg, spence, box_barrier, product };

inline const char* to_string(LegendreKind kind) {
  switch (kind) {
    case LegendreKind::energy: return "energy";
    case LegendreKind::von_neumann: return "von_neumann";
    case LegendreKind::burg: return "burg";
    case LegendreKind::spence: return "spence";
    case LegendreKind::box_barrier: return "box_barrier";
    case LegendreKind::product: return "product";
  }
  return "unknown";
}

namespace detail {

// (1+δ)·ln(1+δ) − δ, accurate for small δ.
inline double xlogx_gap(double delta) {
  if (std::abs(delta) < 1e-4) {
    const double d2 = delta * delta;
    return d2 * (0.5 + delta * (-1.0 / 6.0 + delta * (1.0 / 12.0 - delta / 20.0)));
  }
  return (1.0 + delta) * std::log1p(delta) - delta;
}

// δ − ln(1+δ), accurate for small δ (Itakura–Saito kernel with r = 1+δ).
inline double itakura_saito_gap(double delta) {
  if (std::abs(delta) < 1e-4) {
    const double d2 = delta * delta;
    return d2 * (0.5 + delta * (-1.0 / 3.0 + delta * (0.25 - delta / 5.0)));
  }
  return delta - std::log1p(delta);
}

// eᵈ − 1 − d, accurate for small d.
inline double expm1_gap(double d) {
  if (std::abs(d) < 1e-3) {
    return d * d * (0.5 + d * (1.0 / 6.0 + d * (1.0 / 24.0 + d / 120.0)));
  }
  return std::expm1(d) - d;
}

// One coordinate of a separable Legendre function.
struct ScalarLegendre {
  LegendreKind kind = LegendreKind::energy;
  double lower = -kInfinity;
  double upper = kInfinity;

  bool in_domain(double t) const {
    switch (kind) {
      case LegendreKind::energy: return std::isfinite(t);
      case LegendreKind::von_neumann:
      case LegendreKind::spence: return std::isfinite(t) && t >= 0.0;
      case LegendreKind::burg: return std::isfinite(t) && t > 0.0;
      case LegendreKind::box_barrier: return std::isfinite(t) && lower < t && t < upper;
      case LegendreKind::product: break;
    }
    return false;
  }

  double grad_unchecked(double t) const {
    switch (kind) {
      case LegendreKind::energy: return t;
      case LegendreKind::von_neumann: return std::log(t);
      case LegendreKind::burg: return -1.0 / t;
      case LegendreKind::spence: return special::log_expm1(t);
      case LegendreKind::box_barrier: {
        double g = t;
        if (std::isfinite(upper)) g += 1.0 / (upper - t);
        if (std::isfinite(lower)) g -= 1.0 / (t - lower);
        return g;
      }
      case LegendreKind::product: break;
    }
    return std::nan("");
  }

  // Strict interior with a finite gradient.
  bool in_interior(double t) const {
    switch (kind) {
      case LegendreKind::energy: return std::isfinite(t);
      case LegendreKind::von_neumann:
      case LegendreKind::spence:
      case LegendreKind::burg:
        if (!(std::isfinite(t) && t > 0.0)) return false;
        break;
      case LegendreKind::box_barrier:
        if (!in_domain(t)) return false;
        break;
      case LegendreKind::product: return false;
    }
    return std::isfinite(grad_unchecked(t));
  }

  bool in_conj_interior(double s) const {
    if (!std::isfinite(s)) return false;
    if (kind == LegendreKind::burg) return s < 0.0;
    return true;
  }

  double value(double t) const {
    if (!in_domain(t)) return kInfinity;
    switch (kind) {
      case LegendreKind::energy: return 0.5 * t * t;
      case LegendreKind::von_neumann: return t == 0.0 ? 0.0 : t * std::log(t) - t;
      case LegendreKind::burg: return -std::log(t);
      case LegendreKind::spence: return special::spence_entropy(t);
      case LegendreKind::box_barrier: {
        double v = 0.5 * t * t;
        if (std::isfinite(upper)) v -= std::log(upper - t);
        if (std::isfinite(lower)) v -= std::log(t - lower);
        return v;
      }
      case LegendreKind::product: break;
    }
    return kInfinity;
  }

  double hess(double t) const {
    switch (kind) {
      case LegendreKind::energy: return 1.0;
      case LegendreKind::von_neumann: return 1.0 / t;
      case LegendreKind::burg: return 1.0 / (t * t);
      case LegendreKind::spence: return -1.0 / std::expm1(-t);
      case LegendreKind::box_barrier: {
        double h = 1.0;
        if (std::isfinite(upper)) h += 1.0 / ((upper - t) * (upper - t));
        if (std::isfinite(lower)) h += 1.0 / ((t - lower) * (t - lower));
        return h;
      }
      case LegendreKind::product: break;
    }
    return std::nan("");
  }

  double box_conj_grad(double s) const {
    const bool has_upper = std::isfinite(upper);
    const bool has_lower = std::isfinite(lower);
    // x + 1/(u−x) = s  ⇔  d² + a·d − 1 = 0 with d = u − x, a = s − u.
    auto upper_only = [&](double a) {
      const double r = std::hypot(a, 2.0);
      return a >= 0.0 ? 2.0 / (a + r) : 0.5 * (r - a);
    };
    // x − 1/(x−l) = s  ⇔  e² − a·e − 1 = 0 with e = x − l, a = s − l.
    auto lower_only = [&](double a) {
      const double r = std::hypot(a, 2.0);
      return a >= 0.0 ? 0.5 * (a + r) : 2.0 / (r - a);
    };
    if (!has_upper && !has_lower) return s;
    if (has_upper && !has_lower) return upper - upper_only(s - upper);
    if (!has_upper && has_lower) return lower + lower_only(s - lower);

    // Two-sided: h(x) = ψ'(x) − s is strictly increasing on (l, u). Each
    // one-sided solution brackets the root from its side.
    double lo = lower;
    double hi = upper;
    const double x_up = upper - upper_only(s - upper);
    const double x_low = lower + lower_only(s - lower);
    if (x_up > lo && x_up < hi) lo = x_up;
    if (x_low > lo && x_low < hi) hi = x_low;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double h = grad_unchecked(x) - s;
      if (h == 0.0) break;
      if (h > 0.0) hi = x; else lo = x;
      double next = x - h / hess(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - x);
      x = next;
      if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
      if (!(hi > lo)) break;
    }
    return x;
  }

  double conj_grad(double s) const {
    switch (kind) {
      case LegendreKind::energy: return s;
      case LegendreKind::von_neumann: return std::exp(s);
      case LegendreKind::burg: return -1.0 / s;
      case LegendreKind::spence: return special::softplus(s);
      case LegendreKind::box_barrier: return box_conj_grad(s);
      case LegendreKind::product: break;
    }
    return std::nan("");
  }

  double conj_value(double s) const {
    if (!in_conj_interior(s)) return kInfinity;
    switch (kind) {
      case LegendreKind::energy: return 0.5 * s * s;
      case LegendreKind::von_neumann: return std::exp(s);
      case LegendreKind::burg: return -1.0 - std::log(-s);
      case LegendreKind::spence: return special::spence_conjugate(s);
      case LegendreKind::box_barrier: {
        const double x = box_conj_grad(s);
        return s * x - value(x);
      }
      case LegendreKind::product: break;
    }
    return kInfinity;
  }

  double conj_hess(double s) const {
    switch (kind) {
      case LegendreKind::energy: return 1.0;
      case LegendreKind::von_neumann: return std::exp(s);
      case LegendreKind::burg: return 1.0 / (s * s);
      case LegendreKind::spence: return special::sigmoid(s);
      case LegendreKind::box_barrier: return 1.0 / hess(box_conj_grad(s));
      case LegendreKind::product: break;
    }
    return std::nan("");
  }

  // D(a, b) for a in the domain and b in the interior.
  double distance(double a, double b) const {
    switch (kind) {
      case LegendreKind::energy: return 0.5 * (a - b) * (a - b);
      case LegendreKind::von_neumann:
        if (a == 0.0) return b;
        return b * xlogx_gap((a - b) / b);
      case LegendreKind::burg: return itakura_saito_gap((a - b) / b);
      case LegendreKind::spence:
        if (a == 0.0) return std::max(0.0, b * grad_unchecked(b) - value(b));
        return special::spence_conjugate_distance(grad_unchecked(b), grad_unchecked(a));
      case LegendreKind::box_barrier: {
        double d = 0.5 * (a - b) * (a - b);
        if (std::isfinite(upper)) d += itakura_saito_gap((b - a) / (upper - b));
        if (std::isfinite(lower)) d += itakura_saito_gap((a - b) / (b - lower));
        return d;
      }
      case LegendreKind::product: break;
    }
    return kInfinity;
  }

  // D_{φ*}(a, b) for a, b in the interior of the conjugate domain.
  double conj_distance(double a, double b) const {
    switch (kind) {
      case LegendreKind::energy: return 0.5 * (a - b) * (a - b);
      case LegendreKind::von_neumann: return std::exp(b) * expm1_gap(a - b);
      case LegendreKind::burg: return itakura_saito_gap((a - b) / b);
      case LegendreKind::spence: return special::spence_conjugate_distance(a, b);
      case LegendreKind::box_barrier: return distance(box_conj_grad(b), box_conj_grad(a));
      case LegendreKind::product: break;
    }
    return kInfinity;
  }
};

}  // namespace detail

/// A separable Legendre function Φ(z) = Σᵢ φᵢ(zᵢ) drawn from the catalog
/// (energy, von Neumann, Burg, Spence, box barrier) or a product of such blocks.
///
/// Values are extended-real: evaluations outside dom Φ return +∞. Gradients
/// and Hessians are only defined on the interior and throw DomainError
/// elsewhere. The interior test is strict membership plus a finite gradient.
class LegendreFunction {
 public:
  static LegendreFunction energy(Index n) { return uniform(LegendreKind::energy, n); }
  static LegendreFunction von_neumann(Index n) { return uniform(LegendreKind::von_neumann, n); }
  static LegendreFunction burg(Index n) { return uniform(LegendreKind::burg, n); }
  static LegendreFunction spence(Index n) { return uniform(LegendreKind::spence, n); }

  /// ψ(x) = ½‖x‖² − Σ ln(uᵢ − xᵢ) − Σ ln(xᵢ − lᵢ); infinite bounds drop their term.
  static LegendreFunction box_barrier(const Vector& lower, const Vector& upper) {
    require_dimension(upper.size(), lower.size(), "box_barrier upper bound");
    LegendreFunction fn;
    fn.kind_ = LegendreKind::box_barrier;
    fn.coords_.resize(static_cast<std::size_t>(lower.size()));
    for (Index i = 0; i < lower.size(); ++i) {
      if (!(lower[i] < upper[i])) {
        throw std::invalid_argument("box_barrier: lower bound must be below upper bound at " +
                                    std::to_string(i));
      }
      fn.coords_[static_cast<std::size_t>(i)] = {LegendreKind::box_barrier, lower[i], upper[i]};
    }
    return fn;
  }

  static LegendreFunction product(const std::vector<LegendreFunction>& blocks) {
    LegendreFunction fn;
    fn.kind_ = LegendreKind::product;
    for (const auto& block : blocks) {
      fn.coords_.insert(fn.coords_.end(), block.coords_.begin(), block.coords_.end());
    }
    return fn;
  }

  LegendreKind kind() const { return kind_; }
  Index dimension() const { return static_cast<Index>(coords_.size()); }

  /// True when some coordinate has a finite domain bound.
  bool has_bounded_domain() const {
    return std::any_of(coords_.begin(), coords_.end(), [](const auto& c) {
      if (c.kind == LegendreKind::box_barrier) return std::isfinite(c.lower) || std::isfinite(c.upper);
      return c.kind != LegendreKind::energy;
    });
  }

  /// Self-concordance constant, when Φ is self-concordant: 0 for the energy,
  /// 1 for Burg and the box barrier. Entropies without one return nullopt.
  std::optional<double> self_concordance_modulus() const {
    double modulus = 0.0;
    for (const auto& c : coords_) {
      switch (c.kind) {
        case LegendreKind::energy: break;
        case LegendreKind::burg: modulus = 1.0; break;
        case LegendreKind::box_barrier:
          if (std::isfinite(c.lower) || std::isfinite(c.upper)) modulus = 1.0;
          break;
        default: return std::nullopt;
      }
    }
    return modulus;
  }

  /// Componentwise closure of dom Φ as lower/upper bound vectors.
  Vector lower_bounds() const {
    Vector l(dimension());
    for (Index i = 0; i < l.size(); ++i) {
      switch (coord(i).kind) {
        case LegendreKind::box_barrier: l[i] = coord(i).lower; break;
        case LegendreKind::von_neumann:
        case LegendreKind::burg:
        case LegendreKind::spence: l[i] = 0.0; break;
        default: l[i] = -kInfinity;
      }
    }
    return l;
  }
  Vector upper_bounds() const {
    Vector u(dimension());
    for (Index i = 0; i < u.size(); ++i) u[i] = coord(i).kind == LegendreKind::box_barrier ? coord(i).upper : kInfinity;
    return u;
  }

  bool in_domain(const Vector& z) const {
    if (z.size() != dimension()) return false;
    for (Index i = 0; i < z.size(); ++i) {
      if (!coord(i).in_domain(z[i])) return false;
    }
    return true;
  }

  bool in_interior(const Vector& z) const {
    if (z.size() != dimension()) return false;
    for (Index i = 0; i < z.size(); ++i) {
      if (!coord(i).in_interior(z[i])) return false;
    }
    return true;
  }

  bool in_conj_interior(const Vector& zstar) const {
    if (zstar.size() != dimension()) return false;
    for (Index i = 0; i < zstar.size(); ++i) {
      if (!coord(i).in_conj_interior(zstar[i])) return false;
    }
    return true;
  }

  double value(const Vector& z) const {
    require_dimension(z.size(), dimension(), "Legendre value");
    double v = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
      v += coord(i).value(z[i]);
      if (v == kInfinity) return kInfinity;
    }
    return v;
  }

  Vector grad(const Vector& z) const {
    check_interior(z, "gradient");
    Vector g(z.size());
    for (Index i = 0; i < z.size(); ++i) g[i] = coord(i).grad_unchecked(z[i]);
    return g;
  }

  /// ∇Φ*, the inverse of grad.
  Vector conj_grad(const Vector& zstar) const {
    require_dimension(zstar.size(), dimension(), "Legendre conjugate gradient");
    if (!in_conj_interior(zstar)) {
      throw DomainError("Legendre conjugate gradient: point outside int dom Φ*");
    }
    Vector z(zstar.size());
    for (Index i = 0; i < z.size(); ++i) z[i] = coord(i).conj_grad(zstar[i]);
    return z;
  }

  double conj_value(const Vector& zstar) const {
    require_dimension(zstar.size(), dimension(), "Legendre conjugate value");
    double v = 0.0;
    for (Index i = 0; i < zstar.size(); ++i) v += coord(i).conj_value(zstar[i]);
    return v;
  }

  /// Diagonal of ∇²Φ(z).
  Vector hess_diag(const Vector& z) const {
    check_interior(z, "Hessian");
    Vector h(z.size());
    for (Index i = 0; i < z.size(); ++i) h[i] = coord(i).hess(z[i]);
    return h;
  }

  Eigen::DiagonalMatrix<double, Eigen::Dynamic> hess(const Vector& z) const {
    return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(hess_diag(z));
  }

  /// Diagonal of ∇²Φ*(z*).
  Vector conj_hess_diag(const Vector& zstar) const {
    require_dimension(zstar.size(), dimension(), "Legendre conjugate Hessian");
    if (!in_conj_interior(zstar)) {
      throw DomainError("Legendre conjugate Hessian: point outside int dom Φ*");
    }
    Vector h(zstar.size());
    for (Index i = 0; i < h.size(); ++i) h[i] = coord(i).conj_hess(zstar[i]);
    return h;
  }

  /// D_Φ(z1, z2); +∞ unless z1 ∈ dom Φ and z2 ∈ int dom Φ.
  double bregman_distance(const Vector& z1, const Vector& z2) const {
    require_dimension(z1.size(), dimension(), "Bregman distance");
    require_dimension(z2.size(), dimension(), "Bregman distance");
    double d = 0.0;
    for (Index i = 0; i < z1.size(); ++i) {
      const auto& c = coord(i);
      if (!c.in_domain(z1[i]) || !c.in_interior(z2[i])) return kInfinity;
      d += std::max(0.0, c.distance(z1[i], z2[i]));
    }
    return d;
  }

  /// D_{Φ*}(a, b) = D_Φ(∇Φ*(b), ∇Φ*(a)).
  double conj_bregman_distance(const Vector& a, const Vector& b) const {
    require_dimension(a.size(), dimension(), "conjugate Bregman distance");
    require_dimension(b.size(), dimension(), "conjugate Bregman distance");
    double d = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
      const auto& c = coord(i);
      if (!c.in_conj_interior(a[i]) || !c.in_conj_interior(b[i])) return kInfinity;
      d += std::max(0.0, c.conj_distance(a[i], b[i]));
    }
    return d;
  }

  /// D_Φ(z1, ∇Φ*(mirror)), where the second point is given by its mirror
  /// coordinates. Stays finite when ∇Φ*(mirror) underflows to the boundary.
  double bregman_distance_to_mirror(const Vector& z1, const Vector& mirror) const {
    require_dimension(z1.size(), dimension(), "Bregman distance");
    require_dimension(mirror.size(), dimension(), "Bregman distance");
    double d = 0.0;
    for (Index i = 0; i < z1.size(); ++i) {
      const auto& c = coord(i);
      if (!c.in_domain(z1[i]) || !c.in_conj_interior(mirror[i])) return kInfinity;
      if (c.in_interior(z1[i])) {
        d += std::max(0.0, c.conj_distance(mirror[i], c.grad_unchecked(z1[i])));
      } else {
        // One-sided identity D(a, ∇φ*(s)) = φ(a) + φ*(s) − s·a.
        d += std::max(0.0, c.value(z1[i]) + c.conj_value(mirror[i]) - mirror[i] * z1[i]);
      }
    }
    return d;
  }

 private:
  static LegendreFunction uniform(LegendreKind kind, Index n) {
    if (n < 0) throw std::invalid_argument("Legendre function: negative dimension");
    LegendreFunction fn;
    fn.kind_ = kind;
    fn.coords_.assign(static_cast<std::size_t>(n), detail::ScalarLegendre{kind});
    return fn;
  }

  const detail::ScalarLegendre& coord(Index i) const { return coords_[static_cast<std::size_t>(i)]; }

  void check_interior(const Vector& z, const char* what) const {
    require_dimension(z.size(), dimension(), what);
    for (Index i = 0; i < z.size(); ++i) {
      if (!coord(i).in_interior(z[i])) {
        throw DomainError(std::string("Legendre ") + what + ": coordinate " +
                          std::to_string(i) + " outside int dom Φ (" +
                          to_string(coord(i).kind) + ")");
      }
    }
  }

  LegendreKind kind_ = LegendreKind::energy;
  std::vector<detail::ScalarLegendre> coords_;
};

/// Separable primal-dual geometry Φ(x, y) = ψ(x) + φ(y).
struct BregmanGeometry {
  LegendreFunction primal;
  LegendreFunction dual;
};

}  // namespace bpalm
