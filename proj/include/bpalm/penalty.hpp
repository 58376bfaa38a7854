#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "bpalm/core.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/problem.hpp"
#include "bpalm/special.hpp"

namespace bpalm {

enum class PenaltyForm {
  sumexp,
  logsumexp_plus_one,
  softplus_integral,
  half_square,
  max_half_square,
  huber
};

inline const char* to_string(PenaltyForm form) {
  switch (form) {
    case PenaltyForm::sumexp: return "sumexp";
    case PenaltyForm::logsumexp_plus_one: return "logsumexp_plus_one";
    case PenaltyForm::softplus_integral: return "softplus_integral";
    case PenaltyForm::half_square: return "half_square";
    case PenaltyForm::max_half_square: return "max_half_square";
    case PenaltyForm::huber: return "huber";
  }
  return "unknown";
}

struct PenaltyModuli {
  double alpha = 0.0;
  std::optional<double> beta;
};

/// Marginalized dual penalty P = φ* □ (σ⋆g) for the supported pairings of a
/// nonsmooth term with a dual Legendre kind. Every supported form is
/// independent of σ because g* is an indicator (or zero) in each pairing.
///
/// grad(u) is the multiplier update map u ↦ y⁺. mirror(u) returns ∇φ(y⁺)
/// directly from u, which stays finite where y⁺ itself underflows.
class DualPenalty {
 public:
  static DualPenalty for_pairing(NonsmoothKind g, LegendreKind dual) {
    DualPenalty p;
    p.g_ = g;
    p.dual_ = dual;
    if (g == NonsmoothKind::nonpositive && dual == LegendreKind::von_neumann) {
      p.form_ = PenaltyForm::sumexp;
    } else if (g == NonsmoothKind::vecmax && dual == LegendreKind::von_neumann) {
      p.form_ = PenaltyForm::logsumexp_plus_one;
    } else if (g == NonsmoothKind::nonpositive && dual == LegendreKind::spence) {
      p.form_ = PenaltyForm::softplus_integral;
    } else if (g == NonsmoothKind::zero && dual == LegendreKind::energy) {
      p.form_ = PenaltyForm::half_square;
    } else if (g == NonsmoothKind::nonpositive && dual == LegendreKind::energy) {
      p.form_ = PenaltyForm::max_half_square;
    } else if (g == NonsmoothKind::one_norm && dual == LegendreKind::energy) {
      p.form_ = PenaltyForm::huber;
    } else {
      throw UnsupportedError(std::string("no penalty for nonsmooth term '") + to_string(g) +
                             "' with dual geometry '" + to_string(dual) + "'");
    }
    return p;
  }

  PenaltyForm form() const { return form_; }
  NonsmoothKind nonsmooth_kind() const { return g_; }
  LegendreKind dual_kind() const { return dual_; }

  double value(const Vector& u) const {
    switch (form_) {
      case PenaltyForm::sumexp: return u.array().exp().sum();
      case PenaltyForm::logsumexp_plus_one: return special::log_sum_exp(u) + 1.0;
      case PenaltyForm::softplus_integral: {
        double total = 0.0;
        for (Index i = 0; i < u.size(); ++i) total += special::spence_conjugate(u[i]);
        return total;
      }
      case PenaltyForm::half_square: return 0.5 * u.squaredNorm();
      case PenaltyForm::max_half_square: return 0.5 * u.cwiseMax(0.0).squaredNorm();
      case PenaltyForm::huber: {
        double total = 0.0;
        for (Index i = 0; i < u.size(); ++i) {
          const double a = std::abs(u[i]);
          total += a <= 1.0 ? 0.5 * a * a : a - 0.5;
        }
        return total;
      }
    }
    return kInfinity;
  }

  Vector grad(const Vector& u) const {
    switch (form_) {
      case PenaltyForm::sumexp: return u.array().exp().matrix();
      case PenaltyForm::logsumexp_plus_one: return special::softmax(u);
      case PenaltyForm::softplus_integral: return u.unaryExpr([](double t) { return special::softplus(t); });
      case PenaltyForm::half_square: return u;
      case PenaltyForm::max_half_square: return u.cwiseMax(0.0);
      case PenaltyForm::huber: return u.cwiseMax(-1.0).cwiseMin(1.0);
    }
    return u;
  }

  /// Second derivative; kinked forms take the value 1 at their kinks.
  Matrix hess(const Vector& u) const {
    const Index m = u.size();
    Matrix h = Matrix::Zero(m, m);
    switch (form_) {
      case PenaltyForm::sumexp: h.diagonal() = u.array().exp().matrix(); break;
      case PenaltyForm::logsumexp_plus_one: {
        const Vector s = special::softmax(u);
        h = -s * s.transpose();
        h.diagonal() += s;
        break;
      }
      case PenaltyForm::softplus_integral:
        for (Index i = 0; i < m; ++i) h(i, i) = special::sigmoid(u[i]);
        break;
      case PenaltyForm::half_square: h.diagonal().setOnes(); break;
      case PenaltyForm::max_half_square:
        for (Index i = 0; i < m; ++i) h(i, i) = u[i] >= 0.0 ? 1.0 : 0.0;
        break;
      case PenaltyForm::huber:
        for (Index i = 0; i < m; ++i) h(i, i) = std::abs(u[i]) <= 1.0 ? 1.0 : 0.0;
        break;
    }
    return h;
  }

  /// ∇φ(grad(u)).
  Vector mirror(const Vector& u) const {
    switch (form_) {
      case PenaltyForm::sumexp:
      case PenaltyForm::softplus_integral: return u;
      case PenaltyForm::logsumexp_plus_one: return (u.array() - special::log_sum_exp(u)).matrix();
      default: return grad(u);
    }
  }

  /// Bare moduli of P: α is the quasi-self-concordance constant, β the
  /// Lipschitz constant of the gradient when one exists.
  PenaltyModuli moduli(double sigma) const {
    if (!(sigma > 0.0)) throw std::invalid_argument("penalty moduli need sigma > 0");
    switch (form_) {
      case PenaltyForm::sumexp: return {1.0, std::nullopt};
      case PenaltyForm::logsumexp_plus_one: return {2.0, 1.0};
      case PenaltyForm::softplus_integral: return {1.0, 1.0};
      case PenaltyForm::half_square:
      case PenaltyForm::max_half_square:
      case PenaltyForm::huber: return {0.0, 1.0};
    }
    return {};
  }

 private:
  PenaltyForm form_ = PenaltyForm::half_square;
  NonsmoothKind g_ = NonsmoothKind::zero;
  LegendreKind dual_ = LegendreKind::energy;
};

}  // namespace bpalm
