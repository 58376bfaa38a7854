#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "bpalm/core.hpp"

/// Scalar special functions shared by the Legendre catalog and the penalties.
namespace bpalm::special {

inline constexpr double kPiSquaredOverSix = std::numbers::pi * std::numbers::pi / 6.0;

namespace detail {

// Σ t^k / k², only called with |t| ≤ 1/2.
inline double dilog_series(double t) {
  double sum = 0.0;
  double power = t;
  for (int k = 1; k < 200; ++k) {
    const double term = power / (static_cast<double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    power *= t;
  }
  return sum;
}

}  // namespace detail

/// Real dilogarithm Li₂(x) for x ≤ 1, reduced onto |t| ≤ 1/2 by the
/// standard functional identities of the dilogarithm.
inline double dilog(double x) {
  if (x > 1.0) throw DomainError("dilog: argument above 1");
  if (x == 1.0) return kPiSquaredOverSix;
  if (x == 0.0) return 0.0;
  if (x < -1.0) {
    const double l = std::log(-x);
    return -kPiSquaredOverSix - 0.5 * l * l - dilog(1.0 / x);
  }
  if (x < 0.0) {
    const double l = std::log1p(-x);
    return -detail::dilog_series(x / (x - 1.0)) - 0.5 * l * l;
  }
  if (x > 0.5) {
    return kPiSquaredOverSix - std::log(x) * std::log1p(-x) -
           detail::dilog_series(1.0 - x);
  }
  return detail::dilog_series(x);
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// ln(eᵗ − 1) for t > 0.
inline double log_expm1(double t) {
  if (t > 30.0) return t + std::log1p(-std::exp(-t));
  return std::log(std::expm1(t));
}

inline double log_sum_exp(const Vector& u) {
  if (u.size() == 0) return -kInfinity;
  const double shift = u.maxCoeff();
  if (!std::isfinite(shift)) return shift;
  return shift + std::log((u.array() - shift).exp().sum());
}

inline Vector softmax(const Vector& u) {
  const double shift = u.maxCoeff();
  Vector e = (u.array() - shift).exp();
  return e / e.sum();
}

/// Spence entropy φ(t) = t²/2 + Li₂(e^{−t}) − π²/6 on t ≥ 0.
inline double spence_entropy(double t) {
  if (t < 0.0) return kInfinity;
  return 0.5 * t * t + dilog(std::exp(-t)) - kPiSquaredOverSix;
}

/// Conjugate of the Spence entropy, φ*(s) = −Li₂(−eˢ).
inline double spence_conjugate(double s) {
  if (s > 0.0) {
    // Inversion keeps the argument in [−1, 0) and avoids overflow of eˢ.
    return kPiSquaredOverSix + 0.5 * s * s + dilog(-std::exp(-s));
  }
  return -dilog(-std::exp(s));
}

/// Ten-point Gauss–Legendre rule on [lo, hi].
template <typename F>
double gauss_legendre_10(F&& f, double lo, double hi) {
  static constexpr std::array<double, 5> nodes{
      0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
      0.8650633666889845, 0.9739065285171717};
  static constexpr std::array<double, 5> weights{
      0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
      0.1494513491505806, 0.0666713443086881};
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sum += weights[i] * (f(mid + half * nodes[i]) + f(mid - half * nodes[i]));
  }
  return half * sum;
}

/// Bregman distance of the Spence conjugate, D_{φ*}(a, b) =
/// ∫_b^a (softplus(τ) − softplus(b)) dτ, without the cancellation of the
/// dilogarithm difference.
inline double spence_conjugate_distance(double a, double b) {
  const double d = a - b;
  if (d == 0.0) return 0.0;
  if (std::abs(d) < 1e-3) {
    const double p = sigmoid(b);
    const double q = 1.0 - p;
    const double d2 = d * d;
    return d2 * (p / 2.0 + d * (p * q / 6.0 +
                                d * (p * q * (1.0 - 2.0 * p) / 24.0 +
                                     d * p * q * (1.0 - 6.0 * p * q) / 120.0)));
  }
  const double base = softplus(b);
  auto integrand = [&](double tau) { return softplus(tau) - base; };
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(d))));
  const double h = d / pieces;
  double sum = 0.0;
  for (int i = 0; i < pieces; ++i) {
    sum += gauss_legendre_10(integrand, b + i * h, b + (i + 1) * h);
  }
  return std::max(sum, 0.0);
}

}  // namespace bpalm::special
