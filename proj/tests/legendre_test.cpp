#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bpalm/legendre.hpp"
#include "bpalm/special.hpp"
#include "support/random.hpp"

namespace {

using bpalm::DomainError;
using bpalm::kInfinity;
using bpalm::LegendreFunction;
using bpalm::Matrix;
using bpalm::Vector;
using bpalm::testing::Rng;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<bpalm::Index>(v.size()));
  bpalm::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

struct Geometry {
  std::string name;
  LegendreFunction fn;
  std::function<Vector(Rng&)> sample;
};

std::vector<Geometry> catalog(bpalm::Index n) {
  const Vector lo = Vector::LinSpaced(n, -2.0, -1.0);
  const Vector hi = Vector::LinSpaced(n, 1.0, 3.0);
  Vector half_lo = Vector::Constant(n, -kInfinity);
  half_lo[0] = 0.0;
  const Vector half_hi = Vector::Constant(n, 5.0);
  return {
      {"energy", LegendreFunction::energy(n), [n](Rng& r) { return r.vector(n, -5.0, 5.0); }},
      {"von_neumann", LegendreFunction::von_neumann(n), [n](Rng& r) { return r.vector(n, 0.01, 5.0); }},
      {"burg", LegendreFunction::burg(n), [n](Rng& r) { return r.vector(n, 0.05, 5.0); }},
      {"spence", LegendreFunction::spence(n), [n](Rng& r) { return r.vector(n, 0.01, 5.0); }},
      {"box_barrier", LegendreFunction::box_barrier(lo, hi),
       [lo, hi](Rng& r) {
         Vector z(lo.size());
         for (bpalm::Index i = 0; i < z.size(); ++i) {
           const double w = hi[i] - lo[i];
           z[i] = r.uniform(lo[i] + 0.01 * w, hi[i] - 0.01 * w);
         }
         return z;
       }},
      {"box_barrier_half_open", LegendreFunction::box_barrier(half_lo, half_hi),
       [n](Rng& r) {
         Vector z = r.vector(n, -4.0, 4.5);
         z[0] = r.uniform(0.02, 4.5);
         return z;
       }},
  };
}

TEST(LegendreValue, MatchesClosedForms) {
  EXPECT_DOUBLE_EQ(LegendreFunction::energy(1).value(vec({3.0})), 4.5);
  EXPECT_DOUBLE_EQ(LegendreFunction::von_neumann(1).value(vec({1.0})), -1.0);
  EXPECT_DOUBLE_EQ(LegendreFunction::spence(1).value(vec({0.0})), 0.0);
}

TEST(LegendreValue, IsInfiniteOutsideTheDomain) {
  EXPECT_EQ(LegendreFunction::von_neumann(1).value(vec({-0.1})), kInfinity);
  EXPECT_EQ(LegendreFunction::burg(1).value(vec({0.0})), kInfinity);
  EXPECT_EQ(LegendreFunction::spence(2).value(vec({1.0, -1.0})), kInfinity);
  EXPECT_EQ(LegendreFunction::box_barrier(vec({0.0}), vec({1.0})).value(vec({1.0})), kInfinity);
  EXPECT_DOUBLE_EQ(LegendreFunction::von_neumann(1).value(vec({0.0})), 0.0);
}

TEST(LegendreValue, SpenceMatchesQuadratureOfItsGradient) {
  // φ(t) = ∫₀ᵗ ln(e^τ − 1) dτ has an integrable log singularity at 0; split
  // off ln τ, which integrates to t ln t − t.
  const auto fn = LegendreFunction::spence(1);
  for (double t : {0.1, 0.7, 2.0, 6.0}) {
    const int pieces = 4000;
    const double h = t / pieces;
    double integral = t * std::log(t) - t;
    auto smooth = [](double tau) { return tau == 0.0 ? 0.0 : std::log(std::expm1(tau) / tau); };
    for (int i = 0; i < pieces; ++i) {
      const double a = i * h;
      integral += h / 6.0 * (smooth(a) + 4.0 * smooth(a + 0.5 * h) + smooth(a + h));
    }
    EXPECT_NEAR(fn.value(vec({t})), integral, 1e-9) << "t=" << t;
  }
}

TEST(LegendreGrad, MatchesClosedForms) {
  EXPECT_NEAR(LegendreFunction::von_neumann(1).grad(vec({std::numbers::e}))[0], 1.0, 1e-15);
  EXPECT_NEAR(LegendreFunction::spence(1).grad(vec({std::log(2.0)}))[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(LegendreFunction::burg(1).grad(vec({2.0}))[0], -0.5);
  const auto box = LegendreFunction::box_barrier(vec({0.0}), vec({2.0}));
  EXPECT_DOUBLE_EQ(box.grad(vec({0.5}))[0], 0.5 + 1.0 / 1.5 - 1.0 / 0.5);
}

TEST(LegendreGrad, ThrowsOffTheInterior) {
  EXPECT_THROW(LegendreFunction::von_neumann(1).grad(vec({0.0})), DomainError);
  EXPECT_THROW(LegendreFunction::spence(1).grad(vec({0.0})), DomainError);
  EXPECT_THROW(LegendreFunction::burg(1).grad(vec({-1.0})), DomainError);
  EXPECT_THROW(LegendreFunction::box_barrier(vec({0.0}), vec({1.0})).grad(vec({0.0})), DomainError);
  EXPECT_THROW(LegendreFunction::von_neumann(1).hess(vec({0.0})), DomainError);
}

TEST(LegendreGrad, DivergesTowardTheBoundary) {
  for (const auto& fn : {LegendreFunction::von_neumann(1), LegendreFunction::burg(1), LegendreFunction::spence(1)}) {
    double previous = 0.0;
    for (double t = 1e-1; t > 1e-12; t *= 1e-2) {
      const double g = std::abs(fn.grad(vec({t}))[0]);
      EXPECT_GT(g, previous);
      previous = g;
    }
    EXPECT_GT(previous, 20.0);
  }
  const auto box = LegendreFunction::box_barrier(vec({0.0}), vec({1.0}));
  EXPECT_GT(box.grad(vec({1.0 - 1e-9}))[0], 1e8);
  EXPECT_LT(box.grad(vec({1e-9}))[0], -1e8);
}

TEST(LegendreConjGrad, MatchesClosedForms) {
  EXPECT_NEAR(LegendreFunction::spence(1).conj_grad(vec({0.0}))[0], std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(LegendreFunction::von_neumann(1).conj_grad(vec({0.0}))[0], 1.0);
  EXPECT_DOUBLE_EQ(LegendreFunction::burg(1).conj_grad(vec({-4.0}))[0], 0.25);
  EXPECT_THROW(LegendreFunction::burg(1).conj_grad(vec({0.5})), DomainError);
}

TEST(LegendreHess, MatchesClosedForms) {
  const Vector z = vec({-1.0, 2.0, 7.0});
  EXPECT_TRUE(LegendreFunction::energy(3).hess_diag(z).isApprox(Vector::Ones(3)));
  EXPECT_DOUBLE_EQ(LegendreFunction::von_neumann(1).hess_diag(vec({2.0}))[0], 0.5);
  EXPECT_NEAR(LegendreFunction::spence(1).hess_diag(vec({std::log(2.0)}))[0], 2.0, 1e-14);
}

TEST(BregmanDistance, MatchesClosedForms) {
  EXPECT_NEAR(LegendreFunction::von_neumann(1).bregman_distance(vec({1.0}), vec({std::numbers::e})),
              std::numbers::e - 2.0, 1e-14);
  EXPECT_NEAR(LegendreFunction::burg(1).bregman_distance(vec({1.0}), vec({2.0})), std::log(2.0) - 0.5, 1e-15);
  for (const auto& g : catalog(3)) {
    Rng rng(7);
    const Vector z = g.sample(rng);
    EXPECT_EQ(g.fn.bregman_distance(z, z), 0.0) << g.name;
  }
}

TEST(BregmanDistance, IsInfiniteOffTheDomains) {
  const auto vn = LegendreFunction::von_neumann(1);
  EXPECT_EQ(vn.bregman_distance(vec({-1.0}), vec({1.0})), kInfinity);
  EXPECT_EQ(vn.bregman_distance(vec({1.0}), vec({0.0})), kInfinity);
  EXPECT_DOUBLE_EQ(vn.bregman_distance(vec({0.0}), vec({2.0})), 2.0);
}

TEST(BregmanDistance, MatchesTheDefiningFormulaAwayFromCancellation) {
  for (const auto& g : catalog(4)) {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const Vector a = g.sample(rng);
      const Vector b = g.sample(rng);
      const double direct = g.fn.value(a) - g.fn.value(b) - g.fn.grad(b).dot(a - b);
      EXPECT_NEAR(g.fn.bregman_distance(a, b), direct, 1e-9 * (1.0 + std::abs(direct))) << g.name;
    }
  }
}

TEST(LegendreProperties, RoundTripInverseHessianAndNonnegativity) {
  for (const auto& g : catalog(5)) {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
      const Vector z = g.sample(rng);
      const Vector back = g.fn.conj_grad(g.fn.grad(z));
      ASSERT_LE((back - z).norm(), 1e-10 * (1.0 + z.norm())) << g.name;

      const Vector product = g.fn.conj_hess_diag(g.fn.grad(z)).cwiseProduct(g.fn.hess_diag(z));
      ASSERT_LE((product - Vector::Ones(z.size())).cwiseAbs().maxCoeff(), 1e-8) << g.name;

      const Vector w = g.sample(rng);
      const double d = g.fn.bregman_distance(z, w);
      ASSERT_GT(d, 0.0) << g.name;
      ASSERT_GE(g.fn.conj_bregman_distance(g.fn.grad(z), g.fn.grad(w)), 0.0) << g.name;
    }
  }
}

TEST(LegendreProperties, GradientAndHessianMatchCentralDifferences) {
  for (const auto& g : catalog(3)) {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
      const Vector z = g.sample(rng);
      const Vector grad = g.fn.grad(z);
      const Vector hess = g.fn.hess_diag(z);
      for (bpalm::Index j = 0; j < z.size(); ++j) {
        const double h = 1e-5 * std::max(1e-2, std::abs(z[j]));
        Vector zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const double fd_grad = (g.fn.value(zp) - g.fn.value(zm)) / (2.0 * h);
        const double fd_hess = (g.fn.grad(zp)[j] - g.fn.grad(zm)[j]) / (2.0 * h);
        EXPECT_NEAR(fd_grad, grad[j], 1e-6 * std::max(1.0, std::abs(grad[j]))) << g.name;
        EXPECT_NEAR(fd_hess, hess[j], 1e-6 * std::max(1.0, std::abs(hess[j]))) << g.name;
      }
    }
  }
}

TEST(LegendreProperties, SpenceConjugateIdentityWithQuadratureConjugate) {
  // φ*(s) = ∫₀ˢ ln(1 + e^τ) dτ + π²/12, integrated here by composite Simpson.
  auto conjugate = [](double s) {
    const int pieces = 2000;
    const double h = s / pieces;
    double sum = 0.0;
    auto f = [](double tau) { return bpalm::special::softplus(tau); };
    for (int i = 0; i < pieces; ++i) {
      const double a = i * h;
      sum += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
    }
    return sum + std::numbers::pi * std::numbers::pi / 12.0;
  };
  const auto fn = LegendreFunction::spence(1);
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const double t = rng.uniform(0.01, 8.0);
    const double s = fn.grad(vec({t}))[0];
    EXPECT_NEAR(fn.value(vec({t})) + conjugate(s) - t * s, 0.0, 1e-8) << "t=" << t;
    EXPECT_NEAR(fn.conj_value(vec({s})), conjugate(s), 1e-8);
  }
}

TEST(LegendreProperties, ConjugateDistanceFlipsArguments) {
  for (const auto& g : catalog(3)) {
    Rng rng(19);
    for (int i = 0; i < 200; ++i) {
      const Vector a = g.fn.grad(g.sample(rng));
      const Vector b = g.fn.grad(g.sample(rng));
      const double lhs = g.fn.conj_bregman_distance(a, b);
      const double rhs = g.fn.bregman_distance(g.fn.conj_grad(b), g.fn.conj_grad(a));
      EXPECT_NEAR(lhs, rhs, 1e-9 * (1.0 + rhs)) << g.name;
    }
  }
}

TEST(LegendreProperties, MirrorDistanceAgreesWithPrimalDistance) {
  const auto fn = LegendreFunction::von_neumann(3);
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const Vector a = rng.vector(3, 0.0, 4.0);
    const Vector b = rng.vector(3, 0.1, 4.0);
    EXPECT_NEAR(fn.bregman_distance_to_mirror(a, fn.grad(b)), fn.bregman_distance(a, b), 1e-12);
  }
  // A multiplier that underflows to zero still has a finite distance through
  // its mirror coordinate.
  EXPECT_TRUE(std::isfinite(fn.bregman_distance_to_mirror(vec({1.0, 1.0, 1.0}), vec({-800.0, 0.0, 0.0}))));
}

TEST(LegendreProduct, DecomposesBlockwise) {
  const auto vn = LegendreFunction::von_neumann(2);
  const auto en = LegendreFunction::energy(1);
  const auto box = LegendreFunction::box_barrier(vec({-1.0}), vec({1.0}));
  const auto prod = LegendreFunction::product({vn, en, box});
  ASSERT_EQ(prod.dimension(), 4);
  EXPECT_EQ(prod.kind(), bpalm::LegendreKind::product);
  Rng rng(29);
  for (int i = 0; i < 50; ++i) {
    Vector z(4);
    z << rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-0.9, 0.9);
    Vector w(4);
    w << rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-0.9, 0.9);
    const double parts = vn.value(z.head(2)) + en.value(z.segment(2, 1)) + box.value(z.tail(1));
    EXPECT_NEAR(prod.value(z), parts, 1e-12);
    Vector g(4);
    g << vn.grad(z.head(2)), en.grad(z.segment(2, 1)), box.grad(z.tail(1));
    EXPECT_TRUE(prod.grad(z).isApprox(g, 1e-14));
    const double d = vn.bregman_distance(z.head(2), w.head(2)) + en.bregman_distance(z.segment(2, 1), w.segment(2, 1)) +
                     box.bregman_distance(z.tail(1), w.tail(1));
    EXPECT_NEAR(prod.bregman_distance(z, w), d, 1e-12);
  }
  EXPECT_EQ(prod.value(vec({1.0, -1.0, 0.0, 0.0})), kInfinity);
  EXPECT_TRUE(prod.has_bounded_domain());
}

TEST(LegendreMetadata, SelfConcordanceAndBounds) {
  EXPECT_EQ(LegendreFunction::energy(2).self_concordance_modulus(), 0.0);
  EXPECT_TRUE(LegendreFunction::box_barrier(vec({0.0}), vec({1.0})).self_concordance_modulus().has_value());
  EXPECT_FALSE(LegendreFunction::von_neumann(2).self_concordance_modulus().has_value());
  EXPECT_FALSE(LegendreFunction::energy(2).has_bounded_domain());
  EXPECT_THROW(LegendreFunction::box_barrier(vec({1.0}), vec({1.0})), std::invalid_argument);
}

}  // namespace
