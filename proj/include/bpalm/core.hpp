#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace bpalm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Extended-real +∞. Never replaced by a large finite sentinel.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// A point lies outside the set where an operation is defined (for example a
/// gradient requested on the boundary of a Legendre domain).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The Newton system could not be factorized as symmetric positive definite.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested evaluation has no implementation for this variant.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Required moduli for an iteration-count formula are missing.
class InvalidRegimeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No step size in the backtracking sequence satisfied the regime bound.
class BisectionFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dimension(Index got, Index expected, const char* what) {
  if (got != expected) {
    throw std::invalid_argument(std::string(what) + ": dimension " +
                                std::to_string(got) + ", expected " +
                                std::to_string(expected));
  }
}

}  // namespace bpalm
