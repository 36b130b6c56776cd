// Common aliases, error types and small numeric helpers shared by every module.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace r1glm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A score (correlation, rank statistic) is not defined for the given input,
/// e.g. one side has zero variance.
class UndefinedScore : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A hypothesis test has no information to work with (all differences zero,
/// pooled proportion at 0 or 1).
class DegenerateTest : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline void require(bool condition, const std::string &message) {
  if (!condition) throw std::invalid_argument(message);
}

/// Standard normal upper tail, P(Z > x).
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Standard normal CDF, P(Z <= x).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

/// splitmix64 finalizer; derives independent per-index seeds from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace r1glm
