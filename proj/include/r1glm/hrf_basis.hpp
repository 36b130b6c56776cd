// Reference HRF sampling and the three basis sets (fixed, 3HRF, FIR).
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "r1glm/core.hpp"

namespace r1glm {

/// An HRF evaluated on the regular grid t = 0, dt, 2dt, ...
struct SampledHrf {
  Vector samples;
  double dt = 1.0;

  Index length() const { return samples.size(); }
};

enum class BasisKind { fixed, three_hrf, fir };

inline std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::fixed: return "fixed";
    case BasisKind::three_hrf: return "3hrf";
    case BasisKind::fir: return "fir";
  }
  return "?";
}

inline BasisKind parse_basis_kind(std::string_view name) {
  if (name == "fixed") return BasisKind::fixed;
  if (name == "3hrf") return BasisKind::three_hrf;
  if (name == "fir") return BasisKind::fir;
  throw std::invalid_argument("unknown basis kind '" + std::string(name) +
                              "' (expected fixed, 3hrf or fir)");
}

/// L x d matrix of basis waveforms sampled every `dt` seconds. `reference`
/// is the canonical HRF on the same grid; rank-1 fits use it to fix the
/// sign of the estimated HRF.
struct BasisSet {
  Matrix matrix;
  BasisKind kind = BasisKind::fixed;
  double dt = 1.0;
  SampledHrf reference;

  Index length() const { return matrix.rows(); }
  Index size() const { return matrix.cols(); }
};

/// Parameters of the double-gamma canonical HRF. Delays are gamma shape
/// parameters expressed in seconds (shape = delay / dispersion, scale =
/// dispersion); with the defaults the response peaks at 5 s.
struct DoubleGammaParams {
  double peak_delay = 6.0;
  double undershoot_delay = 16.0;
  double peak_dispersion = 1.0;
  double undershoot_dispersion = 1.0;
  double undershoot_ratio = 6.0;
  double onset = 0.0;
};

inline constexpr double kDefaultHrfDuration = 32.0;
inline constexpr double kTemporalDerivativeShift = 1.0;
inline constexpr double kDispersionDerivativeStep = 0.01;

/// Gamma density with the given shape and scale; zero for t <= 0.
inline double gamma_density(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  const double x = t / scale;
  return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape)) / scale;
}

/// Unnormalized double-gamma HRF at time t (seconds).
inline double double_gamma(double t, const DoubleGammaParams &p = {}) {
  const double u = t - p.onset;
  return gamma_density(u, p.peak_delay / p.peak_dispersion, p.peak_dispersion) -
         gamma_density(u, p.undershoot_delay / p.undershoot_dispersion,
                       p.undershoot_dispersion) /
             p.undershoot_ratio;
}

namespace detail {

inline Index grid_length(double dt, double duration) {
  return static_cast<Index>(std::floor(duration / dt + 1e-9)) + 1;
}

inline void check_grid(double dt, double duration) {
  require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
  require(std::isfinite(duration) && duration > 0.0, "duration must be positive");
  require(duration >= 2.0 * dt, "duration must cover at least two samples");
}

inline Vector sample(double dt, Index length, const DoubleGammaParams &p) {
  Vector out(length);
  for (Index i = 0; i < length; ++i) out[i] = double_gamma(static_cast<double>(i) * dt, p);
  return out;
}

/// Divides by max|v| keeping signs. Zero vectors are returned unchanged.
inline Vector peak_normalized(const Vector &v) {
  const double peak = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return peak > 0.0 ? Vector(v / peak) : v;
}

inline SampledHrf canonical_on_grid(double dt, Index length) {
  return {peak_normalized(sample(dt, length, {})), dt};
}

}  // namespace detail

/// Canonical double-gamma HRF on t = 0, dt, ..., duration, scaled so that its
/// maximum sample is exactly 1.
inline SampledHrf sample_reference_hrf(double dt, double duration = kDefaultHrfDuration) {
  detail::check_grid(dt, duration);
  const Vector raw = detail::sample(dt, detail::grid_length(dt, duration), {});
  return {raw / raw.maxCoeff(), dt};
}

inline BasisSet make_fixed_basis(double dt, double duration = kDefaultHrfDuration) {
  BasisSet basis;
  basis.reference = sample_reference_hrf(dt, duration);
  basis.matrix = basis.reference.samples;
  basis.kind = BasisKind::fixed;
  basis.dt = dt;
  return basis;
}

/// Reference HRF plus its temporal derivative (backward difference with a
/// 1 s shift) and dispersion derivative (forward difference over the
/// response dispersion, step 0.01). Each column has max|.| = 1.
inline BasisSet make_3hrf_basis(double dt, double duration = kDefaultHrfDuration) {
  detail::check_grid(dt, duration);
  const Index length = detail::grid_length(dt, duration);
  const Vector raw = detail::sample(dt, length, {});
  const double scale = raw.maxCoeff();

  DoubleGammaParams shifted;
  shifted.onset = kTemporalDerivativeShift;
  DoubleGammaParams dispersed;
  dispersed.peak_dispersion += kDispersionDerivativeStep;

  const Vector reference = raw / scale;
  const Vector temporal =
      (reference - detail::sample(dt, length, shifted) / scale) / kTemporalDerivativeShift;
  const Vector dispersion =
      (detail::sample(dt, length, dispersed) / scale - reference) / kDispersionDerivativeStep;

  BasisSet basis;
  basis.kind = BasisKind::three_hrf;
  basis.dt = dt;
  basis.reference = {reference, dt};
  basis.matrix.resize(length, 3);
  basis.matrix.col(0) = reference;
  basis.matrix.col(1) = detail::peak_normalized(temporal);
  basis.matrix.col(2) = detail::peak_normalized(dispersion);
  return basis;
}

/// Stick-function basis: the identity of order `size`, one column per lag.
inline BasisSet make_fir_basis(Index size, double dt = 1.0) {
  require(size >= 1, "FIR basis size must be at least 1");
  require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
  BasisSet basis;
  basis.kind = BasisKind::fir;
  basis.dt = dt;
  basis.matrix = Matrix::Identity(size, size);
  basis.reference = detail::canonical_on_grid(dt, size);
  return basis;
}

/// Builds any of the three kinds. `fir_length` is only used for FIR; the
/// smooth bases span `duration` seconds.
inline BasisSet make_basis(BasisKind kind, double dt, Index fir_length,
                           double duration = kDefaultHrfDuration) {
  switch (kind) {
    case BasisKind::fixed: return make_fixed_basis(dt, duration);
    case BasisKind::three_hrf: return make_3hrf_basis(dt, duration);
    case BasisKind::fir: return make_fir_basis(fir_length, dt);
  }
  throw std::invalid_argument("unknown basis kind");
}

/// The sample of largest magnitude, sign included. First occurrence wins ties.
inline double hrf_peak_amplitude(std::span<const double> samples) {
  require(!samples.empty(), "peak amplitude of an empty HRF");
  double best = samples[0];
  for (double v : samples)
    if (std::abs(v) > std::abs(best)) best = v;
  return best;
}

inline double hrf_peak_amplitude(const Vector &samples) {
  return hrf_peak_amplitude(std::span<const double>(samples.data(), samples.size()));
}

inline double hrf_peak_amplitude(const SampledHrf &h) { return hrf_peak_amplitude(h.samples); }

}  // namespace r1glm
