// Ground-truth synthetic BOLD data following the rank-1 signal model
//   y = X (beta* (x) h*) + Z w* + sigma * white noise.
#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"
#include "r1glm/hrf_basis.hpp"
#include "r1glm/rank_one.hpp"

namespace r1glm {

struct TrueHrfSpec {
  enum class Mode {
    basis,   // h* in the span of a basis (3hrf, fir or fixed)
    jitter,  // double gamma with time-to-peak drawn from [peak_min, peak_max]
  };
  Mode mode = Mode::basis;
  BasisKind basis = BasisKind::three_hrf;
  Index fir_length = 20;
  /// Fixed h* (basis coefficients). Empty: drawn per voxel.
  Vector coefficients;
  /// 3hrf draws: derivative coefficients uniform in [-spread, spread].
  double derivative_spread = 0.3;
  /// Time-to-peak interval for jitter mode and for drawn FIR truths.
  double peak_min = 4.5;
  double peak_max = 5.5;
};

struct SynthConfig {
  Index scans = 200;
  double tr = 1.0;
  int conditions = 5;
  int events_per_condition = 4;
  int spacing_scans = 4;  // events sit on a grid of this many scans
  TrueHrfSpec hrf;
  double beta_mean = 1.0;
  double beta_sd = 0.5;
  std::optional<Vector> fixed_beta;  // overrides the beta distribution
  /// One drawn beta for all conditions. This is the only noiseless setting
  /// in which the separate-design model (rest activation r_i) is exact.
  bool shared_beta = false;
  double noise_sigma = 0.0;
  double drift_amplitude = 0.0;  // per-sample RMS of the drift term
  Index drift_order = 3;
  std::uint64_t seed = 1;

  void validate() const {
    require(scans >= 2, "scans must be >= 2");
    require(std::isfinite(tr) && tr > 0.0, "TR must be positive");
    require(conditions >= 1, "conditions must be >= 1");
    require(events_per_condition >= 1, "events_per_condition must be >= 1");
    require(spacing_scans >= 1, "spacing_scans must be >= 1");
    require(noise_sigma >= 0.0, "noise sigma must be >= 0");
    require(drift_amplitude >= 0.0, "drift amplitude must be >= 0");
    require(drift_order >= 0 && drift_order < scans, "drift order must be in [0, scans)");
    require(hrf.peak_min > 1.0 && hrf.peak_min <= hrf.peak_max, "invalid time-to-peak interval");
    require(!fixed_beta || fixed_beta->size() == conditions, "fixed_beta must have one entry per condition");
  }
};

struct SyntheticVoxel {
  Vector y;
  VoxelFit truth;
  EventTable events;
};

struct SyntheticDataset {
  Matrix y;  // scans x voxels
  std::vector<VoxelFit> truths;
  EventTable events;
};

/// Continuous time-to-peak of the double gamma with the given peak delay.
inline double double_gamma_time_to_peak(double peak_delay, double undershoot_delay = 16.0) {
  DoubleGammaParams p;
  p.peak_delay = peak_delay;
  p.undershoot_delay = undershoot_delay;
  double lo = 0.0;
  double hi = peak_delay + 2.0;
  const double ratio = 0.5 * (3.0 - std::sqrt(5.0));
  double a = lo + ratio * (hi - lo);
  double b = hi - ratio * (hi - lo);
  double fa = double_gamma(a, p);
  double fb = double_gamma(b, p);
  while (hi - lo > 1e-10) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = hi - ratio * (hi - lo);
      fb = double_gamma(b, p);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = lo + ratio * (hi - lo);
      fa = double_gamma(a, p);
    }
  }
  return 0.5 * (lo + hi);
}

/// Peak delay whose double gamma peaks at `time_to_peak` seconds.
inline double peak_delay_for(double time_to_peak, double undershoot_delay = 16.0) {
  double lo = time_to_peak + 0.5;
  double hi = time_to_peak + 4.0;
  for (int i = 0; i < 100 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (double_gamma_time_to_peak(mid, undershoot_delay) < time_to_peak ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

inline EventTable draw_events(const SynthConfig &cfg, std::mt19937_64 &rng) {
  const Index slots = (cfg.scans - 1) / cfg.spacing_scans + 1;
  const Index total = static_cast<Index>(cfg.conditions) * cfg.events_per_condition;
  require(total <= slots, "event schedule does not fit: " + std::to_string(total) +
                              " events but only " + std::to_string(slots) + " slots");
  std::vector<Index> slot(slots);
  std::iota(slot.begin(), slot.end(), Index{0});
  std::shuffle(slot.begin(), slot.end(), rng);
  slot.resize(total);
  std::sort(slot.begin(), slot.end());
  std::vector<int> labels;
  labels.reserve(total);
  for (int j = 0; j < cfg.conditions; ++j)
    for (int e = 0; e < cfg.events_per_condition; ++e) labels.push_back(j);
  std::shuffle(labels.begin(), labels.end(), rng);
  EventTable table;
  table.conditions = cfg.conditions;
  for (Index i = 0; i < total; ++i)
    table.events.push_back({static_cast<double>(slot[i] * cfg.spacing_scans) * cfg.tr, labels[i], 0});
  table.normalize();
  return table;
}

/// Basis the truth lives in. Jittered truths use a one-column basis holding
/// the voxel's own HRF, so they are built per voxel.
inline BasisSet truth_basis(const SynthConfig &cfg) {
  return make_basis(cfg.hrf.basis, cfg.tr, cfg.hrf.fir_length);
}

inline Vector sampled_double_gamma(double peak_delay, double dt, Index length) {
  DoubleGammaParams p;
  p.peak_delay = peak_delay;
  Vector v(length);
  for (Index i = 0; i < length; ++i) v[i] = double_gamma(static_cast<double>(i) * dt, p);
  return v / v.maxCoeff();
}

struct VoxelTruthBasis {
  BasisSet basis;
  Vector h;
  Vector params;
};

inline VoxelTruthBasis draw_truth_hrf(const SynthConfig &cfg, const BasisSet &shared,
                                      std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> peak(cfg.hrf.peak_min, cfg.hrf.peak_max);
  VoxelTruthBasis t;
  if (cfg.hrf.mode == TrueHrfSpec::Mode::jitter) {
    const double delay = peak_delay_for(peak(rng));
    const Index length = detail::grid_length(cfg.tr, kDefaultHrfDuration);
    t.basis.kind = BasisKind::fixed;
    t.basis.dt = cfg.tr;
    t.basis.matrix = sampled_double_gamma(delay, cfg.tr, length);
    t.basis.reference = sample_reference_hrf(cfg.tr, kDefaultHrfDuration);
    t.h = Vector::Ones(1);
    t.params = Eigen::Vector2d(delay, 16.0);
    return t;
  }
  t.basis = shared;
  if (cfg.hrf.coefficients.size() > 0) {
    require(cfg.hrf.coefficients.size() == shared.size(), "true HRF coefficients do not match the basis");
    t.h = cfg.hrf.coefficients;
  } else {
    switch (shared.kind) {
      case BasisKind::fixed: t.h = Vector::Ones(1); break;
      case BasisKind::three_hrf: {
        std::uniform_real_distribution<double> spread(-cfg.hrf.derivative_spread, cfg.hrf.derivative_spread);
        t.h = Vector(3);
        t.h[0] = 1.0;
        t.h[1] = spread(rng);
        t.h[2] = spread(rng);
        break;
      }
      case BasisKind::fir: {
        const double delay = peak_delay_for(peak(rng));
        t.h = sampled_double_gamma(delay, cfg.tr, shared.size());
        t.params = Eigen::Vector2d(delay, 16.0);
        break;
      }
    }
  }
  // Canonical scale and sign: ||Bh*||_inf = 1, <Bh*, h_ref> > 0.
  const Vector course = shared.matrix * t.h;
  const double scale = course.cwiseAbs().maxCoeff() * sign_of(course.dot(shared.reference.samples));
  require(scale != 0.0, "true HRF is identically zero");
  t.h /= scale;
  return t;
}

inline SyntheticVoxel draw_voxel(const SynthConfig &cfg, const EventTable &events,
                                 const BasisSet &shared, const NuisanceMatrix &drift,
                                 std::uint64_t voxel_seed) {
  std::mt19937_64 rng(voxel_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VoxelTruthBasis t = draw_truth_hrf(cfg, shared, rng);

  Vector beta(cfg.conditions);
  if (cfg.fixed_beta) beta = *cfg.fixed_beta;
  else if (cfg.shared_beta) beta.setConstant(cfg.beta_mean + cfg.beta_sd * normal(rng));
  else
    for (auto &b : beta) b = cfg.beta_mean + cfg.beta_sd * normal(rng);

  const Index q = drift.columns();
  const double drift_scale = q > 0 ? cfg.drift_amplitude * std::sqrt(static_cast<double>(cfg.scans) / q) : 0.0;
  Vector omega(q);
  for (auto &w : omega) w = drift_scale * normal(rng);

  const DesignMatrix x = build_design(events, t.basis, cfg.tr, cfg.scans);
  Vector y = apply_kron(x.matrix, beta, t.h);
  if (q > 0) y += drift.matrix * omega;
  if (cfg.noise_sigma > 0.0)
    for (Index i = 0; i < y.size(); ++i) y[i] += cfg.noise_sigma * normal(rng);

  SyntheticVoxel out;
  out.y = std::move(y);
  out.truth.h = t.h;
  out.truth.hrf = {t.basis.matrix * t.h, t.basis.dt};
  out.truth.beta = beta;
  out.truth.omega = omega;
  out.truth.params = t.params;
  out.truth.converged = true;
  out.events = events;
  return out;
}

}  // namespace detail

/// V voxels sharing one event schedule; voxel v draws its HRF, betas, drift
/// and noise from the stream seeded by mix_seed(seed, v).
inline SyntheticDataset generate_dataset(const SynthConfig &cfg, Index voxels) {
  cfg.validate();
  require(voxels >= 1, "voxel count must be >= 1");
  std::mt19937_64 event_rng(cfg.seed);
  SyntheticDataset out;
  out.events = detail::draw_events(cfg, event_rng);
  const BasisSet shared = detail::truth_basis(cfg);
  const NuisanceMatrix drift =
      cfg.drift_amplitude > 0.0 ? build_drift(cfg.scans, cfg.drift_order) : NuisanceMatrix::empty(cfg.scans);
  out.y.resize(cfg.scans, voxels);
  out.truths.reserve(voxels);
  for (Index v = 0; v < voxels; ++v) {
    auto voxel = detail::draw_voxel(cfg, out.events, shared, drift, mix_seed(cfg.seed, static_cast<std::uint64_t>(v)));
    out.y.col(v) = voxel.y;
    out.truths.push_back(std::move(voxel.truth));
  }
  return out;
}

/// Single voxel; identical to voxel 0 of generate_dataset(cfg, 1).
inline SyntheticVoxel generate_voxel(const SynthConfig &cfg) {
  SyntheticDataset d = generate_dataset(cfg, 1);
  return {d.y.col(0), std::move(d.truths.front()), std::move(d.events)};
}

}  // namespace r1glm
