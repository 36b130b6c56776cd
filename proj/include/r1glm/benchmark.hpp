// Encoding benchmark over the 10-method grid.
//
// Synthetic session: several runs, each presenting its own set of conditions
// (stimuli). Every condition has a feature vector; each voxel's activation is
// linear in the features and its HRF peaks at a voxel-specific time. Each
// method is fitted run by run. In leave-one-run-out folds a ridge model maps
// features to the method's betas on the training runs, predicts the held-out
// betas, and the predicted BOLD (predicted betas convolved with the method's
// HRF) is correlated with the measured held-out BOLD.
#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"
#include "r1glm/eval.hpp"
#include "r1glm/hrf_basis.hpp"
#include "r1glm/savgol.hpp"
#include "r1glm/synth.hpp"
#include "r1glm/volume.hpp"

namespace r1glm {

struct MethodSpec {
  Method method;
  BasisKind basis;

  std::string name() const { return to_string(method) + "-" + to_string(basis); }
};

/// {GLM, GLMS} x {fixed, 3hrf, fir} and {R1-GLM, R1-GLMS} x {3hrf, fir}. Rank-1
/// with the fixed basis is plain GLM, so it is not listed twice.
inline std::vector<MethodSpec> method_grid() {
  std::vector<MethodSpec> out;
  for (Method m : {Method::glm, Method::glms})
    for (BasisKind b : {BasisKind::fixed, BasisKind::three_hrf, BasisKind::fir}) out.push_back({m, b});
  for (Method m : {Method::r1glm, Method::r1glms})
    for (BasisKind b : {BasisKind::three_hrf, BasisKind::fir}) out.push_back({m, b});
  return out;
}

struct BenchmarkConfig {
  std::uint64_t seed = 1;
  int runs = 5;
  Index scans = 300;  // per run
  double tr = 1.0;
  int conditions_per_run = 8;
  int repetitions = 5;
  int spacing_scans = 5;
  Index voxels = 40;
  Index features = 6;
  double beta_offset = 1.0;
  double beta_scale = 0.5;
  double noise_sigma = 0.3;
  double drift_amplitude = 1.0;
  double peak_min = 3.5;
  double peak_max = 6.5;
  Index fir_length = 20;
  Index drift_order = 3;
  Index savgol_window = 91;
  Index savgol_degree = 4;
  std::vector<double> lambda_grid = default_lambda_grid();
  SolverConfig solver;
  bool use_qr = true;

  void validate() const {
    require(runs >= 3, "benchmark needs at least 3 runs");
    require(conditions_per_run >= 2, "benchmark needs at least 2 conditions per run");
    require(repetitions >= 1, "repetitions must be >= 1");
    require(voxels >= 2, "benchmark needs at least 2 voxels");
    require(features >= 1, "benchmark needs at least one feature");
    require(noise_sigma >= 0.0 && drift_amplitude >= 0.0, "noise and drift must be >= 0");
    require(fir_length >= 1, "FIR length must be >= 1");
    require(savgol_window <= scans, "Savitzky-Golay window exceeds the run length");
    require(!lambda_grid.empty(), "lambda grid is empty");
    for (double l : lambda_grid) require(l > 0.0, "lambda values must be positive");
    solver.validate();
    SynthConfig probe;
    probe.scans = scans;
    probe.tr = tr;
    probe.hrf.peak_min = peak_min;
    probe.hrf.peak_max = peak_max;
    probe.drift_order = drift_order;
    probe.validate();
  }
};

struct BenchmarkRun {
  EventTable events;
  Matrix features;  // conditions x (features + 1); last column is the intercept
  Matrix y;         // scans x voxels, detrended
  Matrix clean;     // scans x voxels, noiseless signal before detrending
  Matrix betas;     // voxels x conditions, true activations
};

struct BenchmarkData {
  std::vector<BenchmarkRun> runs;
  Matrix hrfs;          // voxels x L, true HRFs on the TR grid
  Vector peak_times;    // voxels
};

inline BenchmarkData generate_benchmark_data(const BenchmarkConfig &cfg) {
  cfg.validate();
  const Index k = cfg.conditions_per_run;
  const Index p = cfg.features;
  const Index length = detail::grid_length(cfg.tr, kDefaultHrfDuration);
  BenchmarkData data;

  // Voxel properties: HRF peak time and encoding weights.
  data.hrfs.resize(cfg.voxels, length);
  data.peak_times.resize(cfg.voxels);
  Matrix weights(p, cfg.voxels);
  for (Index v = 0; v < cfg.voxels; ++v) {
    std::mt19937_64 rng(mix_seed(cfg.seed ^ 0x5eedf00dULL, static_cast<std::uint64_t>(v)));
    std::uniform_real_distribution<double> peak(cfg.peak_min, cfg.peak_max);
    std::normal_distribution<double> normal(0.0, 1.0);
    data.peak_times[v] = peak(rng);
    data.hrfs.row(v) = detail::sampled_double_gamma(peak_delay_for(data.peak_times[v]), cfg.tr, length).transpose();
    for (Index f = 0; f < p; ++f) weights(f, v) = normal(rng) / std::sqrt(static_cast<double>(p));
  }

  const NuisanceMatrix drift = build_drift(cfg.scans, cfg.drift_order);
  const SavgolFilter filter(cfg.scans, cfg.savgol_window, cfg.savgol_degree);
  for (int r = 0; r < cfg.runs; ++r) {
    BenchmarkRun run;
    SynthConfig sc;
    sc.scans = cfg.scans;
    sc.tr = cfg.tr;
    sc.conditions = static_cast<int>(k);
    sc.events_per_condition = cfg.repetitions;
    sc.spacing_scans = cfg.spacing_scans;
    std::mt19937_64 event_rng(mix_seed(cfg.seed, 0x10000ULL + static_cast<std::uint64_t>(r)));
    run.events = detail::draw_events(sc, event_rng);

    std::mt19937_64 feature_rng(mix_seed(cfg.seed, 0x20000ULL + static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> normal(0.0, 1.0);
    run.features.resize(k, p + 1);
    for (Index c = 0; c < k; ++c) {
      for (Index f = 0; f < p; ++f) run.features(c, f) = normal(feature_rng);
      run.features(c, p) = 1.0;
    }
    run.betas = (cfg.beta_offset + cfg.beta_scale * (run.features.leftCols(p) * weights).array())
                    .matrix()
                    .transpose();

    run.y.resize(cfg.scans, cfg.voxels);
    run.clean.resize(cfg.scans, cfg.voxels);
    std::vector<std::vector<double>> onsets(k);
    for (Index c = 0; c < k; ++c) onsets[c] = run.events.onsets(static_cast<int>(c));
    for (Index v = 0; v < cfg.voxels; ++v) {
      std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(v)),
                                   static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> noise(0.0, 1.0);
      const Vector h = data.hrfs.row(v).transpose();
      Vector signal = Vector::Zero(cfg.scans);
      for (Index c = 0; c < k; ++c)
        signal += run.betas(v, c) * build_condition_regressor(onsets[c], h, cfg.tr, cfg.tr, cfg.scans);
      run.clean.col(v) = signal;
      const double scale = cfg.drift_amplitude * std::sqrt(static_cast<double>(cfg.scans) / drift.columns());
      for (Index j = 0; j < drift.columns(); ++j) signal += scale * noise(rng) * drift.matrix.col(j);
      for (Index i = 0; i < cfg.scans; ++i) signal[i] += cfg.noise_sigma * noise(rng);
      run.y.col(v) = filter.detrend(signal);
    }
    data.runs.push_back(std::move(run));
  }
  return data;
}

/// Per-run estimates of one method.
struct MethodRunFit {
  Matrix betas;  // voxels x conditions
  Matrix hrfs;   // voxels x L
  Index failures = 0;
};

struct EncodingResult {
  Vector voxel_scores;     // Pearson r per voxel (0 where undefined)
  Matrix predicted_betas;  // test conditions x voxels
  int undefined = 0;       // voxels whose prediction or data had zero variance
};

/// Ridge (GCV) from training features to each voxel's training betas, then
/// predicted held-out BOLD = sum_c betahat_c (onsets_c * hrf_v), detrended by
/// `filter` and correlated with the measured held-out series.
inline EncodingResult encoding_score(const Matrix &train_features, const Matrix &train_betas,
                                     const Matrix &hrfs, double hrf_dt, const Matrix &test_features,
                                     const EventTable &test_events, const Matrix &test_y, double tr,
                                     const SavgolFilter *filter, std::span<const double> lambda_grid,
                                     int jobs = 1) {
  const Index voxels = train_betas.cols();
  const Index k = test_features.rows();
  require(train_features.rows() == train_betas.rows(), "training features and betas disagree");
  require(train_features.cols() == test_features.cols(), "train and test feature widths disagree");
  require(hrfs.rows() == voxels && test_y.cols() == voxels, "voxel counts disagree");
  require(test_events.conditions == k, "test events do not match the test features");
  const RidgeGcv ridge(train_features);
  std::vector<std::vector<double>> onsets(k);
  for (Index c = 0; c < k; ++c) onsets[c] = test_events.onsets(static_cast<int>(c));

  EncodingResult out;
  out.voxel_scores = Vector::Zero(voxels);
  out.predicted_betas.resize(k, voxels);
  std::vector<char> undefined(voxels, 0);
  parallel_for(voxels, jobs, [&](Index v) {
    const RidgeResult fit = ridge.fit(train_betas.col(v), lambda_grid);
    const Vector beta = test_features * fit.weights;
    out.predicted_betas.col(v) = beta;
    const Vector h = hrfs.row(v).transpose();
    Vector pred = Vector::Zero(test_y.rows());
    for (Index c = 0; c < k; ++c)
      pred += beta[c] * build_condition_regressor(onsets[c], h, hrf_dt, tr, test_y.rows());
    if (filter) pred = filter->detrend(pred);
    try {
      out.voxel_scores[v] = pearson_r(pred, Vector(test_y.col(v)));
    } catch (const UndefinedScore &) {
      undefined[v] = 1;
    }
  });
  for (char u : undefined) out.undefined += u;
  return out;
}

struct PairedComparison {
  std::string better;
  std::string worse;
  std::optional<double> statistic;  // empty when the test is degenerate
  std::optional<double> p;
};

struct MethodScores {
  std::string name;
  std::vector<double> fold_scores;
  double mean = 0.0;
  std::vector<double> identification;  // accuracy per fold
  double identification_mean = 0.0;
  std::optional<PairedComparison> versus_baseline;  // one-sided, this > glm-fixed
  std::optional<ProportionTest> identification_test;  // pooled, this vs glm-fixed
  Index failures = 0;
};

struct BenchmarkReport {
  std::vector<MethodScores> methods;      // grid order
  std::vector<std::string> ranking;       // by mean score, best first
  std::vector<PairedComparison> adjacent;  // rank i vs rank i+1, one-sided
  Index identification_trials = 0;        // per method, pooled over folds
  bool complete = true;
  std::string error;                      // first failing method, if any
};

inline const MethodScores *find_method(const BenchmarkReport &r, const std::string &name) {
  for (const auto &m : r.methods)
    if (m.name == name) return &m;
  return nullptr;
}

namespace detail {

inline PairedComparison compare_folds(const MethodScores &a, const MethodScores &b) {
  PairedComparison c{a.name, b.name, std::nullopt, std::nullopt};
  try {
    const WilcoxonResult w = wilcoxon_signed_rank(a.fold_scores, b.fold_scores, Alternative::greater);
    c.statistic = w.statistic;
    c.p = w.p;
  } catch (const DegenerateTest &) {
  }
  return c;
}

inline MethodRunFit fit_run(const BenchmarkConfig &cfg, const BenchmarkRun &run, const MethodSpec &spec,
                            int jobs) {
  VolumeInputs in;
  in.basis = make_basis(spec.basis, cfg.tr, cfg.fir_length);
  in.x = build_design(run.events, in.basis, cfg.tr, cfg.scans);
  in.z = build_drift(cfg.scans, cfg.drift_order);
  VolumeOptions opt;
  opt.method = spec.method;
  opt.solver = cfg.solver;
  opt.use_qr = cfg.use_qr;
  opt.jobs = jobs;
  const VolumeFit fit = fit_volume(run.y, in, opt);
  return {fit.betas, fit.hrfs, fit.failures()};
}

}  // namespace detail

/// Runs the full grid. Output does not depend on `jobs`. On the first method
/// whose fit throws or loses voxels, stops and returns the partial report
/// with complete == false.
inline BenchmarkReport run_benchmark(const BenchmarkConfig &cfg, const BenchmarkData &data, int jobs = 1) {
  cfg.validate();
  const auto grid = method_grid();
  const int folds = static_cast<int>(data.runs.size());
  const Index k = cfg.conditions_per_run;
  const SavgolFilter filter(cfg.scans, cfg.savgol_window, cfg.savgol_degree);

  BenchmarkReport report;
  report.identification_trials = static_cast<Index>(folds) * k;
  for (const MethodSpec &spec : grid) {
    MethodScores scores;
    scores.name = spec.name();
    std::vector<MethodRunFit> fits;
    try {
      for (const auto &run : data.runs) {
        fits.push_back(detail::fit_run(cfg, run, spec, jobs));
        scores.failures += fits.back().failures;
      }
      if (scores.failures > 0)
        throw std::runtime_error(std::to_string(scores.failures) + " voxel fits failed");
      for (int f = 0; f < folds; ++f) {
        Matrix train_features((folds - 1) * k, data.runs[0].features.cols());
        Matrix train_betas((folds - 1) * k, cfg.voxels);
        Matrix hrf_sum = Matrix::Zero(cfg.voxels, fits[0].hrfs.cols());
        Index row = 0;
        for (int r = 0; r < folds; ++r) {
          if (r == f) continue;
          train_features.middleRows(row, k) = data.runs[r].features;
          train_betas.middleRows(row, k) = fits[r].betas.transpose();
          hrf_sum += fits[r].hrfs;
          row += k;
        }
        const Matrix hrfs = hrf_sum / static_cast<double>(folds - 1);
        const auto &test = data.runs[f];
        const EncodingResult enc = encoding_score(train_features, train_betas, hrfs, cfg.tr, test.features,
                                                  test.events, test.y, cfg.tr, &filter, cfg.lambda_grid, jobs);
        scores.fold_scores.push_back(enc.voxel_scores.mean());
        const IdentificationResult id = identify_images(enc.predicted_betas, fits[f].betas.transpose());
        scores.identification.push_back(id.accuracy);
      }
    } catch (const std::exception &e) {
      report.complete = false;
      report.error = scores.name + ": " + e.what();
      report.methods.push_back(std::move(scores));
      break;
    }
    scores.mean = std::accumulate(scores.fold_scores.begin(), scores.fold_scores.end(), 0.0) / folds;
    scores.identification_mean =
        std::accumulate(scores.identification.begin(), scores.identification.end(), 0.0) / folds;
    report.methods.push_back(std::move(scores));
  }
  if (!report.complete) return report;

  const MethodScores &baseline = report.methods.front();  // glm-fixed
  for (std::size_t i = 1; i < report.methods.size(); ++i) {
    auto &m = report.methods[i];
    m.versus_baseline = detail::compare_folds(m, baseline);
    try {
      m.identification_test =
          binomial_proportion_test(m.identification_mean, baseline.identification_mean, report.identification_trials);
    } catch (const DegenerateTest &) {
    }
  }

  std::vector<std::size_t> order(report.methods.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.methods[a].mean > report.methods[b].mean;
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    report.ranking.push_back(report.methods[order[i]].name);
    if (i + 1 < order.size())
      report.adjacent.push_back(detail::compare_folds(report.methods[order[i]], report.methods[order[i + 1]]));
  }
  return report;
}

inline BenchmarkReport run_benchmark(const BenchmarkConfig &cfg, int jobs = 1) {
  return run_benchmark(cfg, generate_benchmark_data(cfg), jobs);
}

}  // namespace r1glm
