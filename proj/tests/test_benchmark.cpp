#include <gtest/gtest.h>

#include <set>

#include "r1glm/benchmark.hpp"

using namespace r1glm;

namespace {

BenchmarkConfig small_config() {
  BenchmarkConfig cfg;
  cfg.runs = 3;
  cfg.scans = 150;
  cfg.conditions_per_run = 4;
  cfg.repetitions = 4;
  cfg.spacing_scans = 6;
  cfg.voxels = 6;
  cfg.features = 3;
  cfg.fir_length = 12;
  return cfg;
}

struct Fold {
  Matrix train_features;
  Matrix train_betas;
};

Fold training_block(const BenchmarkData &data, int held_out, Index k, Index voxels) {
  const int runs = static_cast<int>(data.runs.size());
  Fold f{Matrix((runs - 1) * k, data.runs[0].features.cols()), Matrix((runs - 1) * k, voxels)};
  Index row = 0;
  for (int r = 0; r < runs; ++r) {
    if (r == held_out) continue;
    f.train_features.middleRows(row, k) = data.runs[r].features;
    f.train_betas.middleRows(row, k) = data.runs[r].betas.transpose();
    row += k;
  }
  return f;
}

}  // namespace

TEST(MethodGrid, TenDistinctEntriesBaselineFirst) {
  const auto grid = method_grid();
  ASSERT_EQ(grid.size(), 10u);
  std::set<std::string> names;
  for (const auto &m : grid) names.insert(m.name());
  EXPECT_EQ(names.size(), 10u);
  EXPECT_EQ(grid.front().name(), "glm-fixed");
  EXPECT_TRUE(names.count("r1glms-fir"));
  EXPECT_TRUE(names.count("r1glm-3hrf"));
  EXPECT_FALSE(names.count("r1glm-fixed"));
}

TEST(BenchmarkConfig, RejectsInvalidSettings) {
  auto cfg = small_config();
  cfg.runs = 2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.noise_sigma = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.lambda_grid = {1.0, 0.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.scans = 60;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(BenchmarkData, ShapesAndNoiselessConsistency) {
  auto cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.drift_amplitude = 0.0;
  const BenchmarkData data = generate_benchmark_data(cfg);
  ASSERT_EQ(data.runs.size(), 3u);
  const SavgolFilter filter(cfg.scans, cfg.savgol_window, cfg.savgol_degree);
  for (const auto &run : data.runs) {
    EXPECT_EQ(run.features.rows(), 4);
    EXPECT_EQ(run.features.cols(), 4);
    EXPECT_TRUE((run.features.col(3).array() == 1.0).all());
    EXPECT_EQ(run.betas.rows(), 6);
    EXPECT_EQ(run.y.rows(), 150);
    for (Index v = 0; v < cfg.voxels; ++v)
      EXPECT_LT((run.y.col(v) - filter.detrend(run.clean.col(v))).cwiseAbs().maxCoeff(), 1e-12);
  }
  for (Index v = 0; v < cfg.voxels; ++v) {
    EXPECT_GE(data.peak_times[v], cfg.peak_min);
    EXPECT_LE(data.peak_times[v], cfg.peak_max);
  }
}

TEST(BenchmarkData, SeededReproducibility) {
  const auto cfg = small_config();
  const BenchmarkData a = generate_benchmark_data(cfg);
  const BenchmarkData b = generate_benchmark_data(cfg);
  for (std::size_t r = 0; r < a.runs.size(); ++r) EXPECT_TRUE(a.runs[r].y == b.runs[r].y);
  auto other = cfg;
  other.seed = 2;
  EXPECT_FALSE(generate_benchmark_data(other).runs[0].y == a.runs[0].y);
}

TEST(EncodingScore, PerfectModelOnNoiselessDataScoresNearOne) {
  auto cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.drift_amplitude = 0.0;
  const BenchmarkData data = generate_benchmark_data(cfg);
  const SavgolFilter filter(cfg.scans, cfg.savgol_window, cfg.savgol_degree);
  for (int f = 0; f < cfg.runs; ++f) {
    const Fold fold = training_block(data, f, cfg.conditions_per_run, cfg.voxels);
    const auto &test = data.runs[f];
    const EncodingResult enc = encoding_score(fold.train_features, fold.train_betas, data.hrfs, cfg.tr,
                                              test.features, test.events, test.y, cfg.tr, &filter,
                                              cfg.lambda_grid);
    EXPECT_EQ(enc.undefined, 0);
    EXPECT_GT(enc.voxel_scores.mean(), 0.99) << "fold " << f;
    EXPECT_LT((enc.predicted_betas - test.betas.transpose()).cwiseAbs().maxCoeff(), 0.05);
  }
}

TEST(EncodingScore, PureNoiseTargetScoresNearZero) {
  auto cfg = small_config();
  cfg.voxels = 60;
  cfg.scans = 400;
  const BenchmarkData data = generate_benchmark_data(cfg);
  const SavgolFilter filter(cfg.scans, cfg.savgol_window, cfg.savgol_degree);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix noise(cfg.scans, cfg.voxels);
  for (Index j = 0; j < noise.cols(); ++j)
    for (Index i = 0; i < noise.rows(); ++i) noise(i, j) = n(rng);
  for (Index j = 0; j < noise.cols(); ++j) noise.col(j) = filter.detrend(noise.col(j));
  const Fold fold = training_block(data, 0, cfg.conditions_per_run, cfg.voxels);
  const auto &test = data.runs[0];
  const EncodingResult enc = encoding_score(fold.train_features, fold.train_betas, data.hrfs, cfg.tr,
                                            test.features, test.events, noise, cfg.tr,
                                            &filter, cfg.lambda_grid);
  EXPECT_LT(std::abs(enc.voxel_scores.mean()), 0.05);
}

TEST(EncodingScore, ConstantTargetIsCountedUndefined) {
  const auto cfg = small_config();
  const BenchmarkData data = generate_benchmark_data(cfg);
  const Fold fold = training_block(data, 0, cfg.conditions_per_run, cfg.voxels);
  const auto &test = data.runs[0];
  Matrix y = test.y;
  y.col(2).setConstant(4.0);
  const EncodingResult enc = encoding_score(fold.train_features, fold.train_betas, data.hrfs, cfg.tr,
                                            test.features, test.events, y, cfg.tr, nullptr, cfg.lambda_grid);
  EXPECT_EQ(enc.undefined, 1);
  EXPECT_EQ(enc.voxel_scores[2], 0.0);
}

TEST(EncodingScore, RejectsMismatchedShapes) {
  const auto cfg = small_config();
  const BenchmarkData data = generate_benchmark_data(cfg);
  const Fold fold = training_block(data, 0, cfg.conditions_per_run, cfg.voxels);
  const auto &test = data.runs[0];
  EXPECT_THROW(encoding_score(fold.train_features.topRows(3), fold.train_betas, data.hrfs, cfg.tr, test.features,
                              test.events, test.y, cfg.tr, nullptr, cfg.lambda_grid),
               std::invalid_argument);
  EXPECT_THROW(encoding_score(fold.train_features, fold.train_betas, data.hrfs.topRows(2), cfg.tr, test.features,
                              test.events, test.y, cfg.tr, nullptr, cfg.lambda_grid),
               std::invalid_argument);
}

TEST(RunBenchmark, ReportStructure) {
  const auto cfg = small_config();
  const BenchmarkReport report = run_benchmark(cfg);
  ASSERT_TRUE(report.complete) << report.error;
  ASSERT_EQ(report.methods.size(), 10u);
  EXPECT_EQ(report.identification_trials, 12);
  EXPECT_EQ(report.ranking.size(), 10u);
  EXPECT_EQ(report.adjacent.size(), 9u);
  EXPECT_FALSE(report.methods[0].versus_baseline.has_value());
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    const auto &m = report.methods[i];
    EXPECT_EQ(m.name, method_grid()[i].name());
    ASSERT_EQ(m.fold_scores.size(), 3u);
    ASSERT_EQ(m.identification.size(), 3u);
    EXPECT_EQ(m.failures, 0);
    EXPECT_GT(m.mean, 0.0) << m.name;
    if (i > 0) EXPECT_TRUE(m.versus_baseline.has_value());
  }
  for (std::size_t i = 0; i + 1 < report.ranking.size(); ++i) {
    EXPECT_GE(find_method(report, report.ranking[i])->mean, find_method(report, report.ranking[i + 1])->mean);
    EXPECT_EQ(report.adjacent[i].better, report.ranking[i]);
  }
  EXPECT_EQ(find_method(report, "nope"), nullptr);
}

TEST(RunBenchmark, IndependentOfJobCount) {
  const auto cfg = small_config();
  const BenchmarkData data = generate_benchmark_data(cfg);
  const BenchmarkReport a = run_benchmark(cfg, data, 1);
  const BenchmarkReport b = run_benchmark(cfg, data, 4);
  ASSERT_EQ(a.methods.size(), b.methods.size());
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    EXPECT_EQ(a.methods[i].fold_scores, b.methods[i].fold_scores);
    EXPECT_EQ(a.methods[i].identification, b.methods[i].identification);
  }
  EXPECT_EQ(a.ranking, b.ranking);
}

TEST(RunBenchmark, FailingMethodStopsWithPartialReport) {
  const auto cfg = small_config();
  BenchmarkData data = generate_benchmark_data(cfg);
  data.runs[1].y(5, 0) = std::numeric_limits<double>::quiet_NaN();
  const BenchmarkReport report = run_benchmark(cfg, data);
  EXPECT_FALSE(report.complete);
  ASSERT_EQ(report.methods.size(), 1u);
  EXPECT_EQ(report.methods[0].name, "glm-fixed");
  EXPECT_EQ(report.methods[0].failures, 1);
  EXPECT_NE(report.error.find("glm-fixed"), std::string::npos);
  EXPECT_TRUE(report.ranking.empty());
}
