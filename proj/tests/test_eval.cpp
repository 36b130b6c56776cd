#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "r1glm/eval.hpp"
#include "r1glm/savgol.hpp"

using namespace r1glm;

TEST(Pearson, MatchesDirectFormulaAndRejectsConstants) {
  const std::vector<double> a{1, 2, 3, 4, 10}, b{2, 1, 4, 3, 7};
  const double ma = 4.0, mb = 3.4;
  double sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < 5; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_NEAR(pearson_r(a, b), sab / std::sqrt(saa * sbb), 1e-15);
  const std::vector<double> flat{1, 1, 1, 1, 1};
  EXPECT_THROW(pearson_r(a, flat), UndefinedScore);
}

TEST(KendallTau, EqualsPairCountingOnAllPermutations) {
  for (int n = 2; n <= 6; ++n) {
    std::vector<double> ref(n);
    std::iota(ref.begin(), ref.end(), 0.0);
    std::vector<double> perm = ref;
    do {
      EXPECT_NEAR(kendall_tau(ref, perm), oracle::kendall_brute(ref, perm), 1e-15);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(KendallTau, TieCorrectedOnTiedData) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(9), b(9);
    for (auto &v : a) v = u(rng);
    for (auto &v : b) v = u(rng);
    if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; })) continue;
    if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) continue;
    EXPECT_NEAR(kendall_tau(a, b), oracle::kendall_brute(a, b), 1e-14);
  }
  EXPECT_THROW(kendall_tau(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedScore);
}

TEST(Wilcoxon, FivePositiveDifferencesGiveOneOver32) {
  const std::vector<double> a{1.5, 2.5, 3.1, 4.7, 5.2}, b(5, 0.0);
  const WilcoxonResult r = wilcoxon_signed_rank(a, b, Alternative::greater);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p, 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(r.statistic, 15.0);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(a, b, Alternative::two_sided).p, 2.0 / 32.0);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(a, b, Alternative::less).p, 1.0);
}

TEST(Wilcoxon, ExactTailMatchesSignEnumerationWithTies) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> u(-4, 4);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> a(12), b(12, 0.0);
    for (auto &v : a) v = u(rng) * 0.5;
    std::vector<double> nz;
    for (double v : a)
      if (v != 0.0) nz.push_back(v);
    if (nz.empty()) continue;
    // Midranks of |d| computed by counting.
    std::vector<double> ranks(nz.size());
    double wplus = 0.0;
    for (std::size_t i = 0; i < nz.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : nz) {
        less += std::abs(w) < std::abs(nz[i]);
        equal += std::abs(w) == std::abs(nz[i]);
      }
      ranks[i] = less + (equal + 1.0) / 2.0;
      if (nz[i] > 0) wplus += ranks[i];
    }
    const WilcoxonResult r = wilcoxon_signed_rank(a, b, Alternative::greater);
    EXPECT_DOUBLE_EQ(r.statistic, wplus);
    EXPECT_NEAR(r.p, oracle::wilcoxon_tail_brute(ranks, wplus), 1e-12);
  }
}

TEST(Wilcoxon, OppositeAlternativesAreMirrorImages) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd x = oracle::random_vector(rng, 15), y = oracle::random_vector(rng, 15);
    const std::vector<double> a(x.data(), x.data() + 15), b(y.data(), y.data() + 15);
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(b, a, Alternative::greater).p,
                     wilcoxon_signed_rank(a, b, Alternative::less).p);
  }
}

TEST(Wilcoxon, NormalApproximationMatchesReferenceValues) {
  // Reference values from an established statistics package (normal
  // approximation, tie-corrected variance, no continuity correction).
  std::vector<double> d(30), zero(30, 0.0);
  for (int i = 1; i <= 30; ++i) d[i - 1] = std::sin(i) + 0.1;
  WilcoxonResult r = wilcoxon_signed_rank(d, zero, Alternative::greater);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(r.statistic, 284.0);
  EXPECT_NEAR(r.p, 0.1447385358527271, 1e-12);
  for (auto &v : d) v = std::round(v * 4.0) / 4.0;
  r = wilcoxon_signed_rank(d, zero, Alternative::greater);
  EXPECT_EQ(r.pairs, 28);
  EXPECT_DOUBLE_EQ(r.statistic, 238.0);
  EXPECT_NEAR(r.p, 0.2106026081014109, 1e-12);
}

TEST(Wilcoxon, AllZeroDifferencesAreDegenerate) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_THROW(wilcoxon_signed_rank(a, a), DegenerateTest);
}

TEST(ProportionTest, MatchesDirectFormula) {
  const double pa = 0.5, pb = 0.4, n = 120;
  const double p = 0.45;
  const double t = (pa - pb) / std::sqrt(p * (1 - p) * 2.0 / n);
  const ProportionTest r = binomial_proportion_test(pa, pb, 120);
  EXPECT_NEAR(r.statistic, t, 1e-10);
  EXPECT_NEAR(r.p, 0.5 * std::erfc(t / std::sqrt(2.0)), 1e-10);
  EXPECT_NEAR(r.statistic, 1.557, 1e-3);
  EXPECT_NEAR(r.p, 0.0597, 1e-4);
  EXPECT_THROW(binomial_proportion_test(0.0, 0.0, 10), DegenerateTest);
  EXPECT_THROW(binomial_proportion_test(1.2, 0.0, 10), std::invalid_argument);
}

TEST(Ridge, WeightsAndGcvMatchExplicitHatMatrix) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd f = oracle::random_matrix(rng, 25, 8);
  const Eigen::VectorXd t = oracle::random_vector(rng, 25);
  const RidgeGcv ridge(f);
  for (double lambda : {1e-3, 0.1, 1.0, 30.0}) {
    const Eigen::MatrixXd gram = f.transpose() * f + lambda * Eigen::MatrixXd::Identity(8, 8);
    const Eigen::VectorXd w = gram.ldlt().solve(f.transpose() * t);
    EXPECT_LT((ridge.weights(t, lambda) - w).norm(), 1e-10 * w.norm());
    const Eigen::MatrixXd hat = f * gram.ldlt().solve(f.transpose());
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(25, 25) - hat;
    const double want = 25.0 * (m * t).squaredNorm() / std::pow(m.trace(), 2);
    EXPECT_NEAR(ridge.gcv(t, lambda), want, 1e-10 * want);
  }
}

TEST(Ridge, FitPicksTheGridMinimum) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd f = oracle::random_matrix(rng, 40, 6);
  const Eigen::VectorXd t = f * oracle::random_vector(rng, 6) + 0.5 * oracle::random_vector(rng, 40);
  const auto grid = default_lambda_grid();
  ASSERT_EQ(grid.size(), 30u);
  EXPECT_NEAR(grid.front(), 1e-3, 1e-15);
  EXPECT_NEAR(grid.back(), 1e3, 1e-9);
  const RidgeResult r = ridge_gcv(f, t, grid);
  const auto best = std::min_element(r.scores.begin(), r.scores.end());
  EXPECT_EQ(r.lambda, grid[best - r.scores.begin()]);
  EXPECT_LT((r.weights - RidgeGcv(f).weights(t, r.lambda)).norm(), 1e-14);
}

TEST(Ridge, UndefinedWhenEveryScoreIsUndefined) {
  // Square full-rank features with tiny lambda leave tr(I - H) ~ 0.
  const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(4, 4) * 1e8;
  const std::vector<double> grid{1e-3};
  EXPECT_THROW(ridge_gcv(f, Eigen::VectorXd::Ones(4), grid), UndefinedScore);
}

TEST(Identification, PerfectPredictionsAndTieRule) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd m = oracle::random_matrix(rng, 120, 50);
  const IdentificationResult r = identify_images(m, m);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  Eigen::MatrixXd dup = m;
  dup.row(3) = dup.row(1);  // candidates 1 and 3 identical: row 3 resolves to 1
  const IdentificationResult t = identify_images(dup, dup);
  EXPECT_EQ(t.choices[3], 1);
  EXPECT_EQ(t.ties, 2);
  EXPECT_NEAR(t.accuracy, 119.0 / 120.0, 1e-15);
}

TEST(Identification, ZeroVarianceRowsAreExcluded) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 6);
  Eigen::MatrixXd b = a;
  b.row(2).setConstant(3.0);
  const IdentificationResult r = identify_images(a, b);
  EXPECT_EQ(r.excluded, 1);
  EXPECT_EQ(r.choices[2], -1);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.8);
  EXPECT_THROW(identify_images(a.topRows(1), b.topRows(1)), std::invalid_argument);
}

TEST(Savgol, ReproducesLowOrderPolynomials) {
  Eigen::VectorXd y(300);
  for (int i = 0; i < 300; ++i) {
    const double t = i / 300.0;
    y[i] = 1.0 + 3.0 * t - 2.0 * t * t + 5.0 * std::pow(t, 3) - 4.0 * std::pow(t, 4);
  }
  EXPECT_LT(savgol_detrend(y).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(savgol_detrend(Eigen::VectorXd::Constant(120, 2.5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Savgol, MatchesPerWindowPolynomialRegression) {
  std::mt19937_64 rng(10);
  const Eigen::VectorXd y = oracle::random_vector(rng, 60);
  const Vector smooth = savgol_smooth(y, 21, 3);
  for (int i = 0; i < 60; ++i) {
    const int lo = std::max(0, i - 10), hi = std::min(59, i + 10);
    std::vector<double> xs, ys;
    for (int j = lo; j <= hi; ++j) {
      xs.push_back(j);
      ys.push_back(y[j]);
    }
    EXPECT_NEAR(smooth[i], oracle::polyfit_eval(xs, ys, 3, i), 1e-10) << i;
  }
}

TEST(Savgol, RemovesDriftButKeepsFastSignal) {
  Eigen::VectorXd y(400), sine(400);
  for (int i = 0; i < 400; ++i) {
    sine[i] = std::sin(2.0 * M_PI * i / 10.0);
    y[i] = sine[i] + 0.02 * i;
  }
  const Vector out = savgol_detrend(y, 91, 4);
  const Eigen::VectorXd a = out.array() - out.mean(), b = sine.array() - sine.mean();
  EXPECT_GT(a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()), 0.99);
}

TEST(Savgol, IdempotentOnPolynomials) {
  std::mt19937_64 rng(12);
  for (int degree = 0; degree <= 4; ++degree) {
    const Eigen::VectorXd c = oracle::random_vector(rng, degree + 1);
    Eigen::VectorXd p(200);
    for (int i = 0; i < 200; ++i) {
      double v = 0.0;
      for (int e = degree; e >= 0; --e) v = v * (i / 100.0 - 1.0) + c[e];
      p[i] = v;
    }
    const Vector once = savgol_detrend(p);
    EXPECT_LT((savgol_detrend(once) - once).cwiseAbs().maxCoeff(), 1e-8) << degree;
  }
}

TEST(Savgol, RejectsInvalidWindows) {
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(50);
  EXPECT_THROW(savgol_detrend(y, 10, 2), std::invalid_argument);
  EXPECT_THROW(savgol_detrend(y, 5, 5), std::invalid_argument);
  EXPECT_THROW(savgol_detrend(y, 91, 4), std::invalid_argument);
}

TEST(KendallTau, SingleSwapOfFour) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(kendall_tau(a, b), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(kendall_tau(a, a), 1.0, 1e-15);
  const std::vector<double> rev{4, 3, 2, 1};
  EXPECT_NEAR(kendall_tau(a, rev), -1.0, 1e-15);
}

TEST(KendallTau, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = oracle::random_vector(rng, 25), y = oracle::random_vector(rng, 25);
    Eigen::VectorXd ex = x.array().exp(), cy = y.array().cube() * 3.0 + 1.0;
    EXPECT_NEAR(kendall_tau(ex, cy), kendall_tau(x, y), 1e-15);
    EXPECT_NEAR(kendall_tau(y, x), kendall_tau(x, y), 1e-15);
  }
}

TEST(Pearson, AffineInvariantAndSymmetric) {
  std::mt19937_64 rng(13);
  const Eigen::VectorXd x = oracle::random_vector(rng, 40), y = oracle::random_vector(rng, 40);
  const double r = pearson_r(x, y);
  EXPECT_NEAR(pearson_r(Eigen::VectorXd(3.0 * x.array() + 7.0), y), r, 1e-14);
  EXPECT_NEAR(pearson_r(Eigen::VectorXd(-2.0 * x), y), -r, 1e-14);
  EXPECT_NEAR(pearson_r(y, x), r, 1e-15);
}

TEST(Wilcoxon, ExactTailsOverlapOnlyAtTheObservedStatistic) {
  // P(W+ >= w) + P(W+ <= w) = 1 + P(W+ = w).
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd d = oracle::random_vector(rng, 10);
    const std::vector<double> a(d.data(), d.data() + 10), zero(10, 0.0);
    const double g = wilcoxon_signed_rank(a, zero, Alternative::greater).p;
    const double l = wilcoxon_signed_rank(a, zero, Alternative::less).p;
    std::vector<double> ranks(10);
    std::iota(ranks.begin(), ranks.end(), 1.0);
    const double w = wilcoxon_signed_rank(a, zero).statistic;
    const double at = oracle::wilcoxon_tail_brute(ranks, w) - oracle::wilcoxon_tail_brute(ranks, w + 1.0);
    EXPECT_NEAR(g + l, 1.0 + at, 1e-12);
  }
}

TEST(Identification, CyclicShiftScoresZero) {
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd m = oracle::random_matrix(rng, 30, 40);
  Eigen::MatrixXd shifted(30, 40);
  for (int i = 0; i < 30; ++i) shifted.row(i) = m.row((i + 1) % 30);
  const IdentificationResult r = identify_images(m, shifted);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.0);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(r.choices[i], (i + 1) % 30);
}

TEST(Identification, InvariantToPerRowAffineScaling) {
  std::mt19937_64 rng(16);
  const Eigen::MatrixXd m = oracle::random_matrix(rng, 20, 30);
  const Eigen::MatrixXd noisy = m + 0.8 * oracle::random_matrix(rng, 20, 30);
  Eigen::MatrixXd scaled = noisy;
  for (int i = 0; i < 20; ++i) scaled.row(i) = scaled.row(i).array() * (1.0 + i) + i;
  const auto a = identify_images(m, noisy), b = identify_images(m, scaled);
  EXPECT_EQ(a.choices, b.choices);
}

TEST(Identification, RandomPredictionsNearChance) {
  double total = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(100 + seed);
    total += identify_images(oracle::random_matrix(rng, 120, 60), oracle::random_matrix(rng, 120, 60)).accuracy;
  }
  EXPECT_LT(total / 50.0, 0.03);
}

TEST(Ridge, SmallLambdaOnSquareSystemSolvesExactly) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd f = oracle::random_matrix(rng, 6, 6) + 4.0 * Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd t = oracle::random_vector(rng, 6);
  const Eigen::VectorXd exact = f.partialPivLu().solve(t);
  EXPECT_LT((RidgeGcv(f).weights(t, 1e-12) - exact).norm(), 1e-8 * exact.norm());
}

TEST(Ridge, PureNoiseTargetsFavourStrongRegularization) {
  const auto grid = default_lambda_grid();
  const double median = grid[grid.size() / 2];
  int strong = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937_64 rng(200 + trial);
    const Eigen::MatrixXd f = oracle::random_matrix(rng, 40, 6);
    if (ridge_gcv(f, oracle::random_vector(rng, 40), grid).lambda >= median) ++strong;
  }
  EXPECT_GE(strong, 40);
}
