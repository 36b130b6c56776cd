#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "r1glm/design.hpp"

using namespace r1glm;

namespace {

EventTable table(std::vector<Event> events, int k) {
  EventTable t;
  t.events = std::move(events);
  t.conditions = k;
  t.normalize();
  return t;
}

// Linear interpolation of samples spaced dt apart, zero outside the support.
double interp(const Eigen::VectorXd &v, double dt, double t) {
  if (t < 0.0) return 0.0;
  const double pos = t / dt;
  const auto j = static_cast<Eigen::Index>(std::floor(pos + 1e-12));
  if (j >= v.size() - 1) return (j == v.size() - 1 && std::abs(pos - j) < 1e-9) ? v[j] : 0.0;
  const double f = pos - j;
  return v[j] * (1.0 - f) + v[j + 1] * f;
}

}  // namespace

TEST(Regressor, IntegerOnsetsEqualDenseConvolution) {
  const Eigen::VectorXd h = sample_reference_hrf(1.0, 32.0).samples;
  const std::vector<double> onsets{0.0, 7.0, 31.0, 50.0};
  const Index n = 80;
  Eigen::VectorXd sticks = Eigen::VectorXd::Zero(n);
  for (double o : onsets) sticks[static_cast<Index>(o)] += 1.0;
  const Eigen::VectorXd expected = oracle::convolve(sticks, h).head(n);
  const Vector got = build_condition_regressor(onsets, h, 1.0, 1.0, n);
  EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Regressor, FractionalOnsetsInterpolateTheKernel) {
  const Eigen::VectorXd h = sample_reference_hrf(0.5, 32.0).samples;
  const double tr = 2.0;
  const std::vector<double> onsets{0.125, 3.75, 10.5, 41.0};  // multiples of TR/16
  const Index n = 40;
  const Vector got = build_condition_regressor(onsets, h, 0.5, tr, n);
  for (Index i = 0; i < n; ++i) {
    double want = 0.0;
    for (double o : onsets) want += interp(h, 0.5, i * tr - o);
    EXPECT_NEAR(got[i], want, 1e-12) << "scan " << i;
  }
}

TEST(Regressor, StickKernelOnlyHitsExactLags) {
  const Eigen::VectorXd col = Eigen::VectorXd::Unit(5, 2);  // FIR bin 2
  const std::vector<double> onsets{1.0, 1.5};
  const Vector got = build_condition_regressor(onsets, col, 1.0, 1.0, 10, true);
  Eigen::VectorXd want = Eigen::VectorXd::Zero(10);
  want[3] = 1.0;  // onset 1.5 lands between scans and never hits lag 2 exactly
  EXPECT_TRUE(got == want);
}

TEST(Regressor, RejectsOnsetsPastAcquisitionAndBadDt) {
  const Eigen::VectorXd h = Eigen::VectorXd::Ones(3);
  const std::vector<double> late{10.0};
  EXPECT_THROW(build_condition_regressor(late, h, 1.0, 1.0, 10), std::invalid_argument);
  const std::vector<double> ok{1.0};
  EXPECT_THROW(build_condition_regressor(ok, h, 0.3, 1.0, 10), std::invalid_argument);
  EXPECT_NO_THROW(build_condition_regressor(ok, h, 0.0625, 1.0, 10));
}

TEST(Design, ColumnsAreConditionMajorAndCoefficientsAreKron) {
  const BasisSet b = make_3hrf_basis(1.0, 32.0);
  const EventTable ev = table({{2, 0}, {20, 1}, {40, 2}, {60, 0}, {75, 1}, {90, 2}}, 3);
  const DesignMatrix x = build_design(ev, b, 1.0, 120);
  ASSERT_EQ(x.matrix.rows(), 120);
  ASSERT_EQ(x.matrix.cols(), 9);
  for (Index j = 0; j < 3; ++j)
    for (Index m = 0; m < 3; ++m) {
      const auto on = ev.onsets(static_cast<int>(j));
      const Vector col = build_condition_regressor(on, b.matrix.col(m), 1.0, 1.0, 120);
      EXPECT_TRUE(x.matrix.col(3 * j + m) == col);
    }
  // X kron(beta, h) equals the sum of per-condition regressors of B h.
  const Eigen::Vector3d beta(1.0, -0.5, 2.0), h(1.0, 0.2, -0.1);
  const Eigen::VectorXd lhs = x.matrix * oracle::kron(beta, h);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(120);
  const Vector course = b.matrix * h;
  for (Index j = 0; j < 3; ++j)
    rhs += beta[j] * build_condition_regressor(ev.onsets(static_cast<int>(j)), course, 1.0, 1.0, 120);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Design, FirDesignIsShiftedStickTrains) {
  const EventTable ev = table({{3, 0}, {30, 1}}, 2);
  const DesignMatrix x = build_design(ev, make_fir_basis(6), 1.0, 50);
  for (Index m = 0; m < 6; ++m) {
    EXPECT_EQ(x.matrix(3 + m, m), 1.0);
    EXPECT_EQ(x.matrix(30 + m, 6 + m), 1.0);
  }
  EXPECT_EQ(x.matrix.sum(), 12.0);
}

TEST(SeparateDesigns, RestIsSumOfOtherConditionsAndRoundTrips) {
  const BasisSet b = make_3hrf_basis(1.0, 32.0);
  const EventTable ev = table({{2, 0}, {20, 1}, {40, 2}, {60, 3}}, 4);
  const DesignMatrix x = build_design(ev, b, 1.0, 90);
  const SeparateDesigns s = separate_from_design(x);
  ASSERT_EQ(s.conditions(), 4);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_TRUE(s.pairs[i].own == x.block(i));
    const Eigen::MatrixXd total = s.pairs[i].own + s.pairs[i].rest;
    Eigen::MatrixXd all = Eigen::MatrixXd::Zero(90, 3);
    for (Index j = 0; j < 4; ++j) all += x.block(j);
    EXPECT_LT((total - all).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_TRUE(design_from_separate(s).matrix == x.matrix);
}

TEST(Drift, OrthonormalPolynomialSpan) {
  const NuisanceMatrix z = build_drift(100, 3);
  ASSERT_EQ(z.columns(), 4);
  const Eigen::MatrixXd gram = z.matrix.transpose() * z.matrix;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(z.matrix(0, 0), 0.1, 1e-14);
  EXPECT_NEAR(z.matrix(99, 0), 0.1, 1e-14);
  // A cubic in the scan index lies in the span.
  Eigen::VectorXd cubic(100);
  for (int i = 0; i < 100; ++i) cubic[i] = 1.0 - 0.3 * i + 0.01 * i * i - 2e-4 * i * i * i;
  const Eigen::VectorXd resid = cubic - z.matrix * (z.matrix.transpose() * cubic);
  EXPECT_LT(resid.norm(), 1e-9 * cubic.norm());
  EXPECT_THROW(build_drift(3, 3), std::invalid_argument);
}

TEST(ConcatRuns, StacksDesignsAndBlockDiagonalDrift) {
  const BasisSet b = make_fixed_basis(1.0, 32.0);
  const EventTable e1 = table({{1, 0}, {10, 1}}, 2);
  const EventTable e2 = table({{5, 1}, {15, 0}}, 2);
  const DesignMatrix x1 = build_design(e1, b, 1.0, 40), x2 = build_design(e2, b, 1.0, 30);
  const auto [x, z] = concat_runs({x1, x2}, {build_drift(40, 1), build_drift(30, 2)});
  ASSERT_EQ(x.matrix.rows(), 70);
  ASSERT_EQ(z.columns(), 5);
  EXPECT_TRUE(x.matrix.topRows(40) == x1.matrix);
  EXPECT_TRUE(x.matrix.bottomRows(30) == x2.matrix);
  EXPECT_EQ(z.matrix.block(40, 0, 30, 2).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(z.matrix.block(0, 2, 40, 3).cwiseAbs().sum(), 0.0);
  const DesignMatrix other = build_design(e2, make_3hrf_basis(1.0, 32.0), 1.0, 30);
  EXPECT_THROW(concat_runs({x1, other}, {build_drift(40, 1), build_drift(30, 1)}), std::invalid_argument);
}

TEST(EventsCsv, RoundTripsAndSorts) {
  std::istringstream in("onset,condition,run\n12.5,1,0\n3,0,0\n4,1,1\n0.25,0,1\n");
  const EventTable t = parse_events_csv(in);
  EXPECT_EQ(t.conditions, 2);
  EXPECT_EQ(t.runs(), 2);
  ASSERT_EQ(t.events.size(), 4u);
  EXPECT_EQ(t.events[0].onset, 3.0);
  EXPECT_EQ(t.events[2].onset, 0.25);
  std::ostringstream out;
  write_events_csv(out, t);
  std::istringstream back(out.str());
  const EventTable u = parse_events_csv(back);
  ASSERT_EQ(u.events.size(), t.events.size());
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    EXPECT_EQ(u.events[i].onset, t.events[i].onset);
    EXPECT_EQ(u.events[i].condition, t.events[i].condition);
    EXPECT_EQ(u.events[i].run, t.events[i].run);
  }
}

TEST(EventsCsv, ErrorsNameTheLine) {
  auto message = [](const std::string &text) {
    std::istringstream in(text);
    try {
      parse_events_csv(in);
    } catch (const std::invalid_argument &e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("onset,condition\n1,0\nx,1\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("onset,condition\n1,0\n2,-1\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("onset,cond\n").find("header"), std::string::npos);
  EXPECT_NE(message("onset,condition\n1,0\n2,2\n").find("dense"), std::string::npos);
  EXPECT_NE(message("onset,condition\n-1,0\n").find(">= 0"), std::string::npos);
}
