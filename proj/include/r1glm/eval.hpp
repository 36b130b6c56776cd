// Scores and statistical tests used to compare estimation methods.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "r1glm/core.hpp"

namespace r1glm {

/// Centered (Pearson) correlation.
inline double pearson_r(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "pearson_r: length mismatch");
  require(a.size() >= 2, "pearson_r: need at least two samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw UndefinedScore("pearson_r: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double pearson_r(const Vector &a, const Vector &b) {
  return pearson_r(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

/// Kendall tau-b over all pairs, tie corrected.
inline double kendall_tau(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "kendall_tau: length mismatch");
  require(a.size() >= 2, "kendall_tau: need at least two samples");
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) ++ties_a;
      else if (db == 0.0) ++ties_b;
      else if ((da > 0.0) == (db > 0.0)) ++concordant;
      else ++discordant;
    }
  const double na = static_cast<double>(concordant + discordant + ties_a);
  const double nb = static_cast<double>(concordant + discordant + ties_b);
  if (!(na > 0.0) || !(nb > 0.0)) throw UndefinedScore("kendall_tau: all values tied");
  return static_cast<double>(concordant - discordant) / std::sqrt(na * nb);
}

inline double kendall_tau(const Vector &a, const Vector &b) {
  return kendall_tau(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

enum class Alternative { greater, less, two_sided };

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  double p = 1.0;
  bool exact = false;
  Index pairs = 0;         // nonzero differences used
};

inline constexpr Index kWilcoxonExactLimit = 20;

/// Wilcoxon signed-rank test of a - b. Zero differences are dropped; ties get
/// midranks. Exact null distribution for up to 20 pairs, normal approximation
/// with tie-corrected variance above. `greater` tests a > b.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           Alternative alt = Alternative::greater) {
  require(a.size() == b.size(), "wilcoxon: length mismatch");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  if (diff.empty()) throw DegenerateTest("wilcoxon: all differences are zero");
  const Index n = static_cast<Index>(diff.size());

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return std::abs(diff[i]) < std::abs(diff[j]); });
  // Doubled midranks stay integral.
  std::vector<long long> rank2(n);
  double tie_term = 0.0;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
    const long long twice = static_cast<long long>(i + 1 + j + 1);
    for (Index t = i; t <= j; ++t) rank2[order[t]] = twice;
    const double size = static_cast<double>(j - i + 1);
    tie_term += size * size * size - size;
    i = j + 1;
  }
  long long w2 = 0;
  for (Index i = 0; i < n; ++i)
    if (diff[i] > 0.0) w2 += rank2[i];

  WilcoxonResult out;
  out.statistic = 0.5 * static_cast<double>(w2);
  out.pairs = n;
  double p_greater = 0.0, p_less = 0.0;
  if (n <= kWilcoxonExactLimit) {
    const long long total2 = std::accumulate(rank2.begin(), rank2.end(), 0LL);
    std::vector<double> count(total2 + 1, 0.0);
    count[0] = 1.0;
    for (Index i = 0; i < n; ++i)
      for (long long s = total2; s >= rank2[i]; --s) count[s] += count[s - rank2[i]];
    const double patterns = std::ldexp(1.0, static_cast<int>(n));
    for (long long s = 0; s <= total2; ++s) {
      if (s >= w2) p_greater += count[s];
      if (s <= w2) p_less += count[s];
    }
    p_greater /= patterns;
    p_less /= patterns;
    out.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) throw DegenerateTest("wilcoxon: zero variance under the null");
    const double z = (out.statistic - mean) / std::sqrt(var);
    p_greater = normal_sf(z);
    p_less = normal_cdf(z);
  }
  switch (alt) {
    case Alternative::greater: out.p = p_greater; break;
    case Alternative::less: out.p = p_less; break;
    case Alternative::two_sided: out.p = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
  }
  return out;
}

inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double> &a, const std::vector<double> &b,
                                           Alternative alt = Alternative::greater) {
  return wilcoxon_signed_rank(std::span<const double>(a), std::span<const double>(b), alt);
}

struct ProportionTest {
  double statistic = 0.0;  // T
  double p = 0.5;          // upper tail, H1: pA > pB
};

/// Score test for two success rates measured on n trials each:
/// T = (pA - pB) / sqrt(p (1 - p) 2 / n), p = (pA + pB) / 2.
inline ProportionTest binomial_proportion_test(double pa, double pb, Index n) {
  require(pa >= 0.0 && pa <= 1.0 && pb >= 0.0 && pb <= 1.0, "rates must lie in [0, 1]");
  require(n >= 1, "trial count must be >= 1");
  const double pooled = 0.5 * (pa + pb);
  if (pooled <= 0.0 || pooled >= 1.0) throw DegenerateTest("pooled proportion is 0 or 1");
  ProportionTest out;
  out.statistic = (pa - pb) / std::sqrt(pooled * (1.0 - pooled) * 2.0 / static_cast<double>(n));
  out.p = normal_sf(out.statistic);
  return out;
}

// ---------------------------------------------------------------------------
// Ridge regression with generalized cross-validation

inline std::vector<double> log_spaced(double lo, double hi, int count) {
  require(lo > 0.0 && hi >= lo && count >= 1, "invalid log-spaced grid");
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return out;
}

/// 30 log-spaced values in [1e-3, 1e3].
inline std::vector<double> default_lambda_grid() { return log_spaced(1e-3, 1e3, 30); }

struct RidgeResult {
  double lambda = 0.0;
  Vector weights;
  std::vector<double> scores;  // GCV per grid entry, NaN where skipped
  int skipped = 0;
};

/// Ridge regression sharing one thin SVD of the feature matrix across many
/// targets and regularization values.
///   GCV(l) = n ||(I - H) t||^2 / tr(I - H)^2,  H = F (F'F + l I)^-1 F'.
class RidgeGcv {
public:
  explicit RidgeGcv(const Matrix &features) : rows_(features.rows()) {
    require(features.cols() >= 1, "ridge needs at least one feature");
    require(features.rows() >= 1, "ridge needs at least one sample");
    Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    s_ = svd.singularValues();
    v_ = svd.matrixV();
  }

  double gcv(const Vector &t, double lambda) const {
    const Vector ut = u_.transpose() * t;
    return score(t, ut, lambda);
  }

  Vector weights(const Vector &t, double lambda) const {
    const Vector ut = u_.transpose() * t;
    const Vector filt = s_.array() / (s_.array().square() + lambda);
    return v_ * (filt.asDiagonal() * ut);
  }

  RidgeResult fit(const Vector &t, std::span<const double> grid) const {
    require(!grid.empty(), "lambda grid is empty");
    require(t.size() == rows_, "target length does not match feature rows");
    const Vector ut = u_.transpose() * t;
    RidgeResult out;
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
      require(lambda > 0.0, "lambda values must be positive");
      const double g = score(t, ut, lambda);
      out.scores.push_back(g);
      if (!std::isfinite(g)) {
        ++out.skipped;
        continue;
      }
      if (g < best) {
        best = g;
        out.lambda = lambda;
      }
    }
    if (!std::isfinite(best)) throw UndefinedScore("ridge_gcv: no lambda gave a defined GCV score");
    const Vector filt = s_.array() / (s_.array().square() + out.lambda);
    out.weights = v_ * (filt.asDiagonal() * ut);
    return out;
  }

private:
  double score(const Vector &t, const Vector &ut, double lambda) const {
    const double n = static_cast<double>(rows_);
    const Eigen::ArrayXd shrink = s_.array().square() / (s_.array().square() + lambda);
    const double outside = std::max(0.0, t.squaredNorm() - ut.squaredNorm());
    const double resid = outside + ((1.0 - shrink) * ut.array()).square().sum();
    const double trace = n - shrink.sum();
    if (!(trace > 1e-12 * n)) return std::numeric_limits<double>::quiet_NaN();
    return n * resid / (trace * trace);
  }

  Index rows_;
  Matrix u_;
  Vector s_;
  Matrix v_;
};

inline RidgeResult ridge_gcv(const Matrix &features, const Vector &t,
                             std::span<const double> grid) {
  return RidgeGcv(features).fit(t, grid);
}

// ---------------------------------------------------------------------------
// Image identification

struct IdentificationResult {
  double accuracy = 0.0;
  std::vector<int> choices;  // chosen predicted row per measured row, -1 if excluded
  int ties = 0;              // rows where another candidate matched the best correlation
  int excluded = 0;          // zero-variance measured rows (counted as misses)
};

/// For every measured row, picks the predicted row with the highest Pearson
/// correlation across voxels (lowest index wins ties).
inline IdentificationResult identify_images(const Matrix &predicted, const Matrix &measured) {
  require(predicted.rows() == measured.rows() && predicted.cols() == measured.cols(),
          "predicted and measured matrices must have the same shape");
  require(predicted.rows() >= 2, "identification needs at least two candidates");
  require(predicted.cols() >= 2, "identification needs at least two voxels");
  const Index m = predicted.rows();
  auto centered_unit = [](const Matrix &a) {
    Matrix c = a;
    std::vector<bool> valid(a.rows());
    for (Index i = 0; i < a.rows(); ++i) {
      c.row(i).array() -= c.row(i).mean();
      const double norm = c.row(i).norm();
      valid[i] = norm > 0.0;
      if (valid[i]) c.row(i) /= norm;
    }
    return std::pair{c, valid};
  };
  const auto [p, p_ok] = centered_unit(predicted);
  const auto [q, q_ok] = centered_unit(measured);
  IdentificationResult out;
  out.choices.assign(m, -1);
  int correct = 0;
  for (Index i = 0; i < m; ++i) {
    if (!q_ok[i]) {
      ++out.excluded;
      continue;
    }
    int best = -1;
    double best_r = -std::numeric_limits<double>::infinity();
    bool tied = false;
    for (Index j = 0; j < m; ++j) {
      if (!p_ok[j]) continue;
      const double r = p.row(j).dot(q.row(i));
      if (r > best_r) {
        best_r = r;
        best = static_cast<int>(j);
        tied = false;
      } else if (r == best_r) {
        tied = true;
      }
    }
    out.choices[i] = best;
    if (tied) ++out.ties;
    if (best == static_cast<int>(i)) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(m);
  return out;
}

}  // namespace r1glm
