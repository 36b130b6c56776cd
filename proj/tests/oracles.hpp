// Test-only reference computations. Everything here is written independently
// of the library code paths it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Gamma(shape, scale=1) density via tgamma, no log-space tricks.
inline double gamma_pdf(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  return std::pow(t, shape - 1.0) * std::exp(-t / scale) / (std::tgamma(shape) * std::pow(scale, shape));
}

/// Double gamma with peak delay 6, undershoot 16, dispersions 1, ratio 1/6.
inline double canonical(double t, double peak = 6.0, double under = 16.0, double disp = 1.0) {
  return gamma_pdf(t, peak / disp, disp) - gamma_pdf(t, under, 1.0) / 6.0;
}

inline MatrixXd random_matrix(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline VectorXd random_vector(std::mt19937_64 &rng, Eigen::Index n) {
  return random_matrix(rng, n, 1).col(0);
}

/// Explicit Kronecker product.
inline MatrixXd kron(const MatrixXd &a, const MatrixXd &b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Pseudoinverse from a full SVD.
inline MatrixXd pinv(const MatrixXd &a, double rel = 1e-10) {
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &s = svd.singularValues();
  MatrixXd sinv = MatrixXd::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rel * s[0]) sinv(i, i) = 1.0 / s[i];
  return svd.matrixV() * sinv * svd.matrixU().transpose();
}

/// Central-difference gradient of a scalar function.
inline VectorXd central_gradient(const std::function<double(const VectorXd &)> &f, const VectorXd &x,
                                 double step) {
  VectorXd g(x.size());
  VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + step;
    const double up = f(p);
    p[i] = x[i] - step;
    const double down = f(p);
    p[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Dense discrete convolution of two sequences (full length).
inline VectorXd convolve(const VectorXd &a, const VectorXd &b) {
  VectorXd out = VectorXd::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

/// Kendall tau-b by enumerating pairs with sign products.
inline double kendall_brute(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0, ta = 0.0, tb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i == j) continue;
      const double sa = (a[i] > a[j]) - (a[i] < a[j]);
      const double sb = (b[i] > b[j]) - (b[i] < b[j]);
      s += sa * sb;
      ta += sa * sa;
      tb += sb * sb;
    }
  return s / std::sqrt(ta * tb);
}

/// Exact P(W+ >= w) by enumerating all 2^n sign patterns over the given ranks.
inline double wilcoxon_tail_brute(const std::vector<double> &ranks, double w) {
  const std::size_t n = ranks.size();
  double hits = 0.0;
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1UL << i)) s += ranks[i];
    if (s >= w - 1e-12) hits += 1.0;
  }
  return hits / static_cast<double>(1UL << n);
}

/// Least-squares polynomial value at `at` for samples (x, y).
inline double polyfit_eval(const std::vector<double> &x, const std::vector<double> &y, int degree, double at) {
  const Eigen::Index m = static_cast<Eigen::Index>(x.size());
  const int p = std::min<int>(degree, static_cast<int>(m) - 1) + 1;
  MatrixXd v(m, p);
  VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int c = 0; c < p; ++c) v(i, c) = std::pow(x[i] - at, c);
    t[i] = y[i];
  }
  const VectorXd coef = v.colPivHouseholderQr().solve(t);
  return coef[0];
}

}  // namespace oracle
