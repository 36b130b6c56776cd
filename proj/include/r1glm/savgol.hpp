// Savitzky-Golay smoothing and detrending.
#pragma once

#include <algorithm>
#include <vector>

#include "r1glm/core.hpp"

namespace r1glm {

namespace detail {

/// Weights w such that w'y over the window [first, last] is the value at
/// `center` of the least-squares polynomial of the given degree.
inline Vector savgol_weights(Index first, Index last, Index center, Index degree) {
  const Index m = last - first + 1;
  const Index p = std::min(degree, m - 1) + 1;
  const double half = std::max<double>(1.0, 0.5 * static_cast<double>(m - 1));
  Matrix vander(m, p);
  for (Index r = 0; r < m; ++r) {
    const double x = static_cast<double>(first + r - center) / half;
    double power = 1.0;
    for (Index c = 0; c < p; ++c) {
      vander(r, c) = power;
      power *= x;
    }
  }
  // The fitted value at the center is the intercept c0 = e0' R^-1 Q' y.
  const Eigen::HouseholderQR<Matrix> qr(vander);
  const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  Vector e0 = Vector::Zero(p);
  e0[0] = 1.0;
  const Vector a = r.transpose().triangularView<Eigen::Lower>().solve(e0);
  const Matrix q = qr.householderQ() * Matrix::Identity(m, p);
  return q * a;
}

}  // namespace detail

/// Savitzky-Golay smoother for series of a fixed length. Each sample is
/// replaced by the value of the least-squares polynomial over the centered
/// window; near the edges the window is truncated and refitted. Weights are
/// computed once, so one filter can be applied to many voxels.
class SavgolFilter {
public:
  SavgolFilter(Index length, Index window, Index degree) : n_(length), half_(window / 2) {
    require(window >= 1 && window % 2 == 1, "Savitzky-Golay window must be odd");
    require(degree >= 0 && window > degree, "Savitzky-Golay window must exceed the degree");
    require(length >= window, "series is shorter than the Savitzky-Golay window");
    interior_ = detail::savgol_weights(0, window - 1, half_, degree);
    for (Index i = 0; i < half_; ++i) {
      head_.push_back(detail::savgol_weights(0, std::min(n_ - 1, i + half_), i, degree));
      const Index j = n_ - 1 - i;
      tail_.push_back(detail::savgol_weights(std::max<Index>(0, j - half_), n_ - 1, j, degree));
    }
  }

  Vector smooth(const Vector &y) const {
    require(y.size() == n_, "series length does not match the filter");
    Vector out(n_);
    const Index window = 2 * half_ + 1;
    for (Index i = half_; i < n_ - half_; ++i) out[i] = interior_.dot(y.segment(i - half_, window));
    for (Index i = 0; i < half_; ++i) {
      out[i] = head_[i].dot(y.head(head_[i].size()));
      out[n_ - 1 - i] = tail_[i].dot(y.tail(tail_[i].size()));
    }
    return out;
  }

  Vector detrend(const Vector &y) const { return y - smooth(y); }

private:
  Index n_;
  Index half_;
  Vector interior_;
  std::vector<Vector> head_;
  std::vector<Vector> tail_;
};

inline Vector savgol_smooth(const Vector &y, Index window, Index degree) {
  return SavgolFilter(y.size(), window, degree).smooth(y);
}

/// y minus its Savitzky-Golay smooth (defaults: window 91 samples, degree 4).
inline Vector savgol_detrend(const Vector &y, Index window = 91, Index degree = 4) {
  return SavgolFilter(y.size(), window, degree).detrend(y);
}

}  // namespace r1glm
