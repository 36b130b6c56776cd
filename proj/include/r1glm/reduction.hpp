// Thin-QR reduction of least-squares systems with a nuisance block.
//
// With [X Z] = Q R (thin), every residual y - X a - Z b splits into a part in
// span(Q) and the fixed orthogonal part (I - QQ')y, so
//   1/2 ||y - X a - Z b||^2 = 1/2 ||Q'y - Q'X a - Q'Z b||^2 + 1/2 ||(I - QQ')y||^2.
// Objectives can then run on p = dk + q rows instead of n.
#pragma once

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"

namespace r1glm {

inline constexpr double kRankTolerance = 1e-10;

class QrReduction {
public:
  QrReduction(const Matrix &x, const Matrix &z) {
    const Index n = x.rows();
    const Index p = x.cols() + z.cols();
    require(z.rows() == n, "nuisance rows do not match design rows");
    if (n <= p || p == 0) return;
    Matrix joint(n, p);
    joint << x, z;
    Eigen::ColPivHouseholderQR<Matrix> qr(joint);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < p) return;
    q_ = qr.householderQ() * Matrix::Identity(n, p);
    usable_ = true;
  }

  /// False when the system is rank deficient or already square; callers then
  /// work on the original rows.
  bool usable() const { return usable_; }
  Index rows() const { return q_.cols(); }
  const Matrix &q() const { return q_; }

  Matrix reduce(const Matrix &a) const { return q_.transpose() * a; }

  /// Returns Q'y and the constant 1/2 ||(I - QQ')y||^2.
  std::pair<Vector, double> reduce_response(const Vector &y) const {
    Vector reduced = q_.transpose() * y;
    const double offset = 0.5 * (y - q_ * reduced).squaredNorm();
    return {std::move(reduced), offset};
  }

private:
  Matrix q_;
  bool usable_ = false;
};

struct ReducedSystem {
  DesignMatrix x;
  NuisanceMatrix z;
  Vector y;
  double offset = 0.0;
  bool reduced = false;  // false: reduction skipped, system returned as is
};

/// Reduces (X, Z, y) to dk + q rows plus a constant offset. Rank-deficient or
/// non-tall systems are returned unchanged with `reduced == false`.
inline ReducedSystem qr_reduce(const DesignMatrix &x, const NuisanceMatrix &z, const Vector &y) {
  require(y.size() == x.scans(), "response length does not match design rows");
  QrReduction qr(x.matrix, z.matrix);
  ReducedSystem out;
  if (!qr.usable()) {
    out.x = x;
    out.z = z;
    out.y = y;
    return out;
  }
  out.x = x;
  out.x.matrix = qr.reduce(x.matrix);
  out.z.matrix = qr.reduce(z.matrix);
  std::tie(out.y, out.offset) = qr.reduce_response(y);
  out.reduced = true;
  return out;
}

}  // namespace r1glm
