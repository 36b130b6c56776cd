// Unconstrained estimators: GLM and GLM with separate designs (GLMS), plus
// the peak-amplitude extraction that turns basis coefficients into betas.
#pragma once

#include <vector>

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"
#include "r1glm/hrf_basis.hpp"
#include "r1glm/reduction.hpp"

namespace r1glm {

/// Minimum-norm least squares through a complete orthogonal decomposition;
/// pivots below 1e-10 of the largest are treated as zero.
class LeastSquares {
public:
  explicit LeastSquares(const Matrix &a) : cols_(a.cols()) {
    if (a.cols() == 0) return;
    cod_.setThreshold(kRankTolerance);
    cod_.compute(a);
    rank_ = cod_.rank();
  }

  Vector solve(const Vector &b) const {
    if (cols_ == 0) return Vector(0);
    return cod_.solve(b);
  }

  Index rank() const { return rank_; }
  bool rank_deficient() const { return rank_ < cols_; }

private:
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
  Index cols_ = 0;
  Index rank_ = 0;
};

struct LinearFit {
  Vector coefficients;  // length d*k, condition-major
  Vector omega;         // nuisance weights, length q
  bool rank_deficient = false;
};

class GlmSolver {
public:
  GlmSolver(const DesignMatrix &x, const NuisanceMatrix &z)
      : p_(x.matrix.cols()), ls_(joined(x, z)) {}

  LinearFit solve(const Vector &y) const {
    const Vector all = ls_.solve(y);
    return {all.head(p_), all.tail(all.size() - p_), ls_.rank_deficient()};
  }

private:
  static Matrix joined(const DesignMatrix &x, const NuisanceMatrix &z) {
    require(z.matrix.rows() == x.scans(), "nuisance rows do not match design rows");
    Matrix a(x.scans(), x.matrix.cols() + z.columns());
    a << x.matrix, z.matrix;
    return a;
  }

  Index p_;
  LeastSquares ls_;
};

/// Ordinary GLM: minimizes ||y - X v - Z w||^2. Rank-deficient systems get
/// the pseudoinverse solution and `rank_deficient` set.
inline LinearFit glm_fit(const DesignMatrix &x, const NuisanceMatrix &z, const Vector &y) {
  require(y.size() == x.scans(), "response length does not match design rows");
  return GlmSolver(x, z).solve(y);
}

struct ConditionHrfs {
  Vector betas;
  std::vector<SampledHrf> hrfs;  // each with peak +1 (or all zero)
  SampledHrf mean_hrf;
};

/// For every condition slice v_j, reconstructs B v_j and takes its signed
/// peak as beta_j. HRFs are returned divided by their peak; the mean HRF is
/// the average of the nonzero ones, rescaled to max|.| = 1.
inline ConditionHrfs extract_betas_and_hrfs(const Vector &v, const BasisSet &basis) {
  const Index d = basis.size();
  require(d > 0 && v.size() % d == 0, "coefficient length is not a multiple of the basis size");
  const Index k = v.size() / d;
  ConditionHrfs out;
  out.betas = Vector::Zero(k);
  out.hrfs.reserve(k);
  Vector sum = Vector::Zero(basis.length());
  int used = 0;
  for (Index j = 0; j < k; ++j) {
    const Vector course = basis.matrix * v.segment(j * d, d);
    const double peak = hrf_peak_amplitude(course);
    if (peak == 0.0) {
      out.hrfs.push_back({Vector::Zero(basis.length()), basis.dt});
      continue;
    }
    out.betas[j] = peak;
    out.hrfs.push_back({course / peak, basis.dt});
    sum += out.hrfs.back().samples;
    ++used;
  }
  out.mean_hrf = {used ? Vector(sum / used) : sum, basis.dt};
  const double top = out.mean_hrf.samples.cwiseAbs().maxCoeff();
  if (top > 0.0) out.mean_hrf.samples /= top;
  return out;
}

/// GLMS output: per-condition slices of the separate-design solutions.
struct SeparateFit {
  Matrix slices;  // d x k, column i = first d coefficients of system i
  Matrix rest;    // d x k, coefficients on X1_i
  Matrix omegas;  // q x k
  bool rank_deficient = false;
};

/// Factors the k systems [X0_i X1_i Z] once so that many voxels can share them.
class GlmsSolver {
public:
  GlmsSolver(const SeparateDesigns &s, const NuisanceMatrix &z) : d_(s.basis_size()), q_(z.columns()) {
    require(s.conditions() >= 1, "separate designs need at least one condition");
    require(z.matrix.rows() == s.scans(), "nuisance rows do not match design rows");
    systems_.reserve(s.conditions());
    for (const auto &pair : s.pairs) {
      // With a single condition X1 is identically zero and is left out.
      const bool has_rest = !pair.rest.isZero(0.0);
      Matrix a(s.scans(), d_ + (has_rest ? d_ : 0) + q_);
      if (has_rest) a << pair.own, pair.rest, z.matrix;
      else a << pair.own, z.matrix;
      systems_.push_back({LeastSquares(a), has_rest});
    }
  }

  SeparateFit solve(const Vector &y) const {
    const Index k = static_cast<Index>(systems_.size());
    SeparateFit out;
    out.slices.resize(d_, k);
    out.rest = Matrix::Zero(d_, k);
    out.omegas.resize(q_, k);
    for (Index i = 0; i < k; ++i) {
      const auto &sys = systems_[i];
      const Vector c = sys.ls.solve(y);
      out.slices.col(i) = c.head(d_);
      if (sys.has_rest) out.rest.col(i) = c.segment(d_, d_);
      out.omegas.col(i) = c.tail(q_);
      out.rank_deficient = out.rank_deficient || sys.ls.rank_deficient();
    }
    return out;
  }

  Index conditions() const { return static_cast<Index>(systems_.size()); }

private:
  struct System {
    LeastSquares ls;
    bool has_rest;
  };
  Index d_;
  Index q_;
  std::vector<System> systems_;
};

inline SeparateFit glms_fit(const SeparateDesigns &s, const NuisanceMatrix &z, const Vector &y) {
  require(y.size() == s.scans(), "response length does not match design rows");
  return GlmsSolver(s, z).solve(y);
}

/// Flattens GLMS slices into the condition-major coefficient layout used by
/// extract_betas_and_hrfs.
inline Vector stacked_slices(const SeparateFit &fit) {
  return Eigen::Map<const Vector>(fit.slices.data(), fit.slices.size());
}

}  // namespace r1glm
