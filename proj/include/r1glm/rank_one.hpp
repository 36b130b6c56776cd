// Rank-1 constrained GLM (R1-GLM), its separate-design variant (R1-GLMS) and
// the parametric-HRF variant.
//
// The coefficient vector of the standard GLM is constrained to vec(h b') =
// kron(b, h): one HRF h (basis coefficients, length d) shared by the k
// conditions. The bilinear objective is minimized jointly over the packed
// vector z = [h, b, w (, r)] by the box-constrained quasi-Newton solver with
// -1 <= h <= 1. A term -c ||B(:,1) h_1||^2 keeps h away from the origin;
// it is excluded from the reported objective. After convergence the fit is
// rescaled so that ||Bh||_inf = 1 and <Bh, h_ref> > 0.
#pragma once

#include <functional>
#include <limits>
#include <optional>

#include <boost/math/special_functions/digamma.hpp>

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"
#include "r1glm/hrf_basis.hpp"
#include "r1glm/linear_models.hpp"
#include "r1glm/reduction.hpp"
#include "r1glm/solver.hpp"

namespace r1glm {

inline constexpr double kDefaultPenaltyWeight = 1.0;
inline constexpr double kDegenerateHrfPeak = 1e-8;

struct VoxelFit {
  Vector h;           // basis coefficients (length d); FIR samples for the parametric model
  SampledHrf hrf;     // B h
  Vector beta;        // length k
  Vector omega;       // length q
  std::optional<Vector> rest;  // r, R1-GLMS only
  Vector params;      // HRF parameters, parametric model only
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;     // ||Bh||_inf fell below 1e-8, betas zeroed
  bool rank_warning = false;   // initializer hit a rank-deficient system
  bool reduced = false;        // solved on the QR-reduced system
};

// ---------------------------------------------------------------------------
// Kronecker-structured products. None of them forms a Kronecker matrix.

/// X kron(b, h): the coefficient vector is built, never I (x) h or b (x) I.
inline Vector apply_kron(const Matrix &x, const Vector &beta, const Vector &h) {
  const Index d = h.size();
  Vector u(d * beta.size());
  for (Index j = 0; j < beta.size(); ++j) u.segment(j * d, d) = beta[j] * h;
  return x * u;
}

/// X (I (x) h) b, applying the n x k operator M with columns X_j h.
inline Vector apply_identity_kron_h(const Matrix &x, const Vector &h, const Vector &beta) {
  const Index d = h.size();
  Vector out = Vector::Zero(x.rows());
  for (Index j = 0; j < beta.size(); ++j) out += (x.middleCols(j * d, d) * h) * beta[j];
  return out;
}

/// X (b (x) I) h, applying the n x d operator N = sum_j b_j X_j.
inline Vector apply_beta_kron_identity(const Matrix &x, const Vector &beta, const Vector &h) {
  const Index d = h.size();
  Matrix n = Matrix::Zero(x.rows(), d);
  for (Index j = 0; j < beta.size(); ++j) n += beta[j] * x.middleCols(j * d, d);
  return n * h;
}

// ---------------------------------------------------------------------------
// Objectives. Each is a callable f(z, grad) -> value usable by the solver.

/// 1/2 ||y - X kron(b, h) - Z w||^2 + offset - c ||B(:,1) h_1||^2.
class RankOneObjective {
public:
  RankOneObjective(const Matrix &x, const Vector &y, const Matrix &z, Index d, double penalty,
                   double first_column_sq_norm, double offset = 0.0)
      : x_(x), y_(y), z_(z), d_(d), k_(d > 0 ? x.cols() / d : 0), q_(z.cols()),
        penalty_(penalty * first_column_sq_norm), offset_(offset) {
    require(d_ > 0 && x.cols() == d_ * k_, "design width is not d*k");
    require(y.size() == x.rows() && z.rows() == x.rows(), "system dimensions disagree");
  }

  Index dimension() const { return d_ + k_ + q_; }
  Index basis_size() const { return d_; }
  Index conditions() const { return k_; }

  double operator()(const Vector &zv, Vector &grad) const {
    require(zv.size() == dimension(), "packed vector has the wrong dimension");
    const auto h = zv.head(d_);
    const auto beta = zv.segment(d_, k_);
    const auto omega = zv.tail(q_);
    Vector u(d_ * k_);
    for (Index j = 0; j < k_; ++j) u.segment(j * d_, d_) = beta[j] * h;
    Vector res = y_ - x_ * u;
    if (q_ > 0) res.noalias() -= z_ * omega;
    const Vector xt_res = x_.transpose() * res;
    const Eigen::Map<const Matrix> g(xt_res.data(), d_, k_);
    grad.resize(dimension());
    grad.head(d_).noalias() = -(g * beta);
    grad.segment(d_, k_).noalias() = -(g.transpose() * h);
    if (q_ > 0) grad.tail(q_).noalias() = -(z_.transpose() * res);
    grad[0] -= 2.0 * penalty_ * h[0];
    return 0.5 * res.squaredNorm() + offset_ - penalty_ * h[0] * h[0];
  }

private:
  const Matrix &x_;
  const Vector &y_;
  const Matrix &z_;
  Index d_, k_, q_;
  double penalty_;
  double offset_;
};

/// 1/2 sum_i ||y - b_i X0_i h - r_i X1_i h - Z w||^2 + offset - c ||B(:,1) h_1||^2
/// over z = [h, b, w, r].
class SeparateRankOneObjective {
public:
  SeparateRankOneObjective(const SeparateDesigns &s, const Vector &y, const Matrix &z,
                           double penalty, double first_column_sq_norm, double offset = 0.0)
      : s_(s), y_(y), z_(z), d_(s.basis_size()), k_(s.conditions()), q_(z.cols()),
        penalty_(penalty * first_column_sq_norm), offset_(offset) {
    require(k_ >= 1 && d_ >= 1, "separate designs are empty");
    require(y.size() == s.scans() && z.rows() == s.scans(), "system dimensions disagree");
  }

  Index dimension() const { return d_ + 2 * k_ + q_; }

  double operator()(const Vector &zv, Vector &grad) const {
    require(zv.size() == dimension(), "packed vector has the wrong dimension");
    const auto h = zv.head(d_);
    const auto beta = zv.segment(d_, k_);
    const auto omega = zv.segment(d_ + k_, q_);
    const auto rest = zv.tail(k_);
    Vector base = y_;
    if (q_ > 0) base.noalias() -= z_ * omega;
    grad.setZero(dimension());
    Vector res_sum = Vector::Zero(y_.size());
    double value = 0.0;
    for (Index i = 0; i < k_; ++i) {
      const auto &pair = s_.pairs[i];
      const Vector a = pair.own * h;
      const Vector b = pair.rest * h;
      const Vector res = base - beta[i] * a - rest[i] * b;
      value += 0.5 * res.squaredNorm();
      grad.head(d_).noalias() -= beta[i] * (pair.own.transpose() * res) + rest[i] * (pair.rest.transpose() * res);
      grad[d_ + i] = -a.dot(res);
      grad[d_ + k_ + q_ + i] = -b.dot(res);
      res_sum += res;
    }
    if (q_ > 0) grad.segment(d_ + k_, q_).noalias() = -(z_.transpose() * res_sum);
    grad[0] -= 2.0 * penalty_ * h[0];
    return value + offset_ - penalty_ * h[0] * h[0];
  }

private:
  const SeparateDesigns &s_;
  const Vector &y_;
  const Matrix &z_;
  Index d_, k_, q_;
  double penalty_;
  double offset_;
};

/// Value and gradient of the R1 objective at z = [h, b, w].
inline std::pair<double, Vector> r1_objective_grad(const Vector &zv, const DesignMatrix &x,
                                                   const Vector &y, const NuisanceMatrix &z,
                                                   const BasisSet &basis,
                                                   double penalty_weight = kDefaultPenaltyWeight) {
  require(basis.size() == x.basis_size, "basis does not match the design");
  const RankOneObjective f(x.matrix, y, z.matrix, x.basis_size, penalty_weight,
                           basis.matrix.col(0).squaredNorm());
  Vector grad;
  const double value = f(zv, grad);
  return {value, std::move(grad)};
}

/// Value and gradient of the R1-S objective at z = [h, b, w, r].
inline std::pair<double, Vector> r1s_objective_grad(const Vector &zv, const SeparateDesigns &s,
                                                    const Vector &y, const NuisanceMatrix &z,
                                                    const BasisSet &basis,
                                                    double penalty_weight = kDefaultPenaltyWeight) {
  require(basis.size() == s.basis_size(), "basis does not match the design");
  const SeparateRankOneObjective f(s, y, z.matrix, penalty_weight,
                                   basis.matrix.col(0).squaredNorm());
  Vector grad;
  const double value = f(zv, grad);
  return {value, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Finalization

/// Rescales (h, b, r) so that ||Bh||_inf = 1 with <Bh, h_ref> >= 0. The
/// product kron(b, h) is unchanged. Near-zero HRFs zero the betas instead.
inline void finalize_rank_one(VoxelFit &fit, const BasisSet &basis) {
  const Vector course = basis.matrix * fit.h;
  const double peak = course.size() ? course.cwiseAbs().maxCoeff() : 0.0;
  fit.hrf.dt = basis.dt;
  if (!(peak >= kDegenerateHrfPeak)) {
    fit.degenerate = true;
    fit.beta.setZero();
    if (fit.rest) fit.rest->setZero();
    fit.hrf.samples = Vector::Zero(course.size());
    return;
  }
  const double scale = peak * sign_of(course.dot(basis.reference.samples));
  fit.h /= scale;
  fit.beta *= scale;
  if (fit.rest) *fit.rest *= scale;
  fit.hrf.samples = basis.matrix * fit.h;
}

// ---------------------------------------------------------------------------
// Initialization

struct RankOneStart {
  Vector h;
  Vector beta;
  Vector omega;
  Vector rest;  // used by R1-GLMS only
  bool rank_warning = false;
};

/// Collapses the k GLMS HRF slices into one starting HRF. Each slice is
/// divided by its peak amplitude p_j; the slices are then averaged with
/// weights p_j^2, which is the least-squares h for fixed betas p. h is scaled
/// to ||Bh||_inf = 1 and, if needed, into the box ||h||_inf <= 1.
inline RankOneStart rank_one_start_from_glms(const SeparateFit &glms, const BasisSet &basis) {
  const Index d = glms.slices.rows();
  const Index k = glms.slices.cols();
  RankOneStart start;
  start.rank_warning = glms.rank_deficient;
  Vector peaks(k), rest_peaks(k);
  for (Index j = 0; j < k; ++j) {
    peaks[j] = hrf_peak_amplitude(Vector(basis.matrix * glms.slices.col(j)));
    rest_peaks[j] = hrf_peak_amplitude(Vector(basis.matrix * glms.rest.col(j)));
  }
  const double weight = peaks.squaredNorm();
  start.omega = glms.omegas.rowwise().mean();
  if (!(weight > 0.0)) {
    start.h = Vector::Zero(d);
    start.h[0] = 1.0;
    start.beta = Vector::Zero(k);
    start.rest = Vector::Zero(k);
    return start;
  }
  start.h = glms.slices * peaks / weight;
  double scale = (basis.matrix * start.h).cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  start.h /= scale;
  const double box = std::max(1.0, start.h.cwiseAbs().maxCoeff());
  start.h /= box;
  start.beta = peaks * (scale * box);
  start.rest = rest_peaks * (scale * box);
  return start;
}

// ---------------------------------------------------------------------------
// R1-GLM / R1-GLMS

struct RankOneOptions {
  bool use_qr = true;
  double penalty_weight = kDefaultPenaltyWeight;
};

/// Shared per-design state (factorizations, reduced matrices) for fitting many
/// voxels with R1-GLM or R1-GLMS. `fit` is const and thread-safe.
class RankOneProblem {
public:
  RankOneProblem(const DesignMatrix &x, const NuisanceMatrix &z, const BasisSet &basis,
                 bool separate, const SolverConfig &config = {}, const RankOneOptions &options = {})
      : x_(x), z_(z), basis_(basis), separate_(separate), config_(config), options_(options),
        s_(separate_from_design(x)), glms_(s_, z) {
    config_.validate();
    require(basis.size() == x.basis_size, "basis does not match the design");
    require(z.matrix.rows() == x.scans(), "nuisance rows do not match design rows");
    require(x.scans() >= x.basis_size + x.conditions + z.columns(),
            "too few scans for the rank-1 parameter count d + k + q");
    b1_sq_ = basis.matrix.col(0).squaredNorm();
    if (options_.use_qr) {
      qr_.emplace(x.matrix, z.matrix);
      if (qr_->usable()) {
        work_x_ = qr_->reduce(x.matrix);
        work_z_ = qr_->reduce(z.matrix);
        DesignMatrix reduced = x;
        reduced.matrix = work_x_;
        work_s_ = separate_from_design(reduced);
      } else {
        qr_.reset();
      }
    }
    if (!qr_) {
      work_x_ = x.matrix;
      work_z_ = z.matrix;
      work_s_ = s_;
    }
  }

  bool reduced() const { return qr_.has_value(); }
  bool separate() const { return separate_; }
  const GlmsSolver &glms() const { return glms_; }
  const BasisSet &basis() const { return basis_; }

  RankOneStart initial_guess(const Vector &y) const {
    return rank_one_start_from_glms(glms_.solve(y), basis_);
  }

  VoxelFit fit(const Vector &y, const std::optional<RankOneStart> &init = std::nullopt) const {
    require(y.size() == x_.scans(), "response length does not match design rows");
    const Index d = x_.basis_size;
    const Index k = x_.conditions;
    const Index q = z_.columns();

    VoxelFit out;
    out.reduced = reduced();
    if (y.isZero(0.0)) {
      out.h = Vector::Zero(d);
      out.h[0] = 1.0;
      out.beta = Vector::Zero(k);
      out.omega = Vector::Zero(q);
      if (separate_) out.rest = Vector::Zero(k);
      out.converged = true;
      finalize_rank_one(out, basis_);
      return out;
    }

    const RankOneStart start = init ? *init : initial_guess(y);
    require(start.h.size() == d && start.beta.size() == k && start.omega.size() == q,
            "initializer dimensions do not match the design");
    out.rank_warning = start.rank_warning;

    Vector work_y = y;
    double offset = 0.0;
    if (qr_) std::tie(work_y, offset) = qr_->reduce_response(y);

    const Index dim = d + k + q + (separate_ ? k : 0);
    Vector z0(dim);
    z0.head(d) = start.h.cwiseMax(-1.0).cwiseMin(1.0);
    z0.segment(d, k) = start.beta;
    z0.segment(d + k, q) = start.omega;
    if (separate_) {
      require(start.rest.size() == k, "initializer has no rest activations");
      z0.tail(k) = start.rest;
    }
    const double inf = std::numeric_limits<double>::infinity();
    Vector lower = Vector::Constant(dim, -inf);
    Vector upper = Vector::Constant(dim, inf);
    lower.head(d).setConstant(-1.0);
    upper.head(d).setConstant(1.0);

    SolverResult result;
    Vector scratch;
    if (separate_) {
      const double total_offset = offset * static_cast<double>(k);
      const SeparateRankOneObjective f(work_s_, work_y, work_z_, options_.penalty_weight, b1_sq_,
                                       total_offset);
      result = lbfgs_box_minimize(f, z0, lower, upper, config_);
      const SeparateRankOneObjective plain(work_s_, work_y, work_z_, 0.0, b1_sq_, total_offset);
      out.objective = plain(result.x, scratch);
      out.initial_objective = plain(z0, scratch);
    } else {
      const RankOneObjective f(work_x_, work_y, work_z_, d, options_.penalty_weight, b1_sq_, offset);
      result = lbfgs_box_minimize(f, z0, lower, upper, config_);
      const RankOneObjective plain(work_x_, work_y, work_z_, d, 0.0, b1_sq_, offset);
      out.objective = plain(result.x, scratch);
      out.initial_objective = plain(z0, scratch);
    }

    out.h = result.x.head(d);
    out.beta = result.x.segment(d, k);
    out.omega = result.x.segment(d + k, q);
    if (separate_) out.rest = result.x.tail(k);
    out.iterations = result.iterations;
    out.converged = result.converged;
    finalize_rank_one(out, basis_);
    return out;
  }

private:
  DesignMatrix x_;
  NuisanceMatrix z_;
  BasisSet basis_;
  bool separate_;
  SolverConfig config_;
  RankOneOptions options_;
  SeparateDesigns s_;
  GlmsSolver glms_;
  double b1_sq_ = 0.0;
  std::optional<QrReduction> qr_;
  Matrix work_x_;
  Matrix work_z_;
  SeparateDesigns work_s_;
};

inline VoxelFit r1glm_fit(const DesignMatrix &x, const Vector &y, const NuisanceMatrix &z,
                          const BasisSet &basis, const SolverConfig &config = {},
                          const std::optional<RankOneStart> &init = std::nullopt,
                          const RankOneOptions &options = {}) {
  return RankOneProblem(x, z, basis, false, config, options).fit(y, init);
}

inline VoxelFit r1glms_fit(const SeparateDesigns &s, const Vector &y, const NuisanceMatrix &z,
                           const BasisSet &basis, const SolverConfig &config = {},
                           const std::optional<RankOneStart> &init = std::nullopt,
                           const RankOneOptions &options = {}) {
  return RankOneProblem(design_from_separate(s), z, basis, true, config, options).fit(y, init);
}

// ---------------------------------------------------------------------------
// Parametric HRF

/// A smooth map from HRF parameters to HRF samples on the FIR grid.
struct ParametricHrfModel {
  std::function<Vector(const Vector &)> evaluate;
  /// Optional analytic Jacobian (length x parameters); forward differences otherwise.
  std::function<Matrix(const Vector &)> jacobian;
  Vector lower;
  Vector upper;
  Vector initial;
  SampledHrf reference;

  Index parameters() const { return initial.size(); }
  Index length() const { return reference.length(); }
};

/// Two-parameter double gamma (peak delay, undershoot delay) sampled at
/// t = 0, dt, ..., (length-1) dt. Samples are divided by the response gamma
/// density at its mode, so the peak stays near 1 for all parameters.
inline ParametricHrfModel double_gamma_model(double dt, Index length) {
  require(dt > 0.0 && length >= 2, "parametric HRF needs dt > 0 and at least two samples");
  ParametricHrfModel m;
  m.evaluate = [dt, length](const Vector &alpha) {
    DoubleGammaParams p;
    p.peak_delay = alpha[0];
    p.undershoot_delay = alpha[1];
    const double mode = p.peak_delay - 1.0;
    const double norm = gamma_density(mode, p.peak_delay, 1.0);
    Vector out(length);
    for (Index i = 0; i < length; ++i) out[i] = double_gamma(static_cast<double>(i) * dt, p) / norm;
    return out;
  };
  // d/da gamma(t; a, 1) = gamma(t; a, 1) (ln t - psi(a)) and the log of the
  // mode normalizer has derivative ln(a - 1) - psi(a).
  m.jacobian = [dt, length](const Vector &alpha) {
    const double a1 = alpha[0], a2 = alpha[1];
    const double norm = gamma_density(a1 - 1.0, a1, 1.0);
    const double psi1 = boost::math::digamma(a1), psi2 = boost::math::digamma(a2);
    const double dlog_norm = std::log(a1 - 1.0) - psi1;
    Matrix jac = Matrix::Zero(length, 2);
    for (Index i = 1; i < length; ++i) {
      const double t = static_cast<double>(i) * dt;
      const double g1 = gamma_density(t, a1, 1.0), g2 = gamma_density(t, a2, 1.0) / 6.0;
      const double lt = std::log(t);
      jac(i, 0) = (g1 * (lt - psi1) - (g1 - g2) * dlog_norm) / norm;
      jac(i, 1) = -g2 * (lt - psi2) / norm;
    }
    return jac;
  };
  m.lower = Eigen::Vector2d(2.0, 8.0);
  m.upper = Eigen::Vector2d(12.0, 26.0);
  m.initial = Eigen::Vector2d(6.0, 16.0);
  m.reference = detail::canonical_on_grid(dt, length);
  return m;
}

/// Model Jacobian (length x parameters): analytic when the model provides
/// one, forward differences otherwise.
inline Matrix model_jacobian(const ParametricHrfModel &model, const Vector &alpha, const Vector &h) {
  if (model.jacobian) return model.jacobian(alpha);
  Matrix jac(h.size(), alpha.size());
  Vector probe = alpha;
  for (Index i = 0; i < alpha.size(); ++i) {
    const double step = 1e-7 * std::max(1.0, std::abs(alpha[i]));
    probe[i] = alpha[i] + step;
    jac.col(i) = (model.evaluate(probe) - h) / step;
    probe[i] = alpha[i];
  }
  return jac;
}

/// F_R1(h(alpha), b, w) over z = [alpha, b, w], X built with the FIR basis.
/// The HRF gradient is pulled back through the model Jacobian.
class ParametricObjective {
public:
  ParametricObjective(const ParametricHrfModel &model, const Matrix &x, const Vector &y,
                      const Matrix &z, double offset = 0.0)
      : model_(model), inner_(x, y, z, model.length(), 0.0, 0.0, offset),
        p_(model.parameters()) {}

  Index dimension() const { return p_ + inner_.dimension() - inner_.basis_size(); }

  double operator()(const Vector &zv, Vector &grad) const {
    require(zv.size() == dimension(), "packed vector has the wrong dimension");
    const Index l = inner_.basis_size();
    const Vector alpha = zv.head(p_);
    const Vector h = model_.evaluate(alpha);
    Vector inner_z(inner_.dimension());
    inner_z << h, zv.tail(zv.size() - p_);
    Vector inner_g;
    const double value = inner_(inner_z, inner_g);
    grad.resize(dimension());
    grad.head(p_) = model_jacobian(model_, alpha, h).transpose() * inner_g.head(l);
    grad.tail(zv.size() - p_) = inner_g.tail(inner_g.size() - l);
    return value;
  }

private:
  const ParametricHrfModel &model_;
  RankOneObjective inner_;
  Index p_;
};

inline VoxelFit r1glm_parametric_fit(const ParametricHrfModel &model, const DesignMatrix &x_fir,
                                     const Vector &y, const NuisanceMatrix &z,
                                     const SolverConfig &config = {},
                                     const std::optional<Vector> &init_params = std::nullopt,
                                     bool use_qr = true) {
  config.validate();
  require(model.parameters() >= 1, "parametric model has no parameters");
  require(x_fir.basis_size == model.length(), "design must be built with an FIR basis of the model length");
  require(y.size() == x_fir.scans(), "response length does not match design rows");
  const Index k = x_fir.conditions;
  const Index q = z.columns();
  const Index p = model.parameters();
  const Vector alpha0 = init_params ? *init_params : model.initial;
  require(alpha0.size() == p, "initial parameters have the wrong dimension");

  // Betas and drift for the initial HRF by ordinary least squares.
  const Vector h0 = model.evaluate(alpha0);
  Matrix reduced_design(x_fir.scans(), k + q);
  for (Index j = 0; j < k; ++j) reduced_design.col(j) = x_fir.block(j) * h0;
  reduced_design.rightCols(q) = z.matrix;
  const LeastSquares ls(reduced_design);
  const Vector coef = ls.solve(y);

  const Matrix *work_x = &x_fir.matrix;
  const Matrix *work_z = &z.matrix;
  const Vector *work_y = &y;
  Matrix rx, rz;
  Vector ry;
  double offset = 0.0;
  VoxelFit out;
  out.rank_warning = ls.rank_deficient();
  if (use_qr) {
    QrReduction qr(x_fir.matrix, z.matrix);
    if (qr.usable()) {
      rx = qr.reduce(x_fir.matrix);
      rz = qr.reduce(z.matrix);
      std::tie(ry, offset) = qr.reduce_response(y);
      work_x = &rx;
      work_z = &rz;
      work_y = &ry;
      out.reduced = true;
    }
  }

  const ParametricObjective f(model, *work_x, *work_y, *work_z, offset);
  Vector z0(p + k + q);
  z0 << alpha0.cwiseMax(model.lower).cwiseMin(model.upper), coef;
  const double inf = std::numeric_limits<double>::infinity();
  Vector lower = Vector::Constant(z0.size(), -inf);
  Vector upper = Vector::Constant(z0.size(), inf);
  lower.head(p) = model.lower;
  upper.head(p) = model.upper;
  Vector scratch;
  out.initial_objective = f(z0, scratch);
  const SolverResult result = lbfgs_box_minimize(f, z0, lower, upper, config);

  out.params = result.x.head(p);
  out.beta = result.x.segment(p, k);
  out.omega = result.x.tail(q);
  out.objective = result.value;
  out.iterations = result.iterations;
  out.converged = result.converged;
  out.h = model.evaluate(out.params);

  BasisSet fir = make_fir_basis(model.length(), model.reference.dt);
  fir.reference = model.reference;
  finalize_rank_one(out, fir);
  return out;
}

}  // namespace r1glm
