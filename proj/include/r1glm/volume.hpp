// Whole-volume fitting: every voxel is an independent task.
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "r1glm/core.hpp"
#include "r1glm/design.hpp"
#include "r1glm/linear_models.hpp"
#include "r1glm/rank_one.hpp"

namespace r1glm {

enum class Method { glm, glms, r1glm, r1glms, r1param };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::glm: return "glm";
    case Method::glms: return "glms";
    case Method::r1glm: return "r1glm";
    case Method::r1glms: return "r1glms";
    case Method::r1param: return "r1param";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  if (name == "glm") return Method::glm;
  if (name == "glms") return Method::glms;
  if (name == "r1glm") return Method::r1glm;
  if (name == "r1glms") return Method::r1glms;
  if (name == "r1param") return Method::r1param;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected glm, glms, r1glm, r1glms or r1param)");
}

inline bool is_rank_one(Method m) { return m == Method::r1glm || m == Method::r1glms || m == Method::r1param; }

/// Runs body(i) for i in [0, count) on `jobs` threads. Work is claimed one
/// index at a time; results must be written to per-index slots.
template <class Body>
void parallel_for(Index count, int jobs, Body &&body) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<Index>(count, 1))));
  if (jobs == 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) body(i);
    });
  for (auto &t : workers) t.join();
}

struct VolumeInputs {
  DesignMatrix x;   // built with `basis`
  NuisanceMatrix z;
  BasisSet basis;
  std::optional<ParametricHrfModel> model;  // r1param only
};

struct VolumeOptions {
  Method method = Method::r1glm;
  SolverConfig solver;
  bool use_qr = true;
  int jobs = 1;
  double penalty_weight = kDefaultPenaltyWeight;
};

struct VoxelDiagnostics {
  int iterations = 0;
  bool converged = true;
  bool degenerate = false;
  bool rank_warning = false;
  double objective = 0.0;
  std::string error;  // non-empty when the voxel fit threw
};

struct VolumeFit {
  Matrix betas;  // V x k
  Matrix hrfs;   // V x L, the (mean) HRF used for each voxel
  std::vector<VoxelDiagnostics> diagnostics;
  std::vector<VoxelFit> fits;  // rank-1 methods only

  Index failures() const {
    return std::count_if(diagnostics.begin(), diagnostics.end(),
                         [](const VoxelDiagnostics &d) { return !d.error.empty(); });
  }
};

/// Fits every column of Y (n x V). Output is independent of `jobs`: each
/// voxel runs the same single-voxel code path against shared, read-only
/// factorizations. A voxel that throws is recorded in its diagnostics and
/// leaves zero betas.
inline VolumeFit fit_volume(const Matrix &y, const VolumeInputs &in, const VolumeOptions &opt) {
  require(y.cols() >= 1, "volume has no voxels");
  require(y.rows() == in.x.scans(), "data rows do not match the design");
  const Index voxels = y.cols();
  const Index k = in.x.conditions;

  VolumeFit out;
  out.betas = Matrix::Zero(voxels, k);
  out.diagnostics.resize(voxels);

  auto guarded = [&](Index v, auto &&work) {
    try {
      require(y.col(v).allFinite(), "voxel " + std::to_string(v) + " has non-finite samples");
      work(v);
    } catch (const std::exception &e) {
      out.diagnostics[v].error = e.what();
      out.diagnostics[v].converged = false;
    }
  };

  switch (opt.method) {
    case Method::glm:
    case Method::glms: {
      out.hrfs = Matrix::Zero(voxels, in.basis.length());
      std::optional<GlmSolver> glm;
      std::optional<GlmsSolver> glms;
      if (opt.method == Method::glm) glm.emplace(in.x, in.z);
      else glms.emplace(separate_from_design(in.x), in.z);
      parallel_for(voxels, opt.jobs, [&](Index v) {
        guarded(v, [&](Index i) {
          const Vector col = y.col(i);
          Vector coef;
          bool deficient = false;
          if (glm) {
            const LinearFit f = glm->solve(col);
            coef = f.coefficients;
            deficient = f.rank_deficient;
          } else {
            const SeparateFit f = glms->solve(col);
            coef = stacked_slices(f);
            deficient = f.rank_deficient;
          }
          const ConditionHrfs parts = extract_betas_and_hrfs(coef, in.basis);
          out.betas.row(i) = parts.betas.transpose();
          out.hrfs.row(i) = parts.mean_hrf.samples.transpose();
          out.diagnostics[i].rank_warning = deficient;
        });
      });
      break;
    }
    case Method::r1glm:
    case Method::r1glms: {
      require(in.basis.kind != BasisKind::fixed,
              "rank-1 methods need a multi-element basis; with the fixed HRF use plain GLM");
      out.hrfs = Matrix::Zero(voxels, in.basis.length());
      out.fits.resize(voxels);
      const RankOneProblem problem(in.x, in.z, in.basis, opt.method == Method::r1glms, opt.solver,
                                   {opt.use_qr, opt.penalty_weight});
      parallel_for(voxels, opt.jobs, [&](Index v) {
        guarded(v, [&](Index i) {
          const Vector col = y.col(i);
          VoxelFit fit = problem.fit(col, problem.initial_guess(col));
          out.betas.row(i) = fit.beta.transpose();
          out.hrfs.row(i) = fit.hrf.samples.transpose();
          auto &diag = out.diagnostics[i];
          diag.iterations = fit.iterations;
          diag.converged = fit.converged;
          diag.degenerate = fit.degenerate;
          diag.rank_warning = fit.rank_warning;
          diag.objective = fit.objective;
          out.fits[i] = std::move(fit);
        });
      });
      break;
    }
    case Method::r1param: {
      require(in.model.has_value(), "r1param needs a parametric HRF model");
      require(in.basis.kind == BasisKind::fir, "r1param needs an FIR design");
      out.hrfs = Matrix::Zero(voxels, in.model->length());
      out.fits.resize(voxels);
      parallel_for(voxels, opt.jobs, [&](Index v) {
        guarded(v, [&](Index i) {
          VoxelFit fit = r1glm_parametric_fit(*in.model, in.x, y.col(i), in.z, opt.solver,
                                              std::nullopt, opt.use_qr);
          out.betas.row(i) = fit.beta.transpose();
          out.hrfs.row(i) = fit.hrf.samples.transpose();
          auto &diag = out.diagnostics[i];
          diag.iterations = fit.iterations;
          diag.converged = fit.converged;
          diag.degenerate = fit.degenerate;
          diag.objective = fit.objective;
          out.fits[i] = std::move(fit);
        });
      });
      break;
    }
  }
  return out;
}

}  // namespace r1glm
