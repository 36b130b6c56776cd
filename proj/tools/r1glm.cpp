// r1glm: simulate datasets, fit volumes and run the encoding benchmark.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "r1glm/benchmark.hpp"
#include "r1glm/matrix_io.hpp"
#include "r1glm/rank_one.hpp"
#include "r1glm/synth.hpp"
#include "r1glm/volume.hpp"

namespace fs = std::filesystem;
using namespace r1glm;
using namespace r1glm::cli;

namespace {

Json to_json(const Vector &v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json rows_to_json(const Matrix &m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) out.push_back(to_json(m.row(i).transpose()));
  return out;
}

template <class T>
Json optional_json(const std::optional<T> &v) {
  return v ? Json(*v) : Json(nullptr);
}

void write_csv_matrix(const std::string &path, const Matrix &m) { write_matrix_file(path, m, true); }

/// Runs `body`, turning library argument errors raised while reading inputs
/// into config errors.
template <class F>
auto as_config_error(const std::string &where, F &&body) {
  try {
    return body();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

int default_jobs() {
  const char *env = std::getenv("R1GLM_JOBS");
  if (!env || !*env) return 1;
  char *end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) throw ConfigError("R1GLM_JOBS must be an integer in [1, 1024], got '" +
                                                           std::string(env) + "'");
  return static_cast<int>(v);
}

Json manifest_files(const fs::path &dir, const std::vector<std::string> &names) {
  Json files = Json::object();
  for (const auto &n : names) files[n] = sha256_file((dir / n).string());
  return files;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateSettings {
  SynthConfig synth;
  Index voxels = 10;
};

SimulateSettings read_simulate_config(const std::string &path) {
  ConfigReader r = ConfigReader::parse(path);
  SimulateSettings s;
  SynthConfig &c = s.synth;
  const auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  const auto non_negative = [](double x) { return std::isfinite(x) && x >= 0.0; };
  const auto at_least_one = [](long long x) { return x >= 1; };
  s.voxels = r.integer("voxels", s.voxels, at_least_one, "must be >= 1");
  c.scans = r.integer("scans", c.scans, [](long long x) { return x >= 2; }, "must be >= 2");
  c.tr = r.number("tr", c.tr, positive, "must be > 0");
  c.conditions = static_cast<int>(r.integer("conditions", c.conditions, at_least_one, "must be >= 1"));
  c.events_per_condition =
      static_cast<int>(r.integer("events_per_condition", c.events_per_condition, at_least_one, "must be >= 1"));
  c.spacing_scans = static_cast<int>(r.integer("spacing_scans", c.spacing_scans, at_least_one, "must be >= 1"));
  c.beta_mean = r.number("beta_mean", c.beta_mean);
  c.beta_sd = r.number("beta_sd", c.beta_sd, non_negative, "must be >= 0");
  if (auto fixed = r.numbers("fixed_beta")) {
    if (static_cast<int>(fixed->size()) != c.conditions) r.fail("fixed_beta", "must have one entry per condition");
    c.fixed_beta = Eigen::Map<const Vector>(fixed->data(), static_cast<Index>(fixed->size()));
  }
  c.shared_beta = r.boolean("shared_beta", c.shared_beta);
  c.noise_sigma = r.number("noise_sigma", c.noise_sigma, non_negative, "must be >= 0");
  c.drift_amplitude = r.number("drift_amplitude", c.drift_amplitude, non_negative, "must be >= 0");
  c.drift_order = r.integer("drift_order", c.drift_order,
                            [&](long long x) { return x >= 0 && x < c.scans; }, "must be in [0, scans)");
  c.seed = r.seed("seed", c.seed);

  ConfigReader h = r.child("hrf");
  const std::string mode = h.text("mode", "basis");
  if (mode == "basis") c.hrf.mode = TrueHrfSpec::Mode::basis;
  else if (mode == "jitter") c.hrf.mode = TrueHrfSpec::Mode::jitter;
  else h.fail("mode", "must be \"basis\" or \"jitter\"");
  const std::string basis = h.text("basis", to_string(c.hrf.basis));
  try {
    c.hrf.basis = parse_basis_kind(basis);
  } catch (const std::invalid_argument &) {
    h.fail("basis", "must be \"fixed\", \"3hrf\" or \"fir\"");
  }
  c.hrf.fir_length = h.integer("fir_length", c.hrf.fir_length, at_least_one, "must be >= 1");
  if (auto coef = h.numbers("coefficients"))
    c.hrf.coefficients = Eigen::Map<const Vector>(coef->data(), static_cast<Index>(coef->size()));
  c.hrf.derivative_spread = h.number("derivative_spread", c.hrf.derivative_spread, non_negative, "must be >= 0");
  c.hrf.peak_min = h.number("peak_min", c.hrf.peak_min, [](double x) { return x > 1.0; }, "must be > 1");
  c.hrf.peak_max = h.number("peak_max", c.hrf.peak_max,
                            [&](double x) { return x >= c.hrf.peak_min; }, "must be >= hrf.peak_min");
  h.finish();
  r.finish();
  as_config_error(path + ":1", [&] {
    c.validate();
    return 0;
  });
  return s;
}

Json simulate_config_json(const SimulateSettings &s) {
  const SynthConfig &c = s.synth;
  Json hrf = {{"mode", c.hrf.mode == TrueHrfSpec::Mode::basis ? "basis" : "jitter"},
              {"basis", to_string(c.hrf.basis)},
              {"fir_length", c.hrf.fir_length},
              {"coefficients", to_json(c.hrf.coefficients)},
              {"derivative_spread", c.hrf.derivative_spread},
              {"peak_min", c.hrf.peak_min},
              {"peak_max", c.hrf.peak_max}};
  return {{"voxels", s.voxels},
          {"scans", c.scans},
          {"tr", c.tr},
          {"conditions", c.conditions},
          {"events_per_condition", c.events_per_condition},
          {"spacing_scans", c.spacing_scans},
          {"beta_mean", c.beta_mean},
          {"beta_sd", c.beta_sd},
          {"fixed_beta", c.fixed_beta ? to_json(*c.fixed_beta) : Json(nullptr)},
          {"shared_beta", c.shared_beta},
          {"noise_sigma", c.noise_sigma},
          {"drift_amplitude", c.drift_amplitude},
          {"drift_order", c.drift_order},
          {"seed", c.seed},
          {"hrf", hrf}};
}

int cmd_simulate(const std::string &config_path, const std::string &out_dir, bool csv) {
  const Stopwatch total;
  const SimulateSettings s = read_simulate_config(config_path);
  const Json config = simulate_config_json(s);

  const Stopwatch generate;
  const SyntheticDataset data =
      as_config_error(config_path + ":1", [&] { return generate_dataset(s.synth, s.voxels); });
  const double generate_s = generate.seconds();

  const Stopwatch write;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::string data_name = csv ? "data.csv" : "data.bin";
  write_matrix_file((dir / data_name).string(), data.y, csv);
  {
    std::ofstream events((dir / "events.csv").string(), std::ios::binary);
    write_events_csv(events, data.events);
  }
  const Index v = s.voxels;
  Matrix betas(v, s.synth.conditions), hrfs(v, data.truths[0].hrf.length());
  Json h = Json::array(), omega = Json::array(), params = Json::array();
  for (Index i = 0; i < v; ++i) {
    const VoxelFit &t = data.truths[i];
    betas.row(i) = t.beta.transpose();
    hrfs.row(i) = t.hrf.samples.transpose();
    h.push_back(to_json(t.h));
    omega.push_back(to_json(t.omega));
    params.push_back(to_json(t.params));
  }
  const Json truth = {{"hrf_dt", data.truths[0].hrf.dt},
                      {"betas", rows_to_json(betas)},
                      {"hrfs", rows_to_json(hrfs)},
                      {"h", h},
                      {"omega", omega},
                      {"params", params}};
  write_json((dir / "truth.json").string(), truth);
  const double write_s = write.seconds();

  const Json manifest = {{"tool", "r1glm"},
                         {"version", kToolVersion},
                         {"command", "simulate"},
                         {"seed", s.synth.seed},
                         {"config", config},
                         {"config_sha256", sha256_hex(config.dump())},
                         {"data_format", csv ? "csv" : "binary"},
                         {"files", manifest_files(dir, {data_name, "events.csv", "truth.json"})},
                         {"timings", {{"generate_s", generate_s}, {"write_s", write_s}, {"total_s", total.seconds()}}}};
  write_json((dir / "manifest.json").string(), manifest);
  std::cout << "wrote " << v << " voxels x " << s.synth.scans << " scans to " << out_dir << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::string dataset;
  std::string out;
  std::string method = "r1glm";
  std::string basis = "3hrf";
  Index fir_length = 20;
  bool use_qr = true;
  int jobs = 1;
  Index drift_order = 3;
  double tr = 0.0;  // 0: taken from the dataset manifest
};

double dataset_tr(const fs::path &dir, double override_tr) {
  if (override_tr > 0.0) return override_tr;
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw ConfigError(dir.string() + ": no manifest.json; pass --tr");
  Json j;
  try {
    j = Json::parse(read_text(manifest.string()));
    return j.at("config").at("tr").get<double>();
  } catch (const Json::exception &e) {
    throw ConfigError(manifest.string() + ": cannot read config.tr (" + e.what() + "); pass --tr");
  }
}

int cmd_fit(const FitOptions &o) {
  const Stopwatch total;
  const fs::path dir(o.dataset);
  const Method method = as_config_error("--method", [&] { return parse_method(o.method); });
  const BasisKind kind = as_config_error("--basis", [&] { return parse_basis_kind(o.basis); });
  if (is_rank_one(method) && method != Method::r1param && kind == BasisKind::fixed)
    throw ConfigError("--method " + o.method +
                      " needs a multi-element basis (3hrf or fir); with the fixed HRF use --method glm");
  if (method == Method::r1param && kind != BasisKind::fir)
    throw ConfigError("--method r1param fits a parametric HRF on an FIR design; use --basis fir");
  if (o.fir_length < 1) throw ConfigError("--fir-length must be >= 1");
  if (o.drift_order < 0) throw ConfigError("--drift-order must be >= 0");

  std::string data_path;
  for (const char *name : {"data.bin", "data.csv"})
    if (fs::exists(dir / name)) {
      data_path = (dir / name).string();
      break;
    }
  if (data_path.empty()) throw ConfigError(o.dataset + ": no data.bin or data.csv");
  const double tr = dataset_tr(dir, o.tr);

  const Stopwatch load;
  const Matrix y = as_config_error(data_path, [&] { return read_matrix_file(data_path); });
  const EventTable events =
      as_config_error((dir / "events.csv").string(), [&] { return read_events_csv((dir / "events.csv").string()); });
  const double load_s = load.seconds();
  if (o.drift_order >= y.rows()) throw ConfigError("--drift-order must be smaller than the number of scans");

  VolumeInputs in;
  VolumeOptions opt;
  as_config_error("design", [&] {
    in.basis = make_basis(kind, tr, o.fir_length);
    in.x = build_design(events, in.basis, tr, y.rows());
    in.z = build_drift(y.rows(), o.drift_order);
    if (method == Method::r1param) in.model = double_gamma_model(tr, o.fir_length);
    return 0;
  });
  opt.method = method;
  opt.use_qr = o.use_qr;
  opt.jobs = o.jobs;

  const Stopwatch fit_clock;
  const VolumeFit fit = fit_volume(y, in, opt);
  const double fit_s = fit_clock.seconds();

  fs::create_directories(o.out);
  const fs::path out(o.out);
  write_csv_matrix((out / "betas.csv").string(), fit.betas);
  write_csv_matrix((out / "hrfs.csv").string(), fit.hrfs);

  Json voxels = Json::array();
  int converged = 0, degenerate = 0, rank_warnings = 0;
  for (const auto &d : fit.diagnostics) {
    converged += d.converged;
    degenerate += d.degenerate;
    rank_warnings += d.rank_warning;
    Json v = {{"iterations", d.iterations},
              {"converged", d.converged},
              {"degenerate", d.degenerate},
              {"rank_warning", d.rank_warning},
              {"objective", d.objective}};
    if (!d.error.empty()) v["error"] = d.error;
    voxels.push_back(v);
  }
  const Json diagnostics = {
      {"method", o.method},
      {"basis", o.basis},
      {"fir_length", o.fir_length},
      {"qr", o.use_qr},
      {"drift_order", o.drift_order},
      {"tr", tr},
      {"scans", y.rows()},
      {"voxel_count", y.cols()},
      {"conditions", events.conditions},
      {"converged", converged},
      {"degenerate", degenerate},
      {"rank_warnings", rank_warnings},
      {"failures", fit.failures()},
      {"voxels", voxels},
      {"run", {{"jobs", o.jobs}, {"load_s", load_s}, {"fit_s", fit_s}, {"wall_time_s", total.seconds()}}}};
  write_json((out / "diagnostics.json").string(), diagnostics);
  std::cout << o.method << "/" << o.basis << ": " << y.cols() << " voxels, " << converged << " converged, "
            << fit.failures() << " failed\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// benchmark

SolverConfig read_solver(ConfigReader r) {
  SolverConfig s;
  s.memory = static_cast<int>(r.integer("memory", s.memory, [](long long x) { return x >= 1; }, "must be >= 1"));
  s.grad_tol = r.number("grad_tol", s.grad_tol, [](double x) { return x > 0.0; }, "must be > 0");
  s.max_iter = static_cast<int>(r.integer("max_iter", s.max_iter, [](long long x) { return x >= 0; }, "must be >= 0"));
  s.wolfe_c1 = r.number("wolfe_c1", s.wolfe_c1, [](double x) { return x > 0.0 && x < 1.0; }, "must be in (0, 1)");
  s.wolfe_c2 = r.number("wolfe_c2", s.wolfe_c2, [&](double x) { return x > s.wolfe_c1 && x < 1.0; },
                        "must be in (wolfe_c1, 1)");
  s.max_linesearch_steps = static_cast<int>(
      r.integer("max_linesearch_steps", s.max_linesearch_steps, [](long long x) { return x >= 1; }, "must be >= 1"));
  s.rel_ftol = r.number("rel_ftol", s.rel_ftol, [](double x) { return x >= 0.0; }, "must be >= 0");
  r.finish();
  return s;
}

Json solver_json(const SolverConfig &s) {
  return {{"memory", s.memory},     {"grad_tol", s.grad_tol},
          {"max_iter", s.max_iter}, {"wolfe_c1", s.wolfe_c1},
          {"wolfe_c2", s.wolfe_c2}, {"max_linesearch_steps", s.max_linesearch_steps},
          {"rel_ftol", s.rel_ftol}};
}

BenchmarkConfig read_benchmark_config(const std::string &path) {
  ConfigReader r = ConfigReader::parse(path);
  BenchmarkConfig c;
  const auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  const auto non_negative = [](double x) { return std::isfinite(x) && x >= 0.0; };
  const auto at_least = [](long long lo) { return [lo](long long x) { return x >= lo; }; };
  c.seed = r.seed("seed", c.seed);
  c.runs = static_cast<int>(r.integer("runs", c.runs, at_least(3), "must be >= 3"));
  c.scans = r.integer("scans", c.scans, at_least(2), "must be >= 2");
  c.tr = r.number("tr", c.tr, positive, "must be > 0");
  c.conditions_per_run =
      static_cast<int>(r.integer("conditions_per_run", c.conditions_per_run, at_least(2), "must be >= 2"));
  c.repetitions = static_cast<int>(r.integer("repetitions", c.repetitions, at_least(1), "must be >= 1"));
  c.spacing_scans = static_cast<int>(r.integer("spacing_scans", c.spacing_scans, at_least(1), "must be >= 1"));
  c.voxels = r.integer("voxels", c.voxels, at_least(2), "must be >= 2");
  c.features = r.integer("features", c.features, at_least(1), "must be >= 1");
  c.beta_offset = r.number("beta_offset", c.beta_offset);
  c.beta_scale = r.number("beta_scale", c.beta_scale);
  c.noise_sigma = r.number("noise_sigma", c.noise_sigma, non_negative, "must be >= 0");
  c.drift_amplitude = r.number("drift_amplitude", c.drift_amplitude, non_negative, "must be >= 0");
  c.peak_min = r.number("peak_min", c.peak_min, [](double x) { return x > 1.0; }, "must be > 1");
  c.peak_max = r.number("peak_max", c.peak_max, [&](double x) { return x >= c.peak_min; }, "must be >= peak_min");
  c.fir_length = r.integer("fir_length", c.fir_length, at_least(1), "must be >= 1");
  c.drift_order = r.integer("drift_order", c.drift_order,
                            [&](long long x) { return x >= 0 && x < c.scans; }, "must be in [0, scans)");
  c.savgol_window = r.integer("savgol_window", c.savgol_window,
                              [&](long long x) { return x >= 1 && x % 2 == 1 && x <= c.scans; },
                              "must be odd and at most scans");
  c.savgol_degree = r.integer("savgol_degree", c.savgol_degree,
                              [&](long long x) { return x >= 0 && x < c.savgol_window; },
                              "must be in [0, savgol_window)");
  if (auto grid = r.numbers("lambda_grid")) {
    if (grid->empty()) r.fail("lambda_grid", "must not be empty");
    for (double l : *grid)
      if (!(l > 0.0)) r.fail("lambda_grid", "values must be > 0");
    c.lambda_grid = *grid;
  }
  c.use_qr = r.boolean("use_qr", c.use_qr);
  c.solver = read_solver(r.child("solver"));
  r.finish();
  as_config_error(path + ":1", [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json benchmark_config_json(const BenchmarkConfig &c) {
  return {{"seed", c.seed},
          {"runs", c.runs},
          {"scans", c.scans},
          {"tr", c.tr},
          {"conditions_per_run", c.conditions_per_run},
          {"repetitions", c.repetitions},
          {"spacing_scans", c.spacing_scans},
          {"voxels", c.voxels},
          {"features", c.features},
          {"beta_offset", c.beta_offset},
          {"beta_scale", c.beta_scale},
          {"noise_sigma", c.noise_sigma},
          {"drift_amplitude", c.drift_amplitude},
          {"peak_min", c.peak_min},
          {"peak_max", c.peak_max},
          {"fir_length", c.fir_length},
          {"drift_order", c.drift_order},
          {"savgol_window", c.savgol_window},
          {"savgol_degree", c.savgol_degree},
          {"lambda_grid", c.lambda_grid},
          {"use_qr", c.use_qr},
          {"solver", solver_json(c.solver)}};
}

Json comparison_json(const PairedComparison &c) {
  return {{"better", c.better}, {"worse", c.worse}, {"statistic", optional_json(c.statistic)}, {"p", optional_json(c.p)}};
}

Json report_json(const BenchmarkReport &r) {
  Json methods = Json::array();
  for (const auto &m : r.methods) {
    Json j = {{"name", m.name},
              {"fold_scores", m.fold_scores},
              {"mean", m.mean},
              {"identification", m.identification},
              {"identification_mean", m.identification_mean},
              {"failures", m.failures},
              {"versus_baseline", m.versus_baseline ? comparison_json(*m.versus_baseline) : Json(nullptr)},
              {"identification_test", m.identification_test
                                          ? Json{{"statistic", m.identification_test->statistic},
                                                 {"p", m.identification_test->p}}
                                          : Json(nullptr)}};
    methods.push_back(j);
  }
  Json adjacent = Json::array();
  for (const auto &a : r.adjacent) adjacent.push_back(comparison_json(a));
  Json out = {{"complete", r.complete},
              {"baseline", method_grid().front().name()},
              {"methods", methods},
              {"ranking", r.ranking},
              {"adjacent", adjacent},
              {"identification_trials", r.identification_trials}};
  if (!r.complete) out["error"] = r.error;
  return out;
}

int cmd_benchmark(const std::string &config_path, const std::string &out_dir, int jobs) {
  const Stopwatch total;
  const BenchmarkConfig cfg = read_benchmark_config(config_path);
  const Json config = benchmark_config_json(cfg);

  const Stopwatch generate;
  const BenchmarkData data = as_config_error(config_path + ":1", [&] { return generate_benchmark_data(cfg); });
  const double generate_s = generate.seconds();
  const Stopwatch evaluate;
  const BenchmarkReport report = run_benchmark(cfg, data, jobs);
  const double evaluate_s = evaluate.seconds();

  const Stopwatch write;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_json((dir / "scores.json").string(), report_json(report));
  std::ostringstream scores, ident;
  scores << "method,fold,score\n";
  ident << "method,fold,accuracy\n";
  for (const auto &m : report.methods) {
    for (std::size_t f = 0; f < m.fold_scores.size(); ++f)
      scores << m.name << ',' << f << ',' << format_double(m.fold_scores[f]) << '\n';
    for (std::size_t f = 0; f < m.identification.size(); ++f)
      ident << m.name << ',' << f << ',' << format_double(m.identification[f]) << '\n';
  }
  write_text((dir / "scores.csv").string(), scores.str());
  write_text((dir / "identification.csv").string(), ident.str());
  const double write_s = write.seconds();

  Json grid = Json::array();
  for (const auto &m : method_grid()) grid.push_back(m.name());
  const Json manifest = {
      {"tool", "r1glm"},
      {"version", kToolVersion},
      {"command", "benchmark"},
      {"seed", cfg.seed},
      {"config", config},
      {"config_sha256", sha256_hex(config.dump())},
      {"method_grid", grid},
      {"complete", report.complete},
      {"files", manifest_files(dir, {"scores.json", "scores.csv", "identification.csv"})},
      {"timings",
       {{"generate_s", generate_s}, {"evaluate_s", evaluate_s}, {"write_s", write_s}, {"total_s", total.seconds()}}}};
  write_json((dir / "manifest.json").string(), manifest);

  if (!report.complete) {
    std::cerr << "error: benchmark stopped early: " << report.error << " (partial results in " << out_dir << ")\n";
    return kPartial;
  }
  for (std::size_t i = 0; i < report.ranking.size(); ++i) {
    const MethodScores *m = find_method(report, report.ranking[i]);
    std::cout << std::setw(2) << i + 1 << ". " << std::left << std::setw(12) << m->name << std::right
              << " mean r " << format_double(m->mean) << "  identification " << format_double(m->identification_mean)
              << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Rank-1 GLM estimation of HRFs and activations: simulate, fit, benchmark"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  int jobs = 1;
  std::string jobs_env_error;
  try {
    jobs = default_jobs();
  } catch (const ConfigError &e) {
    jobs_env_error = e.what();
  }

  std::string sim_config, sim_out = ".";
  bool sim_csv = false;
  auto *simulate = app.add_subcommand("simulate", "Generate a synthetic dataset from a JSON config");
  simulate->add_option("config", sim_config, "JSON config file")->required();
  simulate->add_option("-o,--out", sim_out, "Output directory")->capture_default_str();
  simulate->add_flag("--csv", sim_csv, "Write the data matrix as plain CSV instead of binary");

  FitOptions fit;
  auto *fit_cmd = app.add_subcommand("fit", "Estimate betas and HRFs for every voxel of a dataset");
  fit_cmd->add_option("dataset", fit.dataset, "Dataset directory (data.bin or data.csv, events.csv)")->required();
  fit_cmd->add_option("-o,--out", fit.out, "Output directory (default: the dataset directory)");
  fit_cmd->add_option("--method", fit.method, "glm, glms, r1glm, r1glms or r1param")->capture_default_str();
  fit_cmd->add_option("--basis", fit.basis, "fixed, 3hrf or fir")->capture_default_str();
  fit_cmd->add_option("--fir-length", fit.fir_length, "FIR basis length")->capture_default_str();
  fit_cmd->add_flag("--qr,!--no-qr", fit.use_qr, "Solve on the QR-reduced system (default on)");
  fit_cmd->add_option("--jobs", fit.jobs, "Worker threads (default: R1GLM_JOBS or 1)")
      ->check(CLI::Range(1, 1024));
  fit_cmd->add_option("--drift-order", fit.drift_order, "Polynomial drift order")->capture_default_str();
  fit_cmd->add_option("--tr", fit.tr, "Repetition time in seconds (default: from the dataset manifest)")
      ->check(CLI::PositiveNumber);

  std::string bench_config, bench_out = ".";
  int bench_jobs = 0;
  auto *bench = app.add_subcommand("benchmark", "Run the 10-method encoding benchmark");
  bench->add_option("config", bench_config, "JSON config file")->required();
  bench->add_option("-o,--out", bench_out, "Output directory")->capture_default_str();
  bench->add_option("--jobs", bench_jobs, "Worker threads (default: R1GLM_JOBS or 1)")->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const bool jobs_given = (fit_cmd->parsed() && fit_cmd->count("--jobs")) || (bench->parsed() && bench->count("--jobs"));
    if (!jobs_given && !jobs_env_error.empty()) throw ConfigError(jobs_env_error);
    if (simulate->parsed()) return cmd_simulate(sim_config, sim_out, sim_csv);
    if (fit_cmd->parsed()) {
      if (!fit_cmd->count("--jobs")) fit.jobs = jobs;
      if (fit.out.empty()) fit.out = fit.dataset;
      return cmd_fit(fit);
    }
    return cmd_benchmark(bench_config, bench_out, bench->count("--jobs") ? bench_jobs : jobs);
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
