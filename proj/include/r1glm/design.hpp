// Event tables and the design matrices built from them: standard
// (condition-major X_B), separate designs, polynomial drift and multi-run
// concatenation.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "r1glm/core.hpp"
#include "r1glm/hrf_basis.hpp"

namespace r1glm {

/// Regressors are convolved on a grid this many times finer than TR.
inline constexpr int kOversampling = 16;

struct Event {
  double onset = 0.0;  // seconds from run start
  int condition = 0;
  int run = 0;
};

struct EventTable {
  std::vector<Event> events;
  int conditions = 0;

  /// Checks onsets >= 0, ids in 0..k-1 and every condition present. Sorts by
  /// (run, onset).
  void normalize() {
    require(conditions > 0, "event table needs at least one condition");
    std::vector<bool> seen(conditions, false);
    for (const auto &e : events) {
      require(std::isfinite(e.onset) && e.onset >= 0.0, "event onsets must be >= 0");
      require(e.condition >= 0 && e.condition < conditions, "condition id out of range");
      require(e.run >= 0, "run ids must be >= 0");
      seen[e.condition] = true;
    }
    for (int j = 0; j < conditions; ++j)
      require(seen[j], "condition ids must be dense: no event for condition " + std::to_string(j));
    std::stable_sort(events.begin(), events.end(), [](const Event &a, const Event &b) {
      return a.run != b.run ? a.run < b.run : a.onset < b.onset;
    });
  }

  int runs() const {
    int r = 0;
    for (const auto &e : events) r = std::max(r, e.run + 1);
    return r;
  }

  std::vector<double> onsets(int condition, int run = -1) const {
    std::vector<double> out;
    for (const auto &e : events)
      if (e.condition == condition && (run < 0 || e.run == run)) out.push_back(e.onset);
    return out;
  }

  /// Events of one run, run id reset to 0. Condition count is kept.
  EventTable run_slice(int run) const {
    EventTable out;
    out.conditions = conditions;
    for (const auto &e : events)
      if (e.run == run) out.events.push_back({e.onset, e.condition, 0});
    return out;
  }
};

/// n x (d k) regressors. Columns d*j .. d*j+d-1 belong to condition j, so the
/// coefficient vector of a rank-1 model is exactly kron(beta, h).
struct DesignMatrix {
  Matrix matrix;
  double tr = 1.0;
  Index conditions = 0;
  Index basis_size = 0;

  Index scans() const { return matrix.rows(); }
  auto block(Index condition) const {
    return matrix.middleCols(condition * basis_size, basis_size);
  }
};

struct SeparatePair {
  Matrix own;   // X0_i, the columns of condition i
  Matrix rest;  // X1_i, per-basis-element sum of all other conditions
};

struct SeparateDesigns {
  std::vector<SeparatePair> pairs;

  Index conditions() const { return static_cast<Index>(pairs.size()); }
  Index basis_size() const { return pairs.empty() ? 0 : pairs.front().own.cols(); }
  Index scans() const { return pairs.empty() ? 0 : pairs.front().own.rows(); }
};

/// n x q drift regressors with orthonormal columns.
struct NuisanceMatrix {
  Matrix matrix;

  Index columns() const { return matrix.cols(); }
  static NuisanceMatrix empty(Index n) { return {Matrix(n, 0)}; }
};

/// Convolves an impulse train with one basis column and samples the result at
/// the scan times i*TR. The kernel is placed on a grid of TR/16 spacing:
/// `stick` kernels are nonzero only on multiples of column_dt, smooth ones
/// are linearly interpolated between samples.
inline Vector build_condition_regressor(std::span<const double> onsets, const Vector &column,
                                        double column_dt, double tr, Index n, bool stick = false) {
  require(tr > 0.0 && std::isfinite(tr), "TR must be positive");
  require(n >= 1, "scan count must be positive");
  require(column.size() >= 1, "basis column is empty");
  const double fine = tr / kOversampling;
  const double ratio_real = column_dt / fine;
  const auto ratio = static_cast<long long>(std::llround(ratio_real));
  require(ratio >= 1 && std::abs(ratio_real - static_cast<double>(ratio)) < 1e-6,
          "basis dt must be a positive multiple of TR/" + std::to_string(kOversampling));

  const long long last = static_cast<long long>(column.size()) - 1;
  auto kernel = [&](long long lag) -> double {
    if (stick) {
      if (lag % ratio != 0) return 0.0;
      const long long j = lag / ratio;
      return j <= last ? column[j] : 0.0;
    }
    const long long j = lag / ratio;
    const long long rem = lag % ratio;
    if (j > last || (j == last && rem != 0)) return 0.0;
    if (rem == 0) return column[j];
    const double frac = static_cast<double>(rem) / static_cast<double>(ratio);
    return column[j] * (1.0 - frac) + column[j + 1] * frac;
  };

  Vector out = Vector::Zero(n);
  const double acquisition = static_cast<double>(n) * tr;
  const long long support = last * ratio;
  for (double onset : onsets) {
    require(std::isfinite(onset) && onset >= 0.0, "event onsets must be >= 0");
    require(onset < acquisition, "event onset beyond the end of the acquisition");
    const long long start = std::llround(onset / fine);
    const long long first_scan = (start + kOversampling - 1) / kOversampling;
    const long long last_scan =
        std::min<long long>(n - 1, (start + support) / kOversampling);
    for (long long i = first_scan; i <= last_scan; ++i)
      out[i] += kernel(i * kOversampling - start);
  }
  return out;
}

/// Standard design X_B for a single run: column (j, m) is condition j's
/// onset train convolved with basis column m.
inline DesignMatrix build_design(const EventTable &events, const BasisSet &basis, double tr,
                                 Index n) {
  require(events.conditions > 0, "design needs at least one condition");
  const Index k = events.conditions;
  const Index d = basis.size();
  require(d >= 1, "basis has no columns");
  DesignMatrix x;
  x.tr = tr;
  x.conditions = k;
  x.basis_size = d;
  x.matrix.resize(n, d * k);
  const bool stick = basis.kind == BasisKind::fir;
  for (Index j = 0; j < k; ++j) {
    const auto onsets = events.onsets(static_cast<int>(j));
    for (Index m = 0; m < d; ++m)
      x.matrix.col(j * d + m) =
          build_condition_regressor(onsets, basis.matrix.col(m), basis.dt, tr, n, stick);
  }
  return x;
}

/// Splits a standard design into per-condition (own, rest) pairs.
inline SeparateDesigns separate_from_design(const DesignMatrix &x) {
  const Index k = x.conditions;
  const Index d = x.basis_size;
  Matrix total = Matrix::Zero(x.scans(), d);
  for (Index j = 0; j < k; ++j) total += x.block(j);
  SeparateDesigns s;
  s.pairs.reserve(k);
  for (Index i = 0; i < k; ++i) {
    SeparatePair p;
    p.own = x.block(i);
    p.rest = Matrix::Zero(x.scans(), d);
    for (Index j = 0; j < k; ++j)
      if (j != i) p.rest += x.block(j);
    s.pairs.push_back(std::move(p));
  }
  return s;
}

/// Reassembles the standard design from the `own` blocks of a separate design.
inline DesignMatrix design_from_separate(const SeparateDesigns &s, double tr = 1.0) {
  DesignMatrix x;
  x.tr = tr;
  x.conditions = s.conditions();
  x.basis_size = s.basis_size();
  x.matrix.resize(s.scans(), x.conditions * x.basis_size);
  for (Index i = 0; i < x.conditions; ++i)
    x.matrix.middleCols(i * x.basis_size, x.basis_size) = s.pairs[i].own;
  return x;
}

inline SeparateDesigns build_separate_designs(const EventTable &events, const BasisSet &basis,
                                              double tr, Index n) {
  return separate_from_design(build_design(events, basis, tr, n));
}

/// Orthonormal polynomial drift of degree <= order on the scan grid. The first
/// column is the positive constant 1/sqrt(n).
inline NuisanceMatrix build_drift(Index n, Index order) {
  require(order >= 0, "drift order must be >= 0");
  require(n > order, "drift needs more scans than the polynomial order");
  Matrix vander(n, order + 1);
  for (Index i = 0; i < n; ++i) {
    const double t = n > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    double power = 1.0;
    for (Index p = 0; p <= order; ++p) {
      vander(i, p) = power;
      power *= t;
    }
  }
  Eigen::HouseholderQR<Matrix> qr(vander);
  Matrix q = qr.householderQ() * Matrix::Identity(n, order + 1);
  const Matrix r = qr.matrixQR().topRows(order + 1).triangularView<Eigen::Upper>();
  for (Index p = 0; p <= order; ++p)
    if (r(p, p) < 0.0) q.col(p) = -q.col(p);
  return {std::move(q)};
}

/// Stacks runs that share beta and h: condition columns are concatenated
/// vertically, drift columns become block diagonal.
inline std::pair<DesignMatrix, NuisanceMatrix> concat_runs(const std::vector<DesignMatrix> &designs,
                                                           const std::vector<NuisanceMatrix> &drifts) {
  require(!designs.empty(), "no runs to concatenate");
  require(designs.size() == drifts.size(), "one drift matrix per run is required");
  const auto &first = designs.front();
  Index rows = 0;
  Index drift_cols = 0;
  for (std::size_t r = 0; r < designs.size(); ++r) {
    const auto &x = designs[r];
    require(x.conditions == first.conditions, "runs disagree on the number of conditions");
    require(x.basis_size == first.basis_size, "runs disagree on the basis size");
    require(std::abs(x.tr - first.tr) < 1e-12, "runs disagree on TR");
    require(drifts[r].matrix.rows() == x.scans(), "drift rows do not match run length");
    rows += x.scans();
    drift_cols += drifts[r].columns();
  }
  DesignMatrix x;
  x.tr = first.tr;
  x.conditions = first.conditions;
  x.basis_size = first.basis_size;
  x.matrix.resize(rows, first.matrix.cols());
  NuisanceMatrix z{Matrix::Zero(rows, drift_cols)};
  Index row = 0;
  Index col = 0;
  for (std::size_t r = 0; r < designs.size(); ++r) {
    const Index n = designs[r].scans();
    const Index q = drifts[r].columns();
    x.matrix.middleRows(row, n) = designs[r].matrix;
    z.matrix.block(row, col, n, q) = drifts[r].matrix;
    row += n;
    col += q;
  }
  return {std::move(x), std::move(z)};
}

// ---------------------------------------------------------------------------
// Events CSV: header `onset,condition[,run]`.

inline EventTable parse_events_csv(std::istream &in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "events CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_run = false;
  if (line == "onset,condition,run") with_run = true;
  else require(line == "onset,condition", "events CSV header must be onset,condition[,run]");

  EventTable table;
  int max_condition = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::string where = "events CSV line " + std::to_string(line_no) + ": ";
    require(fields.size() == (with_run ? 3u : 2u), where + "wrong number of fields");
    Event e;
    try {
      std::size_t used = 0;
      e.onset = std::stod(fields[0], &used);
      require(used == fields[0].size(), where + "bad onset");
    } catch (const std::logic_error &) {
      throw std::invalid_argument(where + "bad onset '" + fields[0] + "'");
    }
    auto parse_int = [&](const std::string &s, const char *name) {
      int v = -1;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec == std::errc() && ptr == s.data() + s.size() && v >= 0,
              where + name + " must be a non-negative integer");
      return v;
    };
    e.condition = parse_int(fields[1], "condition");
    if (with_run) e.run = parse_int(fields[2], "run");
    max_condition = std::max(max_condition, e.condition);
    table.events.push_back(e);
  }
  table.conditions = max_condition + 1;
  table.normalize();
  return table;
}

inline EventTable read_events_csv(const std::string &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open events file " + path);
  return parse_events_csv(in);
}

inline void write_events_csv(std::ostream &out, const EventTable &table) {
  const bool with_run = table.runs() > 1;
  out << (with_run ? "onset,condition,run\n" : "onset,condition\n");
  char buf[64];
  for (const auto &e : table.events) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.onset);
    out.write(buf, ptr - buf);
    out << ',' << e.condition;
    if (with_run) out << ',' << e.run;
    out << '\n';
  }
}

}  // namespace r1glm
