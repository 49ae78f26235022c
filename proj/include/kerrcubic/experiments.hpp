// Copyright 2026 The kerrcubic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Sweeps, displacement optimization, power-law fits and cubic phase state generation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kerrcubic/dynamics.hpp"

namespace kerrcubic {

/// Maps fn over items on up to `workers` threads; results keep the input order.
template <typename T, typename Fn>
auto parallel_map(const std::vector<T>& items, int workers, Fn&& fn) -> std::vector<decltype(fn(items.front()))> {
  using R = decltype(fn(items.front()));
  std::vector<std::optional<R>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        slots[i].emplace(fn(items[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(items.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::vector<R> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Power-law fits

struct FitResult {
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least squares of log y against log x.
inline FitResult fit_power_law(const std::vector<std::pair<double, double>>& points) {
  require(points.size() >= 3, "fit_power_law: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    require(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y), "fit_power_law: data must be positive");
    mx += std::log(x);
    my += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0.0, "fit_power_law: x values must not all coincide");
  FitResult f;
  f.exponent = sxy / sxx;
  f.prefactor = std::exp(my - f.exponent * mx);
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  f.points = points.size();
  return f;
}

// ---------------------------------------------------------------------------
// Displacement optimization

struct OptimizeOptions {
  int coarse_points = 9;
  int dense_points = 33;
  double rel_tol = 1e-3;
};

struct AlphaOptimum {
  double alpha = 0.0;
  double error = 0.0;
  bool unimodal = true;
  int evaluations = 0;
  Diagnostics diagnostics;
};

namespace detail {

inline double golden_minimize(const std::function<double(double)>& f, double a, double b, double tol, double* fmin) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  if (fc <= fd) {
    *fmin = fc;
    return c;
  }
  *fmin = fd;
  return d;
}

// True when the samples fall and then rise (plateaus of relative size 1e-9 tolerated).
inline bool is_unimodal(const std::vector<double>& v) {
  const std::size_t m = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  auto slack = [](double a, double b) { return 1e-9 * std::max(std::abs(a), std::abs(b)); };
  for (std::size_t i = 0; i + 1 <= m && i + 1 < v.size(); ++i)
    if (v[i + 1] > v[i] + slack(v[i], v[i + 1])) return false;
  for (std::size_t i = m; i + 1 < v.size(); ++i)
    if (v[i + 1] < v[i] - slack(v[i], v[i + 1])) return false;
  return true;
}

}  // namespace detail

/// Minimizes the gate error over alpha in [lo, hi]: coarse log-grid scan, then golden section on
/// log alpha between the neighbours of the best grid point.
inline AlphaOptimum optimize_alpha(const GateConfig& cfg, const std::function<double(const GateConfig&)>& error_of,
                                   double lo, double hi, const OptimizeOptions& opts = {}) {
  require(lo > 0.0 && hi >= lo && std::isfinite(hi), "optimize_alpha: bracket must be positive and ordered");
  AlphaOptimum out;
  std::map<double, double> cache;
  auto evaluate = [&](double alpha) {
    GateConfig c = cfg;
    c.alpha = alpha;
    double e = 1.0;
    try {
      e = error_of(c);
    } catch (const NumericalError& err) {
      // Far from the optimum the frame generator is too stiff to integrate; score as a failed gate.
      out.diagnostics.warn(std::string("optimize_alpha: alpha = ") + std::to_string(c.alpha) + " scored as 1: " +
                           err.what());
    }
    ++out.evaluations;
    return e;
  };
  auto f = [&](double log_alpha) {
    const auto it = cache.find(log_alpha);
    if (it != cache.end()) return it->second;
    const double e = evaluate(std::exp(log_alpha));
    cache.emplace(log_alpha, e);
    return e;
  };
  if (lo == hi) {
    out.alpha = lo;
    out.error = evaluate(lo);
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  auto scan = [&](int n) {
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = a + (b - a) * i / (n - 1);
      ys[i] = f(xs[i]);
    }
    return std::pair{xs, ys};
  };
  auto [xs, ys] = scan(std::max(3, opts.coarse_points));
  if (!detail::is_unimodal(ys)) {
    out.unimodal = false;
    out.diagnostics.warn("optimize_alpha: coarse scan is not unimodal; using dense grid minimum");
    std::tie(xs, ys) = scan(std::max(opts.dense_points, opts.coarse_points));
  }
  const std::size_t m = static_cast<std::size_t>(std::min_element(ys.begin(), ys.end()) - ys.begin());
  if (m == 0 || m + 1 == xs.size()) {
    out.diagnostics.warn("optimize_alpha: minimum at the bracket edge");
  }
  const double left = xs[m == 0 ? 0 : m - 1];
  const double right = xs[m + 1 == xs.size() ? m : m + 1];
  double best = 0.0;
  const double x = detail::golden_minimize(f, left, right, std::log1p(opts.rel_tol), &best);
  if (ys[m] < best) {
    out.alpha = std::exp(xs[m]);
    out.error = ys[m];
  } else {
    out.alpha = std::exp(x);
    out.error = best;
  }
  return out;
}

/// Gate error of `input` as a function of the configuration (input rebuilt at cfg.fock).
inline std::function<double(const GateConfig&)> gate_error_fn(const InputSpec& input) {
  return [input](const GateConfig& c) {
    const PureState psi = input.build(c.fock);
    return c.trotter_steps > 0 ? trotterized_gate(c, psi).error : cubic_gate(c, psi).error;
  };
}

inline AlphaOptimum optimize_alpha(const GateConfig& cfg, const InputSpec& input, double lo, double hi,
                                   const OptimizeOptions& opts = {}) {
  return optimize_alpha(cfg, gate_error_fn(input), lo, hi, opts);
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParameter { LambdaDb, Alpha, AlphaCoefficient, Dtheta, DdeltaRel, DbetaxRel, ChiOverKappa, TrotterSteps };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  static const std::map<std::string, SweepParameter> names = {
      {"lambda_db", SweepParameter::LambdaDb},     {"alpha", SweepParameter::Alpha},
      {"alpha_coefficient", SweepParameter::AlphaCoefficient}, {"dtheta", SweepParameter::Dtheta},
      {"ddelta_rel", SweepParameter::DdeltaRel},   {"dbetax_rel", SweepParameter::DbetaxRel},
      {"chi_over_kappa", SweepParameter::ChiOverKappa}, {"trotter_steps", SweepParameter::TrotterSteps}};
  const auto it = names.find(s);
  if (it == names.end()) throw InvalidArgument("unknown sweep parameter '" + s + "'");
  return it->second;
}

inline std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::LambdaDb: return "lambda_db";
    case SweepParameter::Alpha: return "alpha";
    case SweepParameter::AlphaCoefficient: return "alpha_coefficient";
    case SweepParameter::Dtheta: return "dtheta";
    case SweepParameter::DdeltaRel: return "ddelta_rel";
    case SweepParameter::DbetaxRel: return "dbetax_rel";
    case SweepParameter::ChiOverKappa: return "chi_over_kappa";
    case SweepParameter::TrotterSteps: return "trotter_steps";
  }
  return "unknown";
}

/// How the displacement is chosen at each point.
enum class AlphaMode { Fixed, Coefficient, Optimize };

struct SweepSpec {
  GateConfig base;
  SweepParameter parameter = SweepParameter::LambdaDb;
  std::vector<double> values;
  InputSpec input;
  AlphaMode alpha_mode = AlphaMode::Optimize;
  double alpha_coefficient = 2.0;  // alpha = C lambda^3 in Coefficient mode
  // Optimize mode: first point scans [lo, hi] lambda^3, later points [C/w, C w] lambda^3 around
  // the previous optimum coefficient.
  double scan_lo = 0.2;
  double scan_hi = 200.0;
  double warm_width = 2.5;
  bool optimize_noiseless = false;  // optimize alpha with the noise offsets switched off
  OptimizeOptions optimize;
  int workers = 1;

  void validate() const {
    require(!values.empty(), "SweepSpec: value list is empty");
    base.validate();
    require(scan_lo > 0.0 && scan_hi >= scan_lo, "SweepSpec: invalid alpha scan range");
    require(warm_width > 1.0, "SweepSpec: warm-start width must exceed 1");
  }
};

struct SweepRow {
  double value = 0.0;
  double lambda_db = 0.0;
  double alpha = 0.0;
  double alpha_coefficient = 0.0;  // alpha / lambda^3
  double error = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  bool flagged = false;  // error above 0.5, outside the small-noise regime
  std::string message;
};

namespace detail {

inline void apply_parameter(GateConfig& c, SweepParameter p, double v) {
  switch (p) {
    case SweepParameter::LambdaDb: c.lambda = lambda_from_db(v); break;
    case SweepParameter::Alpha: c.alpha = v; break;
    case SweepParameter::AlphaCoefficient: c.alpha = v * c.lambda * c.lambda * c.lambda; break;
    case SweepParameter::Dtheta: c.noise.dtheta = v; break;
    case SweepParameter::DdeltaRel: c.noise.ddelta_rel = v; break;
    case SweepParameter::DbetaxRel: c.noise.dbetax_rel = v; break;
    case SweepParameter::ChiOverKappa:
      require(v > 0.0, "sweep: chi/kappa must be positive");
      c.kappa = c.chi / v;
      break;
    case SweepParameter::TrotterSteps:
      require(v >= 0.0 && v == std::floor(v), "sweep: trotter steps must be a non-negative integer");
      c.trotter_steps = static_cast<int>(v);
      break;
  }
}

inline bool sets_alpha(SweepParameter p) { return p == SweepParameter::Alpha || p == SweepParameter::AlphaCoefficient; }

}  // namespace detail

/// One gate run per value. In Optimize mode the displacement is warm-started from the previous
/// point, so points run in order; otherwise they run on spec.workers threads.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto error_of = gate_error_fn(spec.input);
  auto lambda3 = [](const GateConfig& c) { return c.lambda * c.lambda * c.lambda; };
  auto row_for = [&](double v, GateConfig c) {
    SweepRow row;
    row.value = v;
    row.lambda_db = c.lambda_db();
    row.alpha = c.alpha;
    row.alpha_coefficient = c.alpha / lambda3(c);
    return row;
  };
  const bool optimize = spec.alpha_mode == AlphaMode::Optimize && !detail::sets_alpha(spec.parameter);
  if (!optimize) {
    return parallel_map(spec.values, spec.workers, [&](double v) {
      GateConfig c = spec.base;
      SweepRow row;
      try {
        if (spec.alpha_mode == AlphaMode::Coefficient) c.alpha = spec.alpha_coefficient * lambda3(c);
        detail::apply_parameter(c, spec.parameter, v);
        if (spec.alpha_mode == AlphaMode::Coefficient && spec.parameter == SweepParameter::LambdaDb)
          c.alpha = spec.alpha_coefficient * lambda3(c);
        row = row_for(v, c);
        row.error = error_of(c);
        row.ok = true;
        row.flagged = row.error > 0.5;
      } catch (const Error& e) {
        row = row_for(v, c);
        row.message = e.what();
      }
      return row;
    });
  }
  std::vector<SweepRow> rows;
  double coefficient = 0.0;
  for (double v : spec.values) {
    GateConfig c = spec.base;
    SweepRow row;
    try {
      detail::apply_parameter(c, spec.parameter, v);
      const double l3 = lambda3(c);
      const double lo = coefficient > 0.0 ? coefficient / spec.warm_width : spec.scan_lo;
      const double hi = coefficient > 0.0 ? coefficient * spec.warm_width : spec.scan_hi;
      GateConfig search = c;
      if (spec.optimize_noiseless) search.noise = NoiseParams{};
      const auto best = optimize_alpha(search, error_of, lo * l3, hi * l3, spec.optimize);
      c.alpha = best.alpha;
      row = row_for(v, c);
      row.error = spec.optimize_noiseless && spec.base.noise.any() ? error_of(c) : best.error;
      row.ok = true;
      row.flagged = row.error > 0.5;
      if (!best.diagnostics.clean()) {
        for (const auto& w : best.diagnostics.warnings) row.message += (row.message.empty() ? "" : "; ") + w;
      }
      coefficient = best.alpha / l3;
    } catch (const Error& e) {
      row = row_for(v, c);
      row.message = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

/// Sweep over squeezing values in dB.
inline std::vector<SweepRow> lambda_sweep(SweepSpec spec) {
  spec.parameter = SweepParameter::LambdaDb;
  return run_sweep(spec);
}

struct NoiseRow {
  double lambda_db = 0.0;
  double noise = 0.0;
  double alpha = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double noiseless_error = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  bool flagged = false;
  std::string message;

  double excess() const { return error - noiseless_error; }
};

struct NoiseSweepSpec {
  GateConfig base;
  SweepParameter noise = SweepParameter::Dtheta;  // Dtheta, DdeltaRel or DbetaxRel
  std::vector<double> noise_values;
  std::vector<double> lambda_db_values;
  InputSpec input;
  // Displacement per squeezing value: the noiseless optimum (warm-started) or C lambda^3.
  AlphaMode alpha_mode = AlphaMode::Optimize;
  double alpha_coefficient = 2.0;
  // Zero-mean noise: average the errors at +d and -d, which cancels the term linear in d.
  bool symmetric = false;
  OptimizeOptions optimize;
  int workers = 1;
};

/// Gate error for every (squeezing, noise) pair, alongside the noiseless error at the same alpha.
inline std::vector<NoiseRow> noise_sweep(const NoiseSweepSpec& spec) {
  require(spec.noise == SweepParameter::Dtheta || spec.noise == SweepParameter::DdeltaRel ||
              spec.noise == SweepParameter::DbetaxRel,
          "noise_sweep: parameter must be dtheta, ddelta_rel or dbetax_rel");
  require(!spec.noise_values.empty() && !spec.lambda_db_values.empty(), "noise_sweep: empty value list");
  spec.base.validate();
  const auto error_of = gate_error_fn(spec.input);

  // Noiseless displacement per squeezing value.
  SweepSpec alphas;
  alphas.base = spec.base;
  alphas.base.noise = NoiseParams{};
  alphas.parameter = SweepParameter::LambdaDb;
  alphas.values = spec.lambda_db_values;
  alphas.input = spec.input;
  alphas.alpha_mode = spec.alpha_mode == AlphaMode::Fixed ? AlphaMode::Fixed : spec.alpha_mode;
  alphas.alpha_coefficient = spec.alpha_coefficient;
  alphas.optimize = spec.optimize;
  alphas.workers = spec.workers;
  const auto base_rows = run_sweep(alphas);

  struct Point {
    std::size_t lambda_index;
    double noise;
  };
  std::vector<Point> points;
  for (std::size_t i = 0; i < base_rows.size(); ++i)
    for (double v : spec.noise_values) points.push_back({i, v});

  return parallel_map(points, spec.workers, [&](const Point& pt) {
    const SweepRow& base = base_rows[pt.lambda_index];
    NoiseRow row;
    row.lambda_db = base.lambda_db;
    row.noise = pt.noise;
    row.alpha = base.alpha;
    row.noiseless_error = base.error;
    if (!base.ok) {
      row.message = base.message;
      return row;
    }
    try {
      GateConfig c = spec.base;
      c.lambda = lambda_from_db(base.lambda_db);
      c.alpha = base.alpha;
      detail::apply_parameter(c, spec.noise, pt.noise);
      row.error = error_of(c);
      if (spec.symmetric) {
        detail::apply_parameter(c, spec.noise, -pt.noise);
        row.error = 0.5 * (row.error + error_of(c));
      }
      row.ok = true;
      row.flagged = row.error > 0.5;
    } catch (const Error& e) {
      row.message = e.what();
    }
    return row;
  });
}

// ---------------------------------------------------------------------------
// Cubic phase state generation

struct GaussianCorrection {
  double x_shift = 0.0;  // coefficient of x
  double x_curve = 0.0;  // coefficient of x^2
  double p_shift = 0.0;  // coefficient of p
  double p_curve = 0.0;  // coefficient of p^2
};

struct StateGenOptions {
  double delta = 0.5;
  bool correct = false;  // optimize a Gaussian post-correction exp(i(a x + r x^2)) exp(i(b p + s p^2))
  double x_min = -4.0, x_max = 4.0;
  double p_min = -4.0, p_max = 6.0;
  int x_points = 81;
  int p_points = 81;
  int wigner_dim = 0;  // levels of the materialized output; 0 means twice the Fock cutoff
};

struct CubicStateResult {
  double fidelity = 0.0;      // reported fidelity (corrected when requested)
  double raw_fidelity = 0.0;  // before any correction
  double nlq_variance = 0.0;
  GaussianCorrection correction;
  std::vector<double> xs, ps;
  RealMatrix wigner;  // wigner(i, j) = W(xs[i], ps[j])
  double wigner_min = 0.0;
  EvolutionResult gate;
  Diagnostics diagnostics;
};

namespace detail {

// Minimizes f over R^n with the Nelder-Mead simplex.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, const std::vector<double>& step, int max_iter,
                                       double ftol) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> order(n + 1);
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> v2;
    for (auto i : order) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
    if (std::abs(vals[n] - vals[0]) <= ftol) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / n;
    auto along = [&](double t) {
      std::vector<double> y(n);
      for (std::size_t k = 0; k < n; ++k) y[k] = centroid[k] + t * (pts[n][k] - centroid[k]);
      return y;
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < vals[0]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
    } else if (fr < vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
    } else {
      const auto xc = fr < vals[n] ? along(-0.5) : along(0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, vals[n])) {
        pts[n] = xc;
        vals[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return pts[best];
}

// The correction seen from the co-rotating frame, where p reads p + 3 gamma x^2.
class CorrectionFactory {
 public:
  CorrectionFactory(double gamma, int dim) {
    const auto x = BosonPolynomial::x();
    const auto pn = BosonPolynomial::p() + (3.0 * gamma) * (x * x);
    x_ = hermitian_eigen(to_matrix(x, 0.0, dim).matrix());
    p_ = hermitian_eigen(to_matrix(pn, 0.0, dim).matrix());
  }

  Matrix unitary(const GaussianCorrection& c) const {
    const Matrix ux = x_.apply([&](double w) { return std::exp(Complex(0.0, c.x_shift * w + c.x_curve * w * w)); });
    const Matrix up = p_.apply([&](double w) { return std::exp(Complex(0.0, c.p_shift * w + c.p_curve * w * w)); });
    return ux * up;
  }

  /// C^dagger applied to psi.
  Vector adjoint_apply(const GaussianCorrection& c, const Vector& psi) const {
    const Vector a = x_.apply_to([&](double w) { return std::exp(Complex(0.0, -(c.x_shift * w + c.x_curve * w * w))); }, psi);
    return p_.apply_to([&](double w) { return std::exp(Complex(0.0, -(c.p_shift * w + c.p_curve * w * w))); }, a);
  }

 private:
  HermitianEigen x_;
  HermitianEigen p_;
};

inline GaussianCorrection to_correction(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace detail

/// Cubic phase gate on the squeezed vacuum |delta>, scored against the ideal cubic phase state.
inline CubicStateResult generate_cubic_state(const GateConfig& cfg, const StateGenOptions& opts = {}) {
  cfg.validate();
  require(cfg.gamma > 0.0, "generate_cubic_state: gamma must be positive");
  require(opts.x_points >= 2 && opts.p_points >= 2, "generate_cubic_state: Wigner grid needs two points per axis");
  CubicStateResult out;
  const PureState input = squeezed_vacuum(opts.delta, cfg.fock, &out.diagnostics);
  out.gate = cfg.trotter_steps > 0 ? trotterized_gate(cfg, input) : cubic_gate(cfg, input);
  out.diagnostics.merge(out.gate.diagnostics);
  const int dim = out.gate.fock;
  const PureState in = detail::resize_state(input, dim);
  const Matrix rho = out.gate.rotating_density().matrix();
  out.raw_fidelity = fidelity(in, MixedState(rho));
  out.fidelity = out.raw_fidelity;

  Matrix corrected = rho;
  if (opts.correct) {
    const detail::CorrectionFactory factory(cfg.gamma, dim);
    auto loss = [&](const std::vector<double>& v) {
      const Vector phi = factory.adjoint_apply(detail::to_correction(v), in.amplitudes());
      return 1.0 - std::real(phi.dot(rho * phi));
    };
    std::vector<double> best(4, 0.0);
    for (int round = 0; round < 3; ++round) best = detail::nelder_mead(loss, best, {1e-2, 1e-2, 1e-2, 1e-2}, 2000, 1e-14);
    if (1.0 - loss(best) > out.raw_fidelity) {
      out.correction = detail::to_correction(best);
      const Matrix u = factory.unitary(out.correction);
      corrected = u * rho * u.adjoint();
      out.fidelity = fidelity(in, MixedState(0.5 * (corrected + corrected.adjoint())));
    }
  }
  // p_NLQ in the co-rotating frame is p.
  const Matrix p = momentum(dim).matrix();
  const Matrix p2 = to_matrix(BosonPolynomial::p() * BosonPolynomial::p(), 0.0, dim).matrix();
  const double mp = (p * corrected).trace().real();
  out.nlq_variance = (p2 * corrected).trace().real() - mp * mp;

  EvolutionResult shown = out.gate;
  shown.pure.reset();
  shown.mixed = MixedState(0.5 * (corrected + corrected.adjoint()));
  const MixedState effective = shown.effective_output(opts.wigner_dim > 0 ? opts.wigner_dim : 2 * dim);
  out.xs = linspace(opts.x_min, opts.x_max, opts.x_points);
  out.ps = linspace(opts.p_min, opts.p_max, opts.p_points);
  out.wigner = wigner(effective, out.xs, out.ps);
  out.wigner_min = out.wigner.minCoeff();
  return out;
}

}  // namespace kerrcubic
