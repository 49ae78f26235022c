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


// Command-line front end: one subcommand per operation, CSV tables plus a JSON sidecar holding the
// resolved configuration. Exit codes: 0 ok, 2 configuration error, 3 numerical or I/O failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kerrcubic/kerrcubic.hpp"

namespace kc = kerrcubic;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::set<std::string> kKeys = {
    "chi", "lambda_db", "alpha", "alpha_coefficient", "gamma", "chi_over_kappa", "fock", "loss_frame", "trotter",
    "dtheta", "ddelta_rel", "dbetax_rel", "dbetap_rel", "workers", "state", "delta", "convention", "format",
    "x_min", "x_max", "p_min", "p_max", "grid_points", "values", "noise", "noise_values", "lambda_db_values",
    "alpha_mode", "scan_lo", "scan_hi", "alpha_lo", "alpha_hi", "trotter_values", "correct", "samples",
    "materials", "builtin_table", "symmetric_noise", "step_tol", "lossy_step_tol", "max_steps", "check_truncation", "fit_min_db",
    "fit_max_error", "quick"};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + kc::format_double(v[i]);
  return s;
}

std::vector<double> range(double lo, double hi, double step) {
  std::vector<double> v;
  for (int i = 0; lo + i * step <= hi + 1e-9; ++i) v.push_back(lo + i * step);
  return v;
}

// Configuration values from the file and the flags; every value consulted is recorded in its
// resolved form so the sidecar reproduces the run.
class Settings {
 public:
  void load(const fs::path& path) {
    if (path.extension() == ".json") {
      kc::Json doc;
      try {
        doc = kc::read_json(path);
      } catch (const kc::IoError& e) {
        throw kc::ConfigError(e.what());
      }
      if (!doc.contains("config") || !doc["config"].is_object())
        throw kc::ConfigError("'" + path.string() + "' has no config object");
      for (const auto& [key, value] : doc["config"].items()) {
        if (!kKeys.count(key)) throw kc::ConfigError("unknown key '" + key + "' in " + path.string());
        file_.values[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    } else {
      file_ = kc::load_config(path, kKeys);
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (!kKeys.count(key)) throw kc::ConfigError("unknown key '" + key + "'");
    flags_[key] = value;
  }

  // Recipe defaults sit below the file and the flags.
  void set_default(const std::string& key, const std::string& value) { defaults_[key] = value; }

  bool has(const std::string& key) const { return flags_.count(key) || file_.has(key) || defaults_.count(key); }

  double number(const std::string& key, double fallback) {
    const auto raw = lookup(key);
    double v = fallback;
    if (raw && !kc::parse_double(*raw, v)) fail(key, "expects a number, got '" + *raw + "'");
    if (std::isnan(v)) fail(key, "must not be nan");
    record(key, kc::format_double(v));
    return v;
  }

  int integer(const std::string& key, int fallback) {
    const double v = number(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expects an integer");
    return static_cast<int>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto raw = lookup(key);
    const std::string v = raw ? *raw : fallback;
    record(key, v);
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto raw = lookup(key);
    bool v = fallback;
    if (raw) {
      if (*raw == "true" || *raw == "1") {
        v = true;
      } else if (*raw == "false" || *raw == "0") {
        v = false;
      } else {
        fail(key, "expects true or false, got '" + *raw + "'");
      }
    }
    record(key, v ? "true" : "false");
    return v;
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (const auto raw = lookup(key)) {
      v.clear();
      std::stringstream ss(*raw);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        double d;
        if (b == std::string::npos || !kc::parse_double(item.substr(b, e - b + 1), d) || !std::isfinite(d))
          fail(key, "expects a comma-separated list of numbers");
        v.push_back(d);
      }
    }
    if (v.empty()) fail(key, "is an empty list");
    record(key, join(v));
    return v;
  }

  const kc::Json& resolved() const { return resolved_; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const auto it = file_.lines.find(key);
    throw kc::ConfigError("'" + key + "' " + message, flags_.count(key) || it == file_.lines.end() ? 0 : it->second);
  }

 private:
  std::optional<std::string> lookup(const std::string& key) const {
    if (auto it = flags_.find(key); it != flags_.end()) return it->second;
    if (auto it = file_.values.find(key); it != file_.values.end()) return it->second;
    if (auto it = defaults_.find(key); it != defaults_.end()) return it->second;
    return std::nullopt;
  }

  void record(const std::string& key, const std::string& value) { resolved_[key] = value; }

  kc::ConfigFile file_;
  std::map<std::string, std::string> flags_;
  std::map<std::string, std::string> defaults_;
  kc::Json resolved_ = kc::Json::object();
};

kc::GateConfig gate_config(Settings& s) {
  kc::GateConfig c;
  c.chi = s.number("chi", 1.0);
  c.lambda = kc::lambda_from_db(s.number("lambda_db", 10.0));
  c.gamma = s.number("gamma", 0.1);
  const double l3 = c.lambda * c.lambda * c.lambda;
  c.alpha = s.has("alpha") ? s.number("alpha", 0.0) : s.number("alpha_coefficient", 2.0) * l3;
  const double chi_over_kappa = s.number("chi_over_kappa", std::numeric_limits<double>::infinity());
  if (!(chi_over_kappa > 0.0)) s.fail("chi_over_kappa", "must be positive (inf for no loss)");
  c.kappa = c.chi / chi_over_kappa;
  c.fock = s.integer("fock", 128);
  try {
    c.loss_frame = kc::parse_loss_frame(s.text("loss_frame", "fluctuation"));
  } catch (const kc::InvalidArgument& e) {
    s.fail("loss_frame", e.what());
  }
  c.trotter_steps = s.integer("trotter", 0);
  c.noise.dtheta = s.number("dtheta", 0.0);
  c.noise.ddelta_rel = s.number("ddelta_rel", 0.0);
  c.noise.dbetax_rel = s.number("dbetax_rel", 0.0);
  c.noise.dbetap_rel = s.number("dbetap_rel", 0.0);
  c.step_tol = s.number("step_tol", c.step_tol);
  c.lossy_step_tol = s.number("lossy_step_tol", c.lossy_step_tol);
  c.max_steps = s.integer("max_steps", c.max_steps);
  c.check_truncation = s.flag("check_truncation", false);
  c.validate();
  return c;
}

kc::InputSpec input_spec(Settings& s) {
  const std::string state = s.text("state", "z+");
  const double delta = s.number("delta", 0.5);
  if (!(delta > 0.0)) s.fail("delta", "must be positive");
  try {
    return kc::InputSpec::parse(state, delta, kc::parse_gkp_convention(s.text("convention", "literal")));
  } catch (const kc::InvalidArgument& e) {
    s.fail("state", e.what());
  }
}

kc::AlphaMode alpha_mode(Settings& s, const std::string& fallback) {
  const std::string m = s.text("alpha_mode", fallback);
  if (m == "optimize") return kc::AlphaMode::Optimize;
  if (m == "coefficient") return kc::AlphaMode::Coefficient;
  if (m == "fixed") return kc::AlphaMode::Fixed;
  s.fail("alpha_mode", "expects optimize, coefficient or fixed");
}

// Files of one run plus its sidecar.
class Output {
 public:
  Output(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {}

  void csv(const std::string& name, const kc::Table& t) {
    kc::write_csv(dir_ / name, t);
    files_.push_back(name);
  }

  kc::Json& results() { return results_; }

  void finish(const Settings& s, const std::string& stem) const {
    kc::Json doc;
    doc["tool"] = "kerrcubic";
    doc["version"] = kVersion;
    doc["command"] = command_;
    doc["config"] = s.resolved();
    doc["outputs"] = files_;
    if (!results_.is_null()) doc["results"] = results_;
    kc::write_json(dir_ / (stem + ".json"), doc);
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> files_;
  kc::Json results_;
};

kc::Json fit_json(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::pair<double, double>> ok;
  for (const auto& p : pts)
    if (p.first > 0.0 && p.second > 0.0 && std::isfinite(p.second)) ok.push_back(p);
  if (ok.size() < 3) return nullptr;
  const auto f = kc::fit_power_law(ok);
  return {{"exponent", f.exponent}, {"prefactor", f.prefactor}, {"r_squared", f.r_squared}, {"points", f.points}};
}

kc::Json warnings_json(const kc::Diagnostics& d) { return d.warnings; }

// ---------------------------------------------------------------------------
// Subcommands

void cmd_heff_expand(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto form = kc::weyl_form(kc::effective_hamiltonian(cfg.chi, cfg.lambda, cfg.detuning(), cfg.drive()));
  kc::Table poly({"term", "x_power", "p_power", "alpha_power", "re", "im"});
  kc::Table value({"term", "x_power", "p_power", "re", "im"});
  for (const auto& [mono, coeff] : form) {
    const auto& cs = coeff.coefficients();
    for (std::size_t k = 0; k < cs.size(); ++k) {
      if (cs[k] == kc::Complex(0.0)) continue;
      poly.add({kc::quadrature_label(mono), double(mono.first), double(mono.second), double(k), cs[k].real(),
                cs[k].imag()});
    }
    const kc::Complex v = coeff.evaluate(cfg.alpha);
    value.add({kc::quadrature_label(mono), double(mono.first), double(mono.second), v.real(), v.imag()});
  }
  out.csv("heff-expand.csv", poly);
  out.csv("heff-expand-evaluated.csv", value);
}

void cmd_state(Settings& s, Output& out) {
  const auto input = input_spec(s);
  const int fock = s.integer("fock", 128);
  if (fock < 2) s.fail("fock", "must be at least 2");
  kc::Diagnostics diag;
  const auto psi = input.build(fock, &diag);
  const std::string format = s.text("format", "fock");
  if (format == "fock") {
    kc::Table t({"n", "re", "im", "probability"});
    for (int n = 0; n < fock; ++n) {
      const auto a = psi.amplitudes()[n];
      t.add({double(n), a.real(), a.imag(), std::norm(a)});
    }
    out.csv("state.csv", t);
  } else if (format == "wigner") {
    const int pts = s.integer("grid_points", 81);
    if (pts < 2) s.fail("grid_points", "must be at least 2");
    const auto xs = kc::linspace(s.number("x_min", -6.0), s.number("x_max", 6.0), pts);
    const auto ps = kc::linspace(s.number("p_min", -6.0), s.number("p_max", 6.0), pts);
    out.csv("state-wigner.csv", kc::wigner_table(xs, ps, kc::wigner(psi, xs, ps)));
  } else {
    s.fail("format", "expects fock or wigner");
  }
  out.results()["warnings"] = warnings_json(diag);
}

kc::Table gate_table() {
  return kc::Table({"lambda_db", "alpha", "gamma", "kappa", "trotter_steps", "error", "fidelity", "steps", "fock",
                    "trace_drift", "min_eigenvalue"});
}

void add_gate_row(kc::Table& t, const kc::GateConfig& c, const kc::EvolutionResult& r) {
  t.add({c.lambda_db(), c.alpha, c.gamma, c.kappa, double(c.trotter_steps), r.error, r.fidelity, double(r.steps),
         double(r.fock), r.trace_drift, r.min_eigenvalue});
}

kc::EvolutionResult run_gate(const kc::GateConfig& c, const kc::InputSpec& in) {
  return c.trotter_steps > 0 ? kc::trotterized_gate(c, in) : kc::cubic_gate(c, in);
}

void cmd_gate(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto r = run_gate(cfg, in);
  kc::Table t = gate_table();
  add_gate_row(t, cfg, r);
  out.csv("gate.csv", t);
  out.results()["warnings"] = warnings_json(r.diagnostics);
}

kc::Table sweep_table(const std::vector<kc::SweepRow>& rows, const std::string& column) {
  kc::Table t({column, "lambda_db", "alpha", "alpha_coefficient", "error", "ok", "flagged", "message"});
  for (const auto& r : rows)
    t.add({r.value, r.lambda_db, r.alpha, r.alpha_coefficient, r.error, double(r.ok), double(r.flagged), r.message});
  return t;
}

void require_some_ok(const std::vector<kc::SweepRow>& rows) {
  for (const auto& r : rows)
    if (r.ok) return;
  throw kc::NumericalError("every sweep point failed: " + (rows.empty() ? std::string() : rows.front().message));
}

// Fits over the rows at or above min_db whose error is at most max_error.
kc::Json lambda_fits(const std::vector<kc::SweepRow>& rows, double min_db, double max_error = 1.0) {
  std::vector<std::pair<double, double>> err, alpha;
  for (const auto& r : rows) {
    if (!r.ok || r.lambda_db < min_db || r.error > max_error) continue;
    err.emplace_back(kc::lambda_from_db(r.lambda_db), r.error);
    alpha.emplace_back(kc::lambda_from_db(r.lambda_db), r.alpha);
  }
  return {{"fit_min_db", min_db},
          {"fit_max_error", max_error},
          {"error_vs_lambda", fit_json(err)},
          {"alpha_vs_lambda", fit_json(alpha)}};
}

std::vector<kc::SweepRow> lambda_rows(Settings& s, const kc::GateConfig& base, const kc::InputSpec& in,
                                      const std::vector<double>& dbs, int workers) {
  kc::SweepSpec spec;
  spec.base = base;
  spec.input = in;
  spec.values = dbs;
  spec.alpha_mode = alpha_mode(s, "optimize");
  spec.alpha_coefficient = s.number("alpha_coefficient", 2.0);
  spec.scan_lo = s.number("scan_lo", spec.scan_lo);
  spec.scan_hi = s.number("scan_hi", spec.scan_hi);
  spec.workers = workers;
  return kc::lambda_sweep(spec);
}

void cmd_sweep_lambda(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto rows = lambda_rows(s, cfg, in, s.list("values", range(5.0, 15.0, 1.0)), s.integer("workers", 1));
  out.csv("sweep-lambda.csv", sweep_table(rows, "value"));
  out.results()["fits"] = lambda_fits(rows, s.number("fit_min_db", 0.0), s.number("fit_max_error", 1.0));
  require_some_ok(rows);
}

void cmd_optimize_alpha(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const double l3 = cfg.lambda * cfg.lambda * cfg.lambda;
  const double lo = s.has("alpha_lo") ? s.number("alpha_lo", 0.0) : s.number("scan_lo", 0.2) * l3;
  const double hi = s.has("alpha_hi") ? s.number("alpha_hi", 0.0) : s.number("scan_hi", 200.0) * l3;
  const auto best = kc::optimize_alpha(cfg, in, lo, hi);
  kc::Table t({"lambda_db", "alpha", "alpha_coefficient", "error", "unimodal", "evaluations"});
  t.add({cfg.lambda_db(), best.alpha, best.alpha / l3, best.error, double(best.unimodal), double(best.evaluations)});
  out.csv("optimize-alpha.csv", t);
  out.results()["warnings"] = warnings_json(best.diagnostics);
}

kc::Table noise_table(const std::vector<kc::NoiseRow>& rows, const std::string& noise) {
  kc::Table t({"lambda_db", noise, "alpha", "error", "noiseless_error", "excess", "ok", "flagged", "message"});
  for (const auto& r : rows)
    t.add({r.lambda_db, r.noise, r.alpha, r.error, r.noiseless_error, r.excess(), double(r.ok), double(r.flagged),
           r.message});
  return t;
}

// Excess error against lambda per noise value and against the noise per lambda. The lambda fits
// keep points whose excess is at least three times the noiseless error and whose error is below
// 0.5, where the excess is dominated by the noise term.
kc::Json noise_fits(const std::vector<kc::NoiseRow>& rows) {
  std::map<double, std::vector<std::pair<double, double>>> by_noise, by_lambda;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    if (r.excess() >= 3.0 * r.noiseless_error && r.error < 0.5)
      by_noise[r.noise].emplace_back(kc::lambda_from_db(r.lambda_db), r.excess());
    by_lambda[r.lambda_db].emplace_back(std::abs(r.noise), r.excess());
  }
  kc::Json j = {{"vs_lambda", kc::Json::array()}, {"vs_noise", kc::Json::array()}};
  for (const auto& [n, pts] : by_noise) j["vs_lambda"].push_back({{"noise", n}, {"fit", fit_json(pts)}});
  for (const auto& [l, pts] : by_lambda) j["vs_noise"].push_back({{"lambda_db", l}, {"fit", fit_json(pts)}});
  return j;
}

std::vector<kc::NoiseRow> noise_rows(Settings& s, kc::GateConfig base, const kc::InputSpec& in,
                                     const std::string& noise, const std::vector<double>& noise_values,
                                     const std::vector<double>& dbs, int workers) {
  kc::NoiseSweepSpec spec;
  spec.noise = kc::parse_sweep_parameter(noise);
  base.noise = kc::NoiseParams{};
  spec.base = base;
  spec.input = in;
  spec.noise_values = noise_values;
  spec.lambda_db_values = dbs;
  spec.alpha_mode = alpha_mode(s, "optimize");
  spec.alpha_coefficient = s.number("alpha_coefficient", 2.0);
  spec.symmetric = s.flag("symmetric_noise", true);
  spec.workers = workers;
  return kc::noise_sweep(spec);
}

void cmd_sweep_noise(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const std::string noise = s.text("noise", "dtheta");
  if (noise != "dtheta" && noise != "ddelta_rel" && noise != "dbetax_rel")
    s.fail("noise", "expects dtheta, ddelta_rel or dbetax_rel");
  // A noise flag on its own sets the single noise value.
  const double flagged = noise == "dtheta" ? cfg.noise.dtheta
                         : noise == "ddelta_rel" ? cfg.noise.ddelta_rel
                                                 : cfg.noise.dbetax_rel;
  const auto values = s.list("noise_values", {flagged != 0.0 ? flagged : 1e-6});
  const auto dbs = s.list("lambda_db_values", range(5.0, 15.0, 1.0));
  const auto rows = noise_rows(s, cfg, in, noise, values, dbs, s.integer("workers", 1));
  out.csv("sweep-noise.csv", noise_table(rows, noise));
  out.results()["fits"] = noise_fits(rows);
  for (const auto& r : rows)
    if (r.ok) return;
  throw kc::NumericalError("every noise point failed: " + rows.front().message);
}

kc::StateGenOptions state_gen_options(Settings& s) {
  kc::StateGenOptions o;
  o.delta = s.number("delta", 0.5);
  o.correct = s.flag("correct", false);
  o.x_min = s.number("x_min", o.x_min);
  o.x_max = s.number("x_max", o.x_max);
  o.p_min = s.number("p_min", o.p_min);
  o.p_max = s.number("p_max", o.p_max);
  o.x_points = o.p_points = s.integer("grid_points", 81);
  return o;
}

kc::Table state_gen_table() {
  return kc::Table({"loss_frame", "fidelity", "raw_fidelity", "nlq_variance", "wigner_min", "x_shift", "x_curve",
                    "p_shift", "p_curve"});
}

kc::CubicStateResult add_state_gen(kc::Table& t, const kc::GateConfig& cfg, const kc::StateGenOptions& o) {
  const auto r = kc::generate_cubic_state(cfg, o);
  t.add({kc::to_string(cfg.loss_frame), r.fidelity, r.raw_fidelity, r.nlq_variance, r.wigner_min,
         r.correction.x_shift, r.correction.x_curve, r.correction.p_shift, r.correction.p_curve});
  return r;
}

void cmd_state_gen(Settings& s, Output& out) {
  const auto cfg = gate_config(s);
  const auto o = state_gen_options(s);
  kc::Table t = state_gen_table();
  const auto r = add_state_gen(t, cfg, o);
  out.csv("state-gen.csv", t);
  out.csv("state-gen-wigner.csv", kc::wigner_table(r.xs, r.ps, r.wigner));
  out.results()["warnings"] = warnings_json(r.diagnostics);
}

void cmd_trotter(Settings& s, Output& out) {
  auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto ns = s.list("trotter_values", {1, 2, 4, 8, 16});
  cfg.trotter_steps = 0;
  const double continuous = kc::cubic_gate(cfg, in).error;
  kc::Table t({"trotter_steps", "alpha", "error", "continuous_error", "difference"});
  std::vector<std::pair<double, double>> pts;
  for (double n : ns) {
    if (n < 1 || n != std::floor(n)) s.fail("trotter_values", "expects positive integers");
    kc::GateConfig c = cfg;
    c.trotter_steps = static_cast<int>(n);
    const double e = kc::trotterized_gate(c, in).error;
    t.add({n, c.alpha, e, continuous, std::abs(e - continuous)});
    pts.emplace_back(n, std::abs(e - continuous));
  }
  out.csv("trotter.csv", t);
  out.results()["fit_difference_vs_steps"] = fit_json(pts);
}

kc::Table fom_table(const std::vector<kc::TableRow>& rows, bool reference) {
  std::vector<std::string> cols = {"name", "gamma_nl", "alpha_att_dB_per_m", "wavelength_m", "t_fwhm_s",
                                   "chi_over_kappa", "chi_over_kappa_2sf"};
  if (reference) {
    cols.push_back("reference");
    cols.push_back("matches");
  }
  kc::Table t(cols);
  for (const auto& r : rows) {
    const auto& m = r.material;
    const double fom = kc::figure_of_merit(m);
    const double rounded = kc::round_significant(fom, 2);
    std::vector<kc::Cell> row = {m.name, *m.gamma_nl, *m.alpha_att, *m.wavelength, *m.t_fwhm, fom, rounded};
    if (reference) {
      row.emplace_back(r.reference);
      row.emplace_back(double(rounded == kc::round_significant(r.reference, 2)));
    }
    t.add(row);
  }
  return t;
}

std::vector<kc::TableRow> read_materials(Settings& s, const std::string& path) {
  kc::Table in;
  try {
    in = kc::read_csv(path);
  } catch (const kc::IoError& e) {
    s.fail("materials", e.what());
  }
  std::vector<kc::TableRow> rows;
  try {
    for (std::size_t i = 0; i < in.rows.size(); ++i) {
      kc::TableRow r;
      r.material.name = in.text(i, "name");
      r.material.gamma_nl = in.number(i, "gamma_nl");
      r.material.alpha_att = in.number(i, "alpha_att_dB_per_m");
      r.material.wavelength = in.number(i, "wavelength_m");
      r.material.t_fwhm = in.number(i, "t_fwhm_s");
      rows.push_back(r);
    }
  } catch (const kc::InvalidArgument& e) {
    s.fail("materials", e.what());
  }
  return rows;
}

void cmd_soliton_fom(Settings& s, Output& out) {
  const bool builtin = s.flag("builtin_table", false);
  if (builtin == s.has("materials")) throw kc::ConfigError("soliton-fom needs exactly one of --builtin-table or --materials");
  const auto rows = builtin ? kc::builtin_table() : read_materials(s, s.text("materials", ""));
  out.csv("soliton-fom.csv", fom_table(rows, builtin));
}

// ---------------------------------------------------------------------------
// Figure recipes

struct Recipe {
  std::string name;
  std::function<void(Settings&, Output&, bool quick)> run;
};

const std::vector<std::string> kSixStates = {"z+", "z-", "x+", "x-", "y+", "y-"};

int default_fock(double delta) { return delta < 0.35 ? 256 : delta < 0.45 ? 160 : 128; }

void recipe_fig2(Settings& s, Output& out, bool quick) {
  struct Job {
    std::string state;
    double delta;
  };
  std::vector<Job> jobs;
  const auto deltas = quick ? std::vector<double>{0.5} : std::vector<double>{0.3, 0.4, 0.5};
  for (double d : deltas)
    for (const auto& st : quick ? std::vector<std::string>{"z+"} : kSixStates) jobs.push_back({st, d});
  s.set_default("values", join(quick ? std::vector<double>{8, 10, 12} : range(5.0, 15.0, 1.0)));
  s.set_default("fit_min_db", "11");
  const auto base = gate_config(s);
  const bool fock_given = s.has("fock");
  const auto dbs = s.list("values", {});
  const double min_db = s.number("fit_min_db", 11.0);
  const auto convention = kc::parse_gkp_convention(s.text("convention", "literal"));
  const int workers = s.integer("workers", 1);
  s.text("alpha_mode", "optimize");
  s.number("scan_lo", 0.2);
  s.number("scan_hi", 200.0);
  s.number("alpha_coefficient", 2.0);
  const auto results = kc::parallel_map(jobs, workers, [&](const Job& j) {
    kc::GateConfig c = base;
    if (!fock_given) c.fock = quick ? 48 : default_fock(j.delta);
    kc::SweepSpec spec;
    spec.base = c;
    spec.input = kc::InputSpec::parse(j.state, j.delta, convention);
    spec.values = dbs;
    return kc::lambda_sweep(spec);
  });
  kc::Table t({"state", "delta", "fock", "lambda_db", "alpha", "alpha_coefficient", "error", "ok", "message"});
  kc::Json fits = kc::Json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const int fock = fock_given ? base.fock : quick ? 48 : default_fock(jobs[i].delta);
    for (const auto& r : results[i])
      t.add({jobs[i].state, jobs[i].delta, double(fock), r.lambda_db, r.alpha, r.alpha_coefficient, r.error,
             double(r.ok), r.message});
    kc::Json f = lambda_fits(results[i], min_db);
    f["state"] = jobs[i].state;
    f["delta"] = jobs[i].delta;
    fits.push_back(f);
  }
  out.csv("fig2.csv", t);
  out.results()["fits"] = fits;
}

std::vector<double> kappa_ratios(Settings& s, bool quick) {
  return s.list("values", quick ? std::vector<double>{1e-3} : std::vector<double>{1e-5, 1e-4, 1e-3});
}

// Lossy sweeps with optimized alpha for each chi/kappa, z+ at Delta = 0.5. The squeezing range
// reaches the regime where the loss error is small, which for chi/kappa = 1e-5 starts near 25 dB.
std::vector<std::pair<double, std::vector<kc::SweepRow>>> lossy_sweeps(Settings& s, bool quick) {
  s.set_default("fock", quick ? "32" : "64");
  s.set_default("lossy_step_tol", "1e-6");
  s.set_default("scan_lo", "0.5");
  s.set_default("scan_hi", "500");
  const auto ratios = kappa_ratios(s, quick);
  const auto dbs = s.list("lambda_db_values", quick ? std::vector<double>{15, 20} : range(15.0, 35.0, 5.0));
  const double scan_lo = s.number("scan_lo", 0.5);
  const double scan_hi = s.number("scan_hi", 500.0);
  kc::GateConfig base = gate_config(s);
  const auto in = input_spec(s);
  const int workers = s.integer("workers", 1);
  return kc::parallel_map(ratios, workers, [&](double r) {
    kc::GateConfig c = base;
    c.kappa = c.chi / r;
    kc::SweepSpec spec;
    spec.base = c;
    spec.input = in;
    spec.values = dbs;
    spec.scan_lo = scan_lo;
    spec.scan_hi = scan_hi;
    return std::pair{r, kc::lambda_sweep(spec)};
  });
}

kc::Table lossy_table(const std::vector<std::pair<double, std::vector<kc::SweepRow>>>& sweeps) {
  kc::Table t({"chi_over_kappa", "lambda_db", "alpha", "alpha_coefficient", "error", "ok", "message"});
  for (const auto& [r, rows] : sweeps)
    for (const auto& row : rows)
      t.add({r, row.lambda_db, row.alpha, row.alpha_coefficient, row.error, double(row.ok), row.message});
  return t;
}

void recipe_fig3a(Settings& s, Output& out, bool quick) {
  const auto sweeps = lossy_sweeps(s, quick);
  out.csv("fig3a-optimal.csv", lossy_table(sweeps));
  // Error map over (lambda, alpha) around the optimum, one block per chi/kappa.
  const int n = quick ? 3 : 9;
  kc::GateConfig base = gate_config(s);
  const auto in = input_spec(s);
  struct Point {
    double ratio, db, coefficient;
  };
  std::vector<Point> pts;
  for (const auto& [r, rows] : sweeps)
    for (const auto& row : rows) {
      if (!row.ok) continue;
      for (int k = 0; k < n; ++k)
        pts.push_back({r, row.lambda_db, row.alpha_coefficient * std::pow(4.0, 2.0 * k / (n - 1) - 1.0)});
    }
  const auto errors = kc::parallel_map(pts, s.integer("workers", 1), [&](const Point& p) {
    kc::GateConfig c = base;
    c.kappa = c.chi / p.ratio;
    c.lambda = kc::lambda_from_db(p.db);
    c.alpha = p.coefficient * c.lambda * c.lambda * c.lambda;
    try {
      return kc::cubic_gate(c, in).error;
    } catch (const kc::NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  });
  kc::Table map({"chi_over_kappa", "lambda_db", "alpha_coefficient", "alpha", "error"});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double l = kc::lambda_from_db(pts[i].db);
    map.add({pts[i].ratio, pts[i].db, pts[i].coefficient, pts[i].coefficient * l * l * l, errors[i]});
  }
  out.csv("fig3a-map.csv", map);
  kc::Json fits = kc::Json::array();
  for (const auto& [r, rows] : sweeps) fits.push_back({{"chi_over_kappa", r}, {"fits", lambda_fits(rows, 0.0)}});
  out.results()["fits"] = fits;
}

void recipe_fig3b(Settings& s, Output& out, bool quick) {
  s.set_default("fit_min_db", "0");
  s.set_default("fit_max_error", "0.05");
  const auto sweeps = lossy_sweeps(s, quick);
  const double min_db = s.number("fit_min_db", 0.0);
  const double max_error = s.number("fit_max_error", 0.05);
  out.csv("fig3b.csv", lossy_table(sweeps));
  kc::Json fits = kc::Json::array();
  for (const auto& [r, rows] : sweeps)
    fits.push_back({{"chi_over_kappa", r}, {"fits", lambda_fits(rows, min_db, max_error)}});
  out.results()["fits"] = fits;
}

void noise_recipe(Settings& s, Output& out, bool quick, const std::string& noise, const std::vector<double>& values,
                  const std::string& file) {
  s.set_default("fock", quick ? "32" : "128");
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto vals = s.list("noise_values", quick ? std::vector<double>{values.back()} : values);
  const auto dbs = s.list("lambda_db_values", quick ? std::vector<double>{8, 10} : range(5.0, 15.0, 1.0));
  const auto rows = noise_rows(s, cfg, in, noise, vals, dbs, s.integer("workers", 1));
  out.csv(file, noise_table(rows, noise));
  out.results()["fits"] = noise_fits(rows);
}

void recipe_fig3c(Settings& s, Output& out, bool quick) {
  noise_recipe(s, out, quick, "dtheta", {1e-5, 2e-5, 4e-5}, "fig3c.csv");
}

void recipe_fig6a(Settings& s, Output& out, bool quick) {
  noise_recipe(s, out, quick, "ddelta_rel", {1e-5, 2e-5, 4e-5}, "fig6a.csv");
}

void recipe_fig6b(Settings& s, Output& out, bool quick) {
  noise_recipe(s, out, quick, "dbetax_rel", {1e-5, 2e-5, 4e-5}, "fig6b.csv");
}

void recipe_fig4(Settings& s, Output& out, bool quick) {
  s.set_default("lambda_db", quick ? "10" : "15");
  s.set_default("alpha", quick ? "70" : "14000");
  s.set_default("chi_over_kappa", quick ? "1e-3" : "1e-4");
  s.set_default("fock", quick ? "32" : "96");
  s.set_default("correct", "true");
  s.set_default("grid_points", quick ? "21" : "81");
  const auto cfg = gate_config(s);
  const auto o = state_gen_options(s);
  kc::Table t = state_gen_table();
  for (auto frame : {kc::LossFrame::Fluctuation, kc::LossFrame::Displaced}) {
    kc::GateConfig c = cfg;
    c.loss_frame = frame;
    const auto r = add_state_gen(t, c, o);
    out.csv("fig4-wigner-" + kc::to_string(frame) + ".csv", kc::wigner_table(r.xs, r.ps, r.wigner));
  }
  out.csv("fig4.csv", t);
}

void recipe_fig5(Settings& s, Output& out, bool quick) {
  s.set_default("fock", quick ? "32" : "96");
  auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto ns = s.list("trotter_values", quick ? std::vector<double>{1, 2} : std::vector<double>{1, 2, 4, 8, 16});
  const auto dbs = s.list("lambda_db_values", quick ? std::vector<double>{10} : std::vector<double>{5, 10, 15});
  const int n_alpha = quick ? 3 : 17;
  struct Point {
    double db, coefficient, steps;
  };
  std::vector<Point> pts;
  for (double db : dbs)
    for (int k = 0; k < n_alpha; ++k) {
      const double coefficient = 0.5 * std::pow(40.0, double(k) / (n_alpha - 1));
      pts.push_back({db, coefficient, 0.0});
      for (double n : ns) pts.push_back({db, coefficient, n});
    }
  const auto errors = kc::parallel_map(pts, s.integer("workers", 1), [&](const Point& p) {
    kc::GateConfig c = cfg;
    c.lambda = kc::lambda_from_db(p.db);
    c.alpha = p.coefficient * c.lambda * c.lambda * c.lambda;
    c.trotter_steps = static_cast<int>(p.steps);
    try {
      return run_gate(c, in).error;
    } catch (const kc::NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  });
  kc::Table t({"lambda_db", "trotter_steps", "alpha_coefficient", "alpha", "error"});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double l = kc::lambda_from_db(pts[i].db);
    t.add({pts[i].db, pts[i].steps, pts[i].coefficient, pts[i].coefficient * l * l * l, errors[i]});
  }
  out.csv("fig5.csv", t);
}

void recipe_fig7b(Settings& s, Output& out, bool quick) {
  s.set_default("fock", quick ? "32" : "96");
  const auto cfg = gate_config(s);
  const auto in = input_spec(s);
  const auto dbs = s.list("lambda_db_values", quick ? std::vector<double>{10} : std::vector<double>{5, 10, 15});
  const int samples = s.integer("samples", quick ? 11 : 101);
  const double coefficient = s.number("alpha_coefficient", 2.0);
  kc::Table t({"lambda_db", "alpha", "t", "t_over_tau", "total_mean", "fluctuation_mean", "variance"});
  kc::Json excursions = kc::Json::array();
  for (double db : dbs) {
    kc::GateConfig c = cfg;
    c.lambda = kc::lambda_from_db(db);
    c.alpha = coefficient * c.lambda * c.lambda * c.lambda;
    const auto r = kc::photon_number_trace(c, in.build(c.fock), samples);
    for (const auto& p : r.photon_trace)
      t.add({db, c.alpha, p.t, p.t / r.tau, p.total_mean, p.fluctuation_mean, p.variance});
    excursions.push_back({{"lambda_db", db}, {"relative_excursion", kc::photon_excursion(r.photon_trace)}});
  }
  out.csv("fig7b.csv", t);
  out.results()["excursions"] = excursions;
}

void recipe_table1(Settings& s, Output& out, bool) {
  s.flag("builtin_table", true);
  out.csv("table1.csv", fom_table(kc::builtin_table(), true));
}

const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> r = {
      {"fig2", recipe_fig2},   {"fig3a", recipe_fig3a}, {"fig3b", recipe_fig3b}, {"fig3c", recipe_fig3c},
      {"fig4", recipe_fig4},   {"fig5", recipe_fig5},   {"fig6a", recipe_fig6a}, {"fig6b", recipe_fig6b},
      {"fig7b", recipe_fig7b}, {"table1", recipe_table1}};
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch

int emit_error(int code, const std::string& kind, const std::string& message, int line = 0) {
  kc::Json j;
  j["error"] = kind;
  j["message"] = message;
  if (line > 0) j["line"] = line;
  j["exit_code"] = code;
  std::cerr << j.dump() << std::endl;
  return code;
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("KERRCUBIC_OUT"); env && *env) return env;
  return "kerrcubic-out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent cubic phase gate simulator"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_flag, recipe_name;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Configuration file (key = value lines) or a JSON sidecar");
    sub->add_option("--out", out_flag, "Output directory (default $KERRCUBIC_OUT, else ./kerrcubic-out)");
    auto value = [&](const std::string& flag, const std::string& key, const std::string& help) {
      sub->add_option_function<std::string>(flag, [&, key](const std::string& v) { overrides[key] = v; }, help);
    };
    value("--workers", "workers", "Worker threads for sweeps");
    value("--fock", "fock", "Fock-space cutoff N");
    value("--lambda-db", "lambda_db", "Squeezing in dB");
    value("--alpha", "alpha", "Displacement alpha");
    value("--gamma", "gamma", "Gate angle gamma");
    value("--chi-over-kappa", "chi_over_kappa", "Figure of merit chi/kappa (inf: no loss)");
    value("--loss-frame", "loss_frame", "fluctuation|displaced");
    value("--trotter", "trotter", "Trotter steps (0: continuous drive)");
    value("--dtheta", "dtheta", "Phase rotation after the medium");
    value("--ddelta-rel", "ddelta_rel", "Relative detuning offset");
    value("--dbetax-rel", "dbetax_rel", "Relative in-phase drive offset");
    value("--state", "state", "Input state: z+, z-, x+, x-, y+, y- or squeezed");
    value("--delta", "delta", "GKP / squeezed-vacuum width Delta");
    value("--convention", "convention", "GKP displacement convention: literal|standard-lattice");
    value("--values", "values", "Comma-separated sweep values");
    value("--alpha-mode", "alpha_mode", "optimize|coefficient|fixed");
    sub->add_option("--set", sets, "Any configuration key as key=value (repeatable)")->allow_extra_args(false);
  };

  struct Command {
    std::string name, help;
    std::function<void(Settings&, Output&)> run;
  };
  const std::vector<Command> commands = {
      {"heff-expand", "Quadrature expansion of the effective Hamiltonian", cmd_heff_expand},
      {"state", "Materialize an input state as Fock amplitudes or a Wigner grid", cmd_state},
      {"gate", "Run one cubic gate and report its error", cmd_gate},
      {"sweep-lambda", "Gate error against squeezing", cmd_sweep_lambda},
      {"optimize-alpha", "Displacement minimizing the gate error", cmd_optimize_alpha},
      {"sweep-noise", "Gate error under phase, detuning or drive noise", cmd_sweep_noise},
      {"state-gen", "Cubic phase state generation with fidelity and Wigner grid", cmd_state_gen},
      {"trotter", "Discrete-drive convergence against the continuous gate", cmd_trotter},
      {"soliton-fom", "Soliton figure of merit chi/kappa", cmd_soliton_fom},
  };
  std::map<CLI::App*, const Command*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs[sub] = &c;
    if (c.name == "state") {
      sub->add_option_function<std::string>("--format", [&](const std::string& v) { overrides["format"] = v; },
                                            "fock|wigner");
    }
    if (c.name == "state-gen") sub->add_flag_callback("--correct", [&] { overrides["correct"] = "true"; },
                                                      "Optimize a Gaussian post-correction");
    if (c.name == "soliton-fom") {
      sub->add_flag_callback("--builtin-table", [&] { overrides["builtin_table"] = "true"; },
                             "Use the built-in platform table");
      sub->add_option_function<std::string>("--materials", [&](const std::string& v) { overrides["materials"] = v; },
                                            "Materials CSV: name, gamma_nl, alpha_att_dB_per_m, wavelength_m, t_fwhm_s");
    }
    if (c.name == "sweep-noise") {
      sub->add_option_function<std::string>("--noise", [&](const std::string& v) { overrides["noise"] = v; },
                                            "dtheta|ddelta_rel|dbetax_rel");
      sub->add_option_function<std::string>("--noise-values",
                                            [&](const std::string& v) { overrides["noise_values"] = v; },
                                            "Comma-separated noise magnitudes");
      sub->add_option_function<std::string>("--lambda-db-values",
                                            [&](const std::string& v) { overrides["lambda_db_values"] = v; },
                                            "Comma-separated squeezing values in dB");
    }
  }
  auto* reproduce = app.add_subcommand("reproduce", "Regenerate the dataset behind a figure or table");
  add_common(reproduce);
  std::vector<std::string> recipe_names;
  for (const auto& r : recipes()) recipe_names.push_back(r.name);
  reproduce->add_option("recipe", recipe_name, "Recipe name")->required()->check(CLI::IsMember(recipe_names));
  reproduce->add_flag_callback("--quick", [&] { overrides["quick"] = "true"; }, "Reduced grids for a fast check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << std::endl;
    std::string message = e.what();
    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1]))
      message = std::string("unknown subcommand '") + argv[1] + "'";
    return emit_error(2, "config", message);
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    Settings settings;
    if (!config_path.empty()) settings.load(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw kc::ConfigError("--set expects key=value, got '" + kv + "'");
      settings.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) settings.set(k, v);
    const fs::path dir = output_dir(out_flag);
    if (chosen == reproduce) {
      const fs::path rdir = dir / recipe_name;
      Output out(rdir, "reproduce " + recipe_name);
      const bool quick = settings.flag("quick", false);
      for (const auto& r : recipes())
        if (r.name == recipe_name) r.run(settings, out, quick);
      out.finish(settings, recipe_name);
    } else {
      Output out(dir, name);
      try {
        subs.at(chosen)->run(settings, out);
      } catch (const kc::NumericalError&) {
        out.finish(settings, name);
        throw;
      }
      out.finish(settings, name);
    }
  } catch (const kc::ConfigError& e) {
    return emit_error(2, "config", e.what(), e.line());
  } catch (const kc::InvalidArgument& e) {
    return emit_error(2, "config", e.what());
  } catch (const kc::NumericalError& e) {
    return emit_error(3, "numerical", e.what());
  } catch (const kc::IoError& e) {
    return emit_error(3, "io", e.what());
  } catch (const std::exception& e) {
    return emit_error(3, "internal", e.what());
  }
  return 0;
}
