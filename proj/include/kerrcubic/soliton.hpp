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

// Quantum Kerr soliton scales and the single-mode figure of merit chi / kappa for waveguides.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "kerrcubic/errors.hpp"

namespace kerrcubic {

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kSpeedOfLight = 2.99792458e8;  // m / s

/// T_FWHM / T for a sech^2 intensity profile, 2 arccosh(sqrt(2)).
inline double sech_fwhm_factor() { return 2.0 * std::acosh(std::numbers::sqrt2); }

/// Natural power decay rate per metre for an attenuation in dB per metre.
inline double db_per_m_to_rate(double alpha_att) { return std::log(10.0) / 10.0 * alpha_att; }

struct MaterialParams {
  std::string name;
  std::optional<double> gamma_nl;    // W^-1 m^-1
  std::optional<double> alpha_att;   // dB / m
  std::optional<double> wavelength;  // m
  std::optional<double> t_fwhm;      // s
  std::optional<double> v_g;         // m / s
  std::optional<double> gvd;         // d^2 omega / dk^2, m^2 / s
  std::optional<double> n2;          // m^2 / W
  std::optional<double> a_eff;       // m^2

  double get(const std::optional<double>& v, const char* field) const {
    if (!v) throw InvalidArgument(std::string("material ") + (name.empty() ? "" : "'" + name + "' ") +
                                  "is missing field " + field);
    if (!(*v > 0.0) || !std::isfinite(*v))
      throw InvalidArgument(std::string("material field ") + field + " must be positive");
    return *v;
  }

  double omega0() const { return 2.0 * std::numbers::pi * kSpeedOfLight / get(wavelength, "wavelength"); }

  /// gamma_nl as given, or derived from n2 and A_eff.
  double nonlinearity() const;
};

inline double gamma_from_material(double n2, double a_eff, double wavelength) {
  require(n2 > 0.0 && a_eff > 0.0 && wavelength > 0.0, "gamma_from_material: inputs must be positive");
  const double omega0 = 2.0 * std::numbers::pi * kSpeedOfLight / wavelength;
  return omega0 * n2 / (kSpeedOfLight * a_eff);
}

inline double MaterialParams::nonlinearity() const {
  if (gamma_nl) return get(gamma_nl, "gamma_nl");
  if (n2 || a_eff) return gamma_from_material(get(n2, "n2"), get(a_eff, "a_eff"), get(wavelength, "wavelength"));
  return get(gamma_nl, "gamma_nl");
}

struct SolitonScales {
  double t_n = 0.0;    // s, of the mean-photon-number envelope
  double kappa = 0.0;  // 1 / s
  double chi = 0.0;    // 1 / s
};

/// Rates for a pulse of the given intensity FWHM; v_g defaults to c / 2 when absent.
inline SolitonScales soliton_scales(const MaterialParams& m) {
  const double vg = m.v_g ? m.get(m.v_g, "v_g") : 0.5 * kSpeedOfLight;
  SolitonScales s;
  s.t_n = m.get(m.t_fwhm, "t_fwhm") / sech_fwhm_factor();
  s.kappa = db_per_m_to_rate(m.get(m.alpha_att, "alpha_att")) * vg;
  s.chi = kHbar * m.omega0() * vg * m.nonlinearity() / (2.0 * s.t_n);
  return s;
}

/// Closed form chi / kappa ~ 3.83 hbar omega0 gamma_nl / (T_FWHM alpha_att).
inline double figure_of_merit_closed_form(const MaterialParams& m) {
  return 3.83 * kHbar * m.omega0() * m.nonlinearity() / (m.get(m.t_fwhm, "t_fwhm") * m.get(m.alpha_att, "alpha_att"));
}

/// chi / kappa from the soliton rates; v_g cancels.
inline double figure_of_merit(const MaterialParams& m) {
  const auto s = soliton_scales(m);
  const double fom = s.chi / s.kappa;
  const double closed = figure_of_merit_closed_form(m);
  if (std::abs(fom - closed) > 0.01 * closed) {
    throw NumericalError("figure_of_merit: rate form and closed form disagree by more than 1%");
  }
  return fom;
}

/// Characteristic time T_n = 2 gvd / ((n - 1) hbar omega0 v_g^3 gamma_nl) of the n-photon soliton.
inline double soliton_timescale(double n, const MaterialParams& m) {
  require(n >= 2.0, "soliton_timescale: photon number must be at least 2");
  const double vg = m.get(m.v_g, "v_g");
  return 2.0 * m.get(m.gvd, "gvd") / ((n - 1.0) * kHbar * m.omega0() * vg * vg * vg * m.nonlinearity());
}

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  if (depth <= 0) throw NumericalError("envelope_overlap: quadrature did not converge");
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50);
}

}  // namespace detail

/// Overlap int h_n h_nbar dz of the sech envelopes h_n(z) = sech(z / (v_g T_n)) / sqrt(2 v_g T_n).
/// It depends only on T_n / T_nbar = (nbar - 1) / (n - 1).
inline double envelope_overlap(double n, double n_bar) {
  require(n >= 2.0 && n_bar >= 2.0, "envelope_overlap: photon numbers must be at least 2");
  if (n == n_bar) return 1.0;
  // Widths in units of the wider envelope, so the integrand decays on the unit scale.
  const double wn = 1.0 / (n - 1.0), wb = 1.0 / (n_bar - 1.0);
  const double a = wn / std::max(wn, wb);
  const double b = wb / std::max(wn, wb);
  auto sech = [](double x) { return 1.0 / std::cosh(x); };
  auto f = [&](double z) { return sech(z / a) * sech(z / b) / (2.0 * std::sqrt(a * b)); };
  const double upper = 750.0 * std::max(a, b);
  // Even integrand; split at a few widths so the adaptive rule sees the bulk.
  const double knee = 40.0 * std::max(a, b);
  return 2.0 * (detail::integrate(f, 0.0, knee, 1e-15) + detail::integrate(f, knee, upper, 1e-17));
}

/// Overlap for a material; checks that the dispersion data needed for T_n are present.
inline double envelope_overlap(double n, double n_bar, const MaterialParams& m) {
  const double tn = soliton_timescale(n, m);
  const double tb = soliton_timescale(n_bar, m);
  require(tn > 0.0 && tb > 0.0, "envelope_overlap: invalid time scales");
  return envelope_overlap(n, n_bar);
}

struct TableRow {
  MaterialParams material;
  double reference = 0.0;
};

/// Waveguide platforms at T_FWHM = 100 fs with their reference chi / kappa values.
inline std::vector<TableRow> builtin_table() {
  auto row = [](const char* name, double gamma, double att, double wl, double reference) {
    TableRow r;
    r.material.name = name;
    r.material.gamma_nl = gamma;
    r.material.alpha_att = att;
    r.material.wavelength = wl;
    r.material.t_fwhm = 100e-15;
    r.reference = reference;
    return r;
  };
  return {row("Silicon-on-insulator", 280.0, 400.0, 1.54e-6, 3.4e-6),
          row("AlGaAs-on-insulator", 660.0, 140.0, 1.59e-6, 2.2e-5),
          row("Si3N4", 1.0, 1.0, 1.5e-6, 5.1e-6)};
}

/// Rounds to `digits` significant figures.
inline double round_significant(double v, int digits) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
  return std::round(v * scale) / scale;
}

}  // namespace kerrcubic
