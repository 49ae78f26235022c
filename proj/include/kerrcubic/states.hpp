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

// Input and target states: squeezed vacuum, finite-energy GKP qubits, the ideal cubic phase
// gate and the nonlinear-quadrature variance.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kerrcubic/algebra.hpp"
#include "kerrcubic/errors.hpp"
#include "kerrcubic/linalg.hpp"
#include "kerrcubic/operator_core.hpp"

namespace kerrcubic {

namespace detail {

// Hermite functions phi_n(x) (n < dim) sampled on a uniform x grid. Inner products with smooth,
// decaying wavefunctions by the trapezoid rule are spectrally accurate, so projections onto the
// first dim Fock levels are exact truncations up to rounding.
class HermiteGrid {
 public:
  /// `bandwidth` bounds the local wavenumber of the functions to be integrated.
  HermiteGrid(int dim, double reach, double bandwidth) : dim_(dim) {
    require(dim >= 2, "state construction: dimension must be at least 2");
    const double kmax = std::sqrt(2.0 * dim + 1.0) + bandwidth;
    const double h = std::min(0.02, 0.6 / kmax);
    const int points = static_cast<int>(std::ceil(2.0 * reach / h)) + 1;
    step_ = 2.0 * reach / (points - 1);
    x_.resize(points);
    phi_.resize(points, dim);
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int i = 0; i < points; ++i) {
      x_[i] = -reach + i * step_;
      hermite_functions(x_[i], dim, row.data());
      for (int n = 0; n < dim; ++n) phi_(i, n) = row[static_cast<std::size_t>(n)];
    }
  }

  /// Grid for dim levels and wavefunctions centred within `extent` of the origin.
  static HermiteGrid for_states(int dim, double extent, double bandwidth) {
    return HermiteGrid(dim, std::max(std::sqrt(2.0 * dim + 1.0) + 8.0, extent), bandwidth);
  }

  int dim() const { return dim_; }
  const RealVector& x() const { return x_; }
  const RealMatrix& phi() const { return phi_; }

  /// <n|f> for sampled values f(x_i).
  Vector project(const Vector& f) const { return step_ * (phi_.transpose().cast<Complex>() * f); }

  /// f(x_i) = sum_n c_n phi_n(x_i).
  Vector evaluate(const Vector& c) const {
    require(c.size() <= dim_, "HermiteGrid::evaluate: too many amplitudes");
    return phi_.leftCols(c.size()).cast<Complex>() * c;
  }

  /// Matrix of the multiplication operator g(x): <m|g|n>.
  Matrix multiplication_operator(const Vector& g) const {
    Matrix weighted = phi_.cast<Complex>();
    for (Eigen::Index i = 0; i < weighted.rows(); ++i) weighted.row(i) *= step_ * g[i];
    return phi_.transpose().cast<Complex>() * weighted;
  }

 private:
  int dim_;
  double step_ = 0.0;
  RealVector x_;
  RealMatrix phi_;
};

// Wavefunction given as a sum of real Gaussians weight * exp(-(x - centre)^2 / (2 width^2)).
struct Gaussian1D {
  double weight;
  double centre;
  double width;
};

inline Vector project_gaussians(const std::vector<Gaussian1D>& terms, int dim) {
  double extent = 0.0;
  double min_width = 1e300;
  for (const auto& g : terms) {
    extent = std::max(extent, std::abs(g.centre) + 12.0 * g.width);
    min_width = std::min(min_width, g.width);
  }
  const HermiteGrid grid = HermiteGrid::for_states(dim, extent, 8.0 / min_width);
  Vector f = Vector::Zero(grid.x().size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double v = 0.0;
    for (const auto& g : terms) {
      const double d = (grid.x()[i] - g.centre) / g.width;
      v += g.weight * std::exp(-0.5 * d * d);
    }
    f[i] = v;
  }
  return grid.project(f);
}

// Normalize a projected vector, recording how much norm the truncation discarded relative
// to the analytic norm of the full wavefunction.
inline PureState finish_projection(const Vector& v, double full_norm_sq, double tol, const std::string& what,
                                   Diagnostics* diag) {
  const double kept = v.squaredNorm();
  const double leaked = std::max(0.0, 1.0 - kept / full_norm_sq);
  if (diag && leaked > tol) {
    std::ostringstream os;
    os << what << ": truncation discards " << leaked << " of the norm at N = " << v.size();
    diag->warn(os.str());
  }
  return PureState::normalized(v);
}

}  // namespace detail

/// |Delta>: p-squeezed vacuum with <p^2> = Delta^2/2, i.e. squeeze(-ln Delta)|0>.
inline PureState squeezed_vacuum(double delta, int dim, Diagnostics* diag = nullptr) {
  require(delta > 0.0 && std::isfinite(delta), "squeezed_vacuum: Delta must be positive");
  require(dim >= 2, "squeezed_vacuum: dimension must be at least 2");
  if (diag && delta > 1.0) diag->warn("squeezed_vacuum: Delta > 1 describes an x-squeezed state");
  // S(zeta)|0> = cosh(zeta)^{-1/2} sum_n tanh(zeta)^n sqrt((2n)!)/(2^n n!) |2n>.
  const double zeta = -std::log(delta);
  const double t = std::tanh(zeta);
  Vector v = Vector::Zero(dim);
  double c = 1.0 / std::sqrt(std::cosh(zeta));
  for (int n = 0; 2 * n < dim; ++n) {
    v[2 * n] = c;
    // ratio of successive amplitudes: t * sqrt((2n+1)(2n+2)) / (2(n+1))
    c *= t * std::sqrt((2.0 * n + 1.0) * (2.0 * n + 2.0)) / (2.0 * (n + 1));
  }
  return detail::finish_projection(v, 1.0, 1e-10, "squeezed_vacuum", diag);
}

enum class GkpLabel { ZPlus, ZMinus, XPlus, XMinus, YPlus, YMinus };
enum class GkpConvention { Literal, StandardLattice };

struct GkpParams {
  GkpLabel label = GkpLabel::ZPlus;
  double delta = 0.5;
  double weight_cutoff = 1e-8;
  GkpConvention convention = GkpConvention::Literal;
};

inline GkpLabel parse_gkp_label(const std::string& s) {
  if (s == "z+") return GkpLabel::ZPlus;
  if (s == "z-") return GkpLabel::ZMinus;
  if (s == "x+") return GkpLabel::XPlus;
  if (s == "x-") return GkpLabel::XMinus;
  if (s == "y+") return GkpLabel::YPlus;
  if (s == "y-") return GkpLabel::YMinus;
  throw InvalidArgument("unknown GKP label '" + s + "' (expected z+, z-, x+, x-, y+ or y-)");
}

inline std::string to_string(GkpLabel l) {
  switch (l) {
    case GkpLabel::ZPlus: return "z+";
    case GkpLabel::ZMinus: return "z-";
    case GkpLabel::XPlus: return "x+";
    case GkpLabel::XMinus: return "x-";
    case GkpLabel::YPlus: return "y+";
    case GkpLabel::YMinus: return "y-";
  }
  return "?";
}

inline GkpConvention parse_gkp_convention(const std::string& s) {
  if (s == "literal") return GkpConvention::Literal;
  if (s == "standard-lattice") return GkpConvention::StandardLattice;
  throw InvalidArgument("unknown GKP convention '" + s + "' (expected literal or standard-lattice)");
}

inline std::string to_string(GkpConvention c) {
  return c == GkpConvention::Literal ? "literal" : "standard-lattice";
}

namespace detail {

// Unnormalized z+ (parity 0) or z- (parity 1) code word as a list of x-space Gaussians, plus
// the analytic squared norm of their sum.
inline std::vector<Gaussian1D> gkp_peaks(const GkpParams& p, int parity, double* norm_sq) {
  const double root_pi = std::sqrt(std::numbers::pi);
  // D(s) with real s shifts x by sqrt(2) s; the standard lattice shifts x by the argument itself.
  const double x_per_unit = p.convention == GkpConvention::Literal ? std::numbers::sqrt2 * root_pi : root_pi;
  // |Delta> has x-variance 1/(2 Delta^2): psi(x) ~ exp(-Delta^2 x^2 / 2).
  const double width = 1.0 / p.delta;
  const double amp = std::pow(std::numbers::pi, -0.25) * std::sqrt(p.delta);
  std::vector<Gaussian1D> peaks;
  for (int k = 0;; ++k) {
    bool any = false;
    for (int sign : {1, -1}) {
      if (k == 0 && sign == -1 && parity == 0) continue;
      const int j = parity == 0 ? sign * 2 * k : (sign > 0 ? 2 * k + 1 : -(2 * k + 1));
      const double arg = j * root_pi * p.delta;
      const double w = std::exp(-0.5 * arg * arg);
      if (w < p.weight_cutoff) continue;
      any = true;
      peaks.push_back({w * amp, j * x_per_unit, width});
    }
    if (!any) break;
  }
  // <g_i|g_j> for normalized Gaussians of equal width: exp(-Delta^2 (x_i - x_j)^2 / 4).
  double n2 = 0.0;
  for (const auto& a : peaks)
    for (const auto& b : peaks) {
      const double d = a.centre - b.centre;
      n2 += a.weight * b.weight / (amp * amp) * std::exp(-p.delta * p.delta * d * d / 4.0);
    }
  *norm_sq = n2;
  return peaks;
}

}  // namespace detail

/// Norm of the raw z+ or z- superposition before normalization (peaks overlap for small Delta).
inline double gkp_raw_norm(const GkpParams& p, int parity) {
  double n2 = 0.0;
  detail::gkp_peaks(p, parity, &n2);
  return std::sqrt(n2);
}

inline PureState gkp_state(const GkpParams& p, int dim, Diagnostics* diag = nullptr) {
  require(p.delta > 0.0 && std::isfinite(p.delta), "gkp_state: Delta must be positive");
  require(p.weight_cutoff > 0.0 && p.weight_cutoff < 1.0, "gkp_state: weight cutoff must lie in (0, 1)");
  auto word = [&](int parity) {
    double n2 = 0.0;
    const auto peaks = detail::gkp_peaks(p, parity, &n2);
    const Vector v = detail::project_gaussians(peaks, dim) / std::sqrt(n2);
    return detail::finish_projection(v, 1.0, 1e-8, "gkp_state", diag);
  };
  switch (p.label) {
    case GkpLabel::ZPlus: return word(0);
    case GkpLabel::ZMinus: return word(1);
    default: break;
  }
  const Vector zp = word(0).amplitudes();
  const Vector zm = word(1).amplitudes();
  const double r = 1.0 / std::numbers::sqrt2;
  switch (p.label) {
    case GkpLabel::XPlus: return PureState::normalized(r * (zp + zm));
    case GkpLabel::XMinus: return PureState::normalized(r * (zp - zm));
    case GkpLabel::YPlus: return PureState::normalized(r * (zp + kI * zm));
    case GkpLabel::YMinus: return PureState::normalized(r * (zp - kI * zm));
    default: break;
  }
  throw InvalidArgument("gkp_state: unhandled label");
}

/// Parity operator (-1)^n.
inline Operator parity_operator(int dim) {
  Matrix m = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) m(k, k) = k % 2 == 0 ? 1.0 : -1.0;
  return Operator(std::move(m), true);
}

/// exp(i gamma x^3) as a function of the truncated x: exactly unitary and exactly commuting
/// with the truncated x. Use cubic_phase_state for accurate targets.
inline Operator ideal_cubic_gate(double gamma, int dim, Diagnostics* diag = nullptr) {
  require(std::isfinite(gamma), "ideal_cubic_gate: gamma must be finite");
  require(dim >= 2, "ideal_cubic_gate: dimension must be at least 2");
  if (gamma == 0.0) return identity_operator(dim);
  const auto eig = hermitian_eigen(position(dim).matrix());
  if (diag) {
    const double xmax = eig.values.cwiseAbs().maxCoeff();
    if (std::abs(gamma) * xmax * xmax * xmax > 1e4) {
      diag->warn("ideal_cubic_gate: phase at the edge of the truncated x range is very large");
    }
  }
  return Operator(eig.apply([gamma](double x) { return std::exp(Complex(0.0, gamma * x * x * x)); }));
}

/// exp(i gamma x^3)|psi> projected onto out_dim Fock levels, computed on the wavefunction so
/// that the only truncation is the final projection.
inline PureState cubic_phase_state(double gamma, const PureState& psi, int out_dim, Diagnostics* diag = nullptr) {
  require(std::isfinite(gamma), "cubic_phase_state: gamma must be finite");
  const int dim = std::max(out_dim, psi.dim());
  const double reach = std::sqrt(2.0 * dim + 1.0) + 8.0;
  const detail::HermiteGrid grid(dim, reach, 3.0 * std::abs(gamma) * reach * reach);
  Vector f = grid.evaluate(psi.amplitudes());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double x = grid.x()[i];
    f[i] *= std::exp(Complex(0.0, gamma * x * x * x));
  }
  const Vector c = grid.project(f).head(out_dim);
  return detail::finish_projection(c, 1.0, 1e-10, "cubic_phase_state", diag);
}

/// p - 3 gamma x^2 as a polynomial.
inline BosonPolynomial nonlinear_quadrature(double gamma) {
  const auto x = BosonPolynomial::x();
  return BosonPolynomial::p() - (3.0 * gamma) * (x * x);
}

/// Var(p - 3 gamma x^2). Operator products are formed symbolically so the square is the exact
/// projection rather than a product of truncated matrices.
template <typename State>
double nlq_variance(const State& state, double gamma) {
  const auto q = nonlinear_quadrature(gamma);
  const int dim = state.dim();
  const Complex mean = expectation(to_matrix(q, 0.0, dim), state);
  const Complex second = expectation(to_matrix(q * q, 0.0, dim), state);
  return std::max(0.0, (second - mean * mean).real());
}

/// Input-state selector: a squeezed vacuum or one of the GKP qubit states.
struct InputSpec {
  enum class Kind { Squeezed, Gkp } kind = Kind::Gkp;
  GkpParams gkp;  // gkp.delta is also the squeezed-vacuum width

  static InputSpec parse(const std::string& name, double delta,
                         GkpConvention convention = GkpConvention::Literal) {
    InputSpec s;
    s.gkp.delta = delta;
    s.gkp.convention = convention;
    if (name == "squeezed" || name == "delta") {
      s.kind = Kind::Squeezed;
    } else {
      s.kind = Kind::Gkp;
      s.gkp.label = parse_gkp_label(name);
    }
    return s;
  }

  std::string name() const { return kind == Kind::Squeezed ? "squeezed" : to_string(gkp.label); }

  PureState build(int dim, Diagnostics* diag = nullptr) const {
    return kind == Kind::Squeezed ? squeezed_vacuum(gkp.delta, dim, diag) : gkp_state(gkp, dim, diag);
  }
};

}  // namespace kerrcubic
