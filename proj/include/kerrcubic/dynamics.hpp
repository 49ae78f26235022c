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

// Gate dynamics in the squeezed-displaced (effective) frame.
//
// States are propagated in a frame that co-rotates with the target cubic phase,
// rho' = U_c^dagger rho U_c with U_c(t) = exp(i mu t x^3). The generator in that frame is the
// effective Hamiltonian plus mu x^3 under a -> a + i (3 mu t x^2 + s(t)) / sqrt(2); it is small,
// so the state stays close to the input and a modest Fock cutoff suffices. The target becomes
// the input itself. s(t) is the sawtooth that absorbs the kicks of the discrete-drive variant.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "kerrcubic/algebra.hpp"
#include "kerrcubic/errors.hpp"
#include "kerrcubic/linalg.hpp"
#include "kerrcubic/operator_core.hpp"
#include "kerrcubic/states.hpp"

namespace kerrcubic {

enum class LossFrame { Fluctuation, Displaced };

inline LossFrame parse_loss_frame(const std::string& s) {
  if (s == "fluctuation") return LossFrame::Fluctuation;
  if (s == "displaced") return LossFrame::Displaced;
  throw InvalidArgument("unknown loss frame '" + s + "' (expected fluctuation or displaced)");
}

inline std::string to_string(LossFrame f) { return f == LossFrame::Fluctuation ? "fluctuation" : "displaced"; }

/// Noise offsets. Detuning and drive offsets are relative to the cubic counter-terms:
/// delta = (1 + ddelta_rel) delta_cubic, beta = (1 + dbetax_rel + i dbetap_rel) beta_cubic.
struct NoiseParams {
  double dtheta = 0.0;
  double ddelta_rel = 0.0;
  double dbetax_rel = 0.0;
  double dbetap_rel = 0.0;

  bool any() const { return dtheta != 0.0 || ddelta_rel != 0.0 || dbetax_rel != 0.0 || dbetap_rel != 0.0; }
};

inline double lambda_from_db(double db) { return std::pow(10.0, db / 20.0); }
inline double lambda_to_db(double lambda) { return 20.0 * std::log10(lambda); }

struct GateConfig {
  double chi = 1.0;
  double lambda = lambda_from_db(10.0);
  double alpha = 65.0;
  double gamma = 0.1;
  double kappa = 0.0;  // power decay rate, in units of chi
  NoiseParams noise;
  int fock = 128;
  LossFrame loss_frame = LossFrame::Fluctuation;
  int trotter_steps = 0;  // 0: continuous drive

  // Integrator: step counts double from min_steps until successive outputs agree to step_tol.
  // Lossy runs use the second-order splitting with one Richardson extrapolation and their own
  // tolerance.
  int min_steps = 4;
  int max_steps = 4096;
  double step_tol = 1e-9;
  double lossy_step_tol = 1e-7;

  // Cutoff contract: recompute at doubled N until the gate error changes by < truncation_tol.
  bool check_truncation = false;
  double truncation_tol = 1e-6;
  int max_fock = 512;

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    require(positive(chi), "GateConfig: chi must be positive");
    require(positive(lambda), "GateConfig: lambda must be positive");
    require(positive(alpha), "GateConfig: alpha must be positive");
    require(gamma >= 0.0 && std::isfinite(gamma), "GateConfig: gamma must be non-negative");
    require(kappa >= 0.0 && std::isfinite(kappa), "GateConfig: kappa must be non-negative");
    require(fock >= 16, "GateConfig: Fock cutoff must be at least 16");
    require(trotter_steps >= 0, "GateConfig: trotter_steps must be non-negative");
    require(min_steps >= 1 && max_steps >= min_steps, "GateConfig: invalid step limits");
    require(step_tol > 0.0 && lossy_step_tol > 0.0, "GateConfig: step tolerances must be positive");
    for (double v : {noise.dtheta, noise.ddelta_rel, noise.dbetax_rel, noise.dbetap_rel}) {
      require(std::isfinite(v), "GateConfig: noise offsets must be finite");
    }
  }

  double lambda_db() const { return lambda_to_db(lambda); }
  double tau() const { return gamma == 0.0 ? 0.0 : cubic_parameters(chi, lambda, alpha, gamma).tau; }
  double mu() const { return chi * lambda * lambda * lambda * alpha / std::numbers::sqrt2; }

  AlphaPoly detuning() const { return (1.0 + noise.ddelta_rel) * cubic_detuning(chi); }
  AlphaPoly drive() const { return Complex(1.0 + noise.dbetax_rel, noise.dbetap_rel) * cubic_drive(chi); }
};

/// Matrices of the effective-frame generators.
struct EffectiveGenerators {
  Operator hamiltonian;  // constant dropped
  Operator lindblad;     // fluctuation part sqrt(kappa)(cosh zeta a + sinh zeta a^dagger)
  Complex drift_rate;    // sqrt(kappa) alpha, the constant part of sqrt(kappa) a_eff
};

namespace detail {

inline BosonPolynomial effective_hamiltonian_poly(const GateConfig& cfg) {
  return effective_hamiltonian(cfg.chi, cfg.lambda, cfg.detuning(), cfg.drive());
}

inline BosonPolynomial fluctuation_lindblad_poly(const GateConfig& cfg) {
  const double zeta = std::log(cfg.lambda);
  const double k = std::sqrt(cfg.kappa);
  return (k * std::cosh(zeta)) * BosonPolynomial::a() + (k * std::sinh(zeta)) * BosonPolynomial::adag();
}

// a_eff^dagger a_eff - alpha^2 in the effective frame (symbolic alpha).
inline BosonPolynomial effective_number_poly(double lambda) {
  return substitute_gaussian_frame(BosonPolynomial::monomial(1, 1), lambda) -
         BosonPolynomial::constant(AlphaPoly::monomial(2));
}

}  // namespace detail

inline EffectiveGenerators effective_generators(const GateConfig& cfg) {
  cfg.validate();
  EffectiveGenerators g;
  const auto h = detail::effective_hamiltonian_poly(cfg);
  g.hamiltonian = to_matrix(h, cfg.alpha, cfg.fock);
  g.lindblad = to_matrix(detail::fluctuation_lindblad_poly(cfg), 0.0, cfg.fock);
  g.drift_rate = std::sqrt(cfg.kappa) * cfg.alpha;
  return g;
}

// ---------------------------------------------------------------------------
// Constant-generator propagation

inline PureState evolve_unitary(const Operator& h, double tau, const PureState& psi) {
  require(h.dim() == psi.dim(), "evolve_unitary: dimension mismatch");
  if (!h.check_hermitian(1e-12)) throw InvalidArgument("evolve_unitary: Hamiltonian is not Hermitian");
  if (tau == 0.0) return psi;
  const auto eig = hermitian_eigen(h.matrix());
  return PureState::normalized(eig.apply_to([tau](double w) { return std::exp(Complex(0.0, -w * tau)); }, psi.amplitudes()));
}

struct LindbladOptions {
  int min_steps = 8;
  int max_steps = 1 << 14;
  double tol = 1e-10;  // max entry change between step counts n and 2n
};

struct LindbladReport {
  int steps = 0;
  double trace_drift = 0.0;
  double min_eigenvalue = 0.0;
  Diagnostics diagnostics;
};

namespace detail {

// Jump operators are polynomials in a and a^dagger, hence banded; sparse products keep the
// dissipator at O(N^2 w) per application.
using SparseMatrix = Eigen::SparseMatrix<Complex>;

inline Matrix dissipator(const SparseMatrix& l, const SparseMatrix& ldl, const Matrix& rho) {
  const Matrix lr = l * rho;
  Matrix out = (l * lr.adjoint()).adjoint();
  out.noalias() -= 0.5 * (ldl * rho);
  out.noalias() -= 0.5 * (ldl * rho.adjoint()).adjoint();
  return out;
}

inline std::pair<SparseMatrix, SparseMatrix> sparse_jump(const Matrix& l) {
  SparseMatrix s = l.sparseView();
  SparseMatrix d = (s.adjoint() * s).pruned();
  return {std::move(s), std::move(d)};
}

// One RK4 step of d rho/dt = D_t(rho) over [t, t + h]; `lind(t)` returns L at time t.
template <typename LindbladAt>
Matrix dissipative_rk4(const LindbladAt& lind, const Matrix& rho, double t, double h) {
  const auto [l0, d0] = sparse_jump(lind(t));
  const auto [lm, dm] = sparse_jump(lind(t + 0.5 * h));
  const auto [l1, d1] = sparse_jump(lind(t + h));
  const Matrix k1 = dissipator(l0, d0, rho);
  const Matrix k2 = dissipator(lm, dm, rho + 0.5 * h * k1);
  const Matrix k3 = dissipator(lm, dm, rho + 0.5 * h * k2);
  const Matrix k4 = dissipator(l1, d1, rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void symmetrize(Matrix& rho) { rho = 0.5 * (rho + rho.adjoint()).eval(); }

inline void check_positivity(const Matrix& rho, LindbladReport& report) {
  report.min_eigenvalue = hermitian_eigen(rho).values[0];
  if (report.min_eigenvalue < -1e-7) {
    std::ostringstream os;
    os << "lindblad: density matrix has eigenvalue " << report.min_eigenvalue;
    report.diagnostics.warn(os.str());
  }
}

}  // namespace detail

/// Lindblad evolution with constant H and L: Strang splitting of the exact unitary flow and an
/// RK4 dissipator step, with step doubling until successive results agree to opts.tol.
inline MixedState evolve_lindblad(const Operator& h, const Operator& l, double tau, const MixedState& rho0,
                                  const LindbladOptions& opts = {}, LindbladReport* report = nullptr) {
  require(h.dim() == rho0.dim() && l.dim() == rho0.dim(), "evolve_lindblad: dimension mismatch");
  require(tau >= 0.0 && std::isfinite(tau), "evolve_lindblad: time must be non-negative");
  if (!h.check_hermitian(1e-12)) throw InvalidArgument("evolve_lindblad: Hamiltonian is not Hermitian");
  LindbladReport local;
  LindbladReport& rep = report ? *report : local;
  if (tau == 0.0) {
    rep.steps = 0;
    return rho0;
  }
  const auto eig = hermitian_eigen(h.matrix());
  const Matrix lm = l.matrix();
  auto lind = [&lm](double) { return lm; };
  auto run = [&](int n) {
    const double dt = tau / n;
    const Matrix u = unitary_from_generator(eig, dt);
    Matrix rho = rho0.matrix();
    for (int k = 0; k < n; ++k) {
      rho = detail::dissipative_rk4(lind, rho, 0.0, 0.5 * dt);
      rho = u * rho * u.adjoint();
      rho = detail::dissipative_rk4(lind, rho, 0.0, 0.5 * dt);
      detail::symmetrize(rho);
    }
    return rho;
  };
  int n = opts.min_steps;
  Matrix prev = run(n);
  while (true) {
    if (2 * n > opts.max_steps) {
      throw NumericalError("evolve_lindblad: step control failed to converge within " +
                           std::to_string(opts.max_steps) + " steps");
    }
    n *= 2;
    Matrix next = run(n);
    const double change = (next - prev).cwiseAbs().maxCoeff();
    prev = std::move(next);
    if (change <= opts.tol) break;
  }
  rep.steps = n;
  const Complex tr = prev.trace();
  rep.trace_drift = std::abs(tr - 1.0);
  if (rep.trace_drift > 1e-8) rep.diagnostics.warn("evolve_lindblad: trace drift exceeds 1e-8");
  detail::check_positivity(prev, rep);
  prev /= tr.real();
  return MixedState(prev);
}

// ---------------------------------------------------------------------------
// Co-rotating gate engine

namespace detail {

// Fourth-order commutator-free Magnus coefficients (two exponentials, Gauss nodes).
inline constexpr double kCfNode1 = 0.5 - 0.28867513459481287;  // 1/2 - sqrt(3)/6
inline constexpr double kCfNode2 = 0.5 + 0.28867513459481287;
inline constexpr double kCfWeight1 = (3.0 - 2.0 * 1.7320508075688772) / 12.0;
inline constexpr double kCfWeight2 = (3.0 + 2.0 * 1.7320508075688772) / 12.0;

// Generators on one time interval, as polynomials whose coefficients are polynomials in the
// absolute time t (the AlphaPoly symbol).
struct FrameSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  BosonPolynomial hamiltonian;
  BosonPolynomial lindblad;
  bool lossy = false;
};

// a -> a + i (3 mu t x^2 + s0 + s1 t) / sqrt(2) with t symbolic.
inline BosonPolynomial corotating_replacement(double mu, double s0, double s1) {
  const auto x = BosonPolynomial::x();
  const BosonPolynomial shift = AlphaPoly::monomial(1, 3.0 * mu) * (x * x) + BosonPolynomial::constant(AlphaPoly({s0, s1}));
  return BosonPolynomial::a() + Complex(0.0, 1.0 / std::numbers::sqrt2) * shift;
}

class CorotatingModel {
 public:
  CorotatingModel(const GateConfig& cfg, bool discrete) : cfg_(cfg), dim_(cfg.fock) {
    tau_ = cfg.tau();
    mu_ = cfg.mu();
    BosonPolynomial h0 = detail::effective_hamiltonian_poly(cfg).evaluate(cfg.alpha);
    lossy_ = cfg.kappa > 0.0;
    if (lossy_ && cfg.loss_frame == LossFrame::Displaced) {
      // The constant c = sqrt(kappa) alpha of L = L_fluct + c acts as the Hamiltonian
      // (i/2)(c* L_fluct - c L_fluct^dagger) = -(kappa alpha / (sqrt(2) lambda)) p.
      h0 = h0 + (-cfg.kappa * cfg.alpha / (std::numbers::sqrt2 * cfg.lambda)) * BosonPolynomial::p();
    }
    const auto x = BosonPolynomial::x();
    h0 = h0 + mu_ * (x * x * x);
    const BosonPolynomial l0 = lossy_ ? fluctuation_lindblad_poly(cfg) : BosonPolynomial();
    number_ = effective_number_poly(cfg.lambda).evaluate(cfg.alpha);
    fluct_number_ = BosonPolynomial::monomial(1, 1);

    const int pieces = discrete ? cfg.trotter_steps : 1;
    // Drive-free variant: between kicks the Hamiltonian carries g x with g = -sqrt(2) lambda beta;
    // in the sawtooth frame s(t) = g h / 2 - g (t - t_k) the kicks and g x drop out.
    const double g = discrete ? -std::numbers::sqrt2 * cfg.lambda * cfg.drive().evaluate(cfg.alpha).real() : 0.0;
    const double h = tau_ / pieces;
    for (int k = 0; k < pieces; ++k) {
      FrameSegment seg;
      seg.t0 = k * h;
      seg.t1 = k + 1 == pieces ? tau_ : (k + 1) * h;
      const double s0 = discrete ? g * (0.5 * h + seg.t0) : 0.0;
      const double s1 = discrete ? -g : 0.0;
      const auto r = corotating_replacement(mu_, s0, s1);
      seg.hamiltonian = substitute_mode(h0, r).drop_constant();
      if (lossy_) seg.lindblad = substitute_mode(l0, r);
      seg.lossy = lossy_;
      replacements_.push_back(r);
      segments_.push_back(std::move(seg));
    }
  }

  int dim() const { return dim_; }
  double tau() const { return tau_; }
  bool lossy() const { return lossy_; }
  const std::vector<FrameSegment>& segments() const { return segments_; }

  Matrix hamiltonian(const FrameSegment& s, double t) const { return to_matrix(s.hamiltonian, t, dim_).matrix(); }
  Matrix lindblad(const FrameSegment& s, double t) const { return to_matrix(s.lindblad, t, dim_).matrix(); }

  /// An effective-frame polynomial observable seen from the rotating frame at time t.
  Operator observable(const BosonPolynomial& p, double t) const {
    const std::size_t k = segment_index(t);
    return to_matrix(substitute_mode(p, replacements_[k]), t, dim_);
  }

  const BosonPolynomial& effective_number() const { return number_; }
  const BosonPolynomial& fluctuation_number() const { return fluct_number_; }

  std::size_t segment_index(double t) const {
    for (std::size_t k = 0; k < segments_.size(); ++k)
      if (t <= segments_[k].t1) return k;
    return segments_.size() - 1;
  }

 private:
  GateConfig cfg_;
  int dim_;
  double tau_ = 0.0;
  double mu_ = 0.0;
  bool lossy_ = false;
  std::vector<FrameSegment> segments_;
  std::vector<BosonPolynomial> replacements_;
  BosonPolynomial number_;
  BosonPolynomial fluct_number_;
};

// exp(-i h (w1 H(t+c1 h) + w2 H(t+c2 h))) style factors of one CF4 step.
inline std::pair<Matrix, Matrix> cf4_factors(const CorotatingModel& m, const FrameSegment& s, double t, double h) {
  const Matrix h1 = m.hamiltonian(s, t + kCfNode1 * h);
  const Matrix h2 = m.hamiltonian(s, t + kCfNode2 * h);
  const auto first = hermitian_eigen(kCfWeight2 * h1 + kCfWeight1 * h2);
  const auto second = hermitian_eigen(kCfWeight1 * h1 + kCfWeight2 * h2);
  return {unitary_from_generator(first, h), unitary_from_generator(second, h)};
}

// Calls step(segment, t, h) for n steps spread over [ta, tb] across segment boundaries.
template <typename Step>
void march(const CorotatingModel& m, double ta, double tb, int n, Step&& step) {
  if (tb <= ta) return;
  for (const auto& seg : m.segments()) {
    const double u0 = std::max(ta, seg.t0);
    const double u1 = std::min(tb, seg.t1);
    if (u1 <= u0) continue;
    const int pieces = std::max(1, static_cast<int>(std::ceil(n * (u1 - u0) / (tb - ta) - 1e-9)));
    const double h = (u1 - u0) / pieces;
    for (int k = 0; k < pieces; ++k) step(seg, u0 + k * h, h);
  }
}

// Pure states: the generators are banded, so each exponential is a Chebyshev expansion.
inline Vector advance_pure(const CorotatingModel& m, Vector psi, double ta, double tb, int n) {
  march(m, ta, tb, n, [&](const FrameSegment& seg, double t, double h) {
    const Matrix h1 = m.hamiltonian(seg, t + kCfNode1 * h);
    const Matrix h2 = m.hamiltonian(seg, t + kCfNode2 * h);
    psi = chebyshev_propagate(BandedHermitian::from_dense(kCfWeight2 * h1 + kCfWeight1 * h2), h, psi);
    psi = chebyshev_propagate(BandedHermitian::from_dense(kCfWeight1 * h1 + kCfWeight2 * h2), h, psi);
  });
  return psi;
}

inline Matrix advance_mixed(const CorotatingModel& m, Matrix rho, double ta, double tb, int n) {
  march(m, ta, tb, n, [&](const FrameSegment& seg, double t, double h) {
    auto lind = [&](double s) { return m.lindblad(seg, s); };
    rho = dissipative_rk4(lind, rho, t, 0.5 * h);
    const auto [u1, u2] = cf4_factors(m, seg, t, h);
    const Matrix u = u2 * u1;
    rho = u * rho * u.adjoint();
    rho = dissipative_rk4(lind, rho, t + 0.5 * h, 0.5 * h);
    symmetrize(rho);
  });
  return rho;
}

}  // namespace detail

struct PhotonSample {
  double t = 0.0;
  double total_mean = 0.0;        // <a_eff^dagger a_eff>, alpha^2 included
  double fluctuation_mean = 0.0;  // <a^dagger a> of the effective-frame mode
  double variance = 0.0;          // Var(a_eff^dagger a_eff)
};

struct EvolutionResult {
  double error = 0.0;
  double fidelity = 1.0;
  double gamma = 0.0;
  double tau = 0.0;
  int steps = 0;
  int fock = 0;
  double trace_drift = 0.0;
  double min_eigenvalue = 0.0;
  // Output in the frame co-rotating with exp(i gamma x^3); the target there is the input.
  std::optional<PureState> pure;
  std::optional<MixedState> mixed;
  std::vector<PhotonSample> photon_trace;
  Diagnostics diagnostics;

  MixedState rotating_density() const { return mixed ? *mixed : MixedState::from_pure(*pure); }

  /// Output in the effective frame, exp(i gamma x^3) applied on the wavefunction and projected
  /// onto `dim` levels.
  MixedState effective_output(int dim) const {
    if (pure) return MixedState::from_pure(cubic_phase_state(gamma, *pure, dim));
    const auto eig = hermitian_eigen(mixed->matrix());
    Matrix out = Matrix::Zero(dim, dim);
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
      if (eig.values[k] < 1e-14) continue;
      const auto v = cubic_phase_state(gamma, PureState::normalized(eig.vectors.col(k)), dim);
      out += eig.values[k] * v.amplitudes() * v.amplitudes().adjoint();
    }
    return MixedState(out / out.trace().real());
  }
};

namespace detail {

inline Operator phase_noise_rotation(const CorotatingModel& m, double dtheta) {
  // exp(-i dtheta n_eff) with the alpha^2 constant dropped, seen from the rotating frame at tau.
  const Operator n = m.observable(m.effective_number(), m.tau());
  return exp_generator(Operator(0.5 * (n.matrix() + n.matrix().adjoint()), true), dtheta);
}

inline PhotonSample photon_sample(const CorotatingModel& m, const Matrix& rho, double t) {
  const Matrix n = m.observable(m.effective_number(), t).matrix();
  const Matrix f = m.observable(m.fluctuation_number(), t).matrix();
  const Matrix n2 = m.observable(m.effective_number() * m.effective_number(), t).matrix();
  PhotonSample s;
  s.t = t;
  const double mean = (n * rho).trace().real();
  s.fluctuation_mean = (f * rho).trace().real();
  s.total_mean = mean + 0.0;
  s.variance = (n2 * rho).trace().real() - mean * mean;
  return s;
}

struct GateRun {
  Matrix rho;  // used when lossy
  Vector psi;  // used when lossless
  int steps = 0;
  std::vector<PhotonSample> trace;
};

inline GateRun run_gate(const GateConfig& cfg, const PureState& input, bool discrete, int samples) {
  const CorotatingModel model(cfg, discrete);
  const double tau = model.tau();
  const double alpha2 = cfg.alpha * cfg.alpha;

  auto integrate = [&](int n, std::vector<PhotonSample>* trace) {
    GateRun out;
    const int intervals = samples >= 2 ? samples - 1 : 1;
    auto record = [&](double t) {
      if (!trace) return;
      const Matrix rho = model.lossy() ? out.rho : Matrix(out.psi * out.psi.adjoint());
      PhotonSample s = photon_sample(model, rho, t);
      s.total_mean += alpha2;
      trace->push_back(s);
    };
    if (model.lossy()) out.rho = input.amplitudes() * input.amplitudes().adjoint();
    else out.psi = input.amplitudes();
    record(0.0);
    for (int k = 0; k < intervals; ++k) {
      const double ta = tau * k / intervals;
      const double tb = k + 1 == intervals ? tau : tau * (k + 1) / intervals;
      const int nk = std::max(1, n / intervals);
      if (model.lossy()) out.rho = advance_mixed(model, out.rho, ta, tb, nk);
      else out.psi = advance_pure(model, out.psi, ta, tb, nk);
      if (samples >= 2) record(tb);
    }
    out.steps = n;
    return out;
  };

  // Step control looks at the interior levels; the outermost ones are truncation artefacts.
  const int inner = interior_size(model.dim());
  auto distance = [&](const GateRun& a, const GateRun& b) {
    if (model.lossy()) return (a.rho - b.rho).topLeftCorner(inner, inner).cwiseAbs().maxCoeff();
    return (a.psi - b.psi).head(inner).norm();
  };

  const int intervals = samples >= 2 ? samples - 1 : 1;
  const double tol = model.lossy() ? cfg.lossy_step_tol : cfg.step_tol;
  int n = std::max(cfg.min_steps, intervals);
  GateRun prev = integrate(n, nullptr);
  while (true) {
    if (2 * n > cfg.max_steps) {
      throw NumericalError("cubic gate: step control failed to converge within " + std::to_string(cfg.max_steps) +
                           " steps");
    }
    n *= 2;
    GateRun next = integrate(n, nullptr);
    const double change = distance(prev, next);
    if (change <= tol && model.lossy()) next.rho = (4.0 * next.rho - prev.rho) / 3.0;
    prev = std::move(next);
    if (change <= tol) break;
  }
  if (samples >= 2) {
    std::vector<PhotonSample> trace;
    prev = integrate(n, &trace);
    prev.trace = std::move(trace);
  }
  if (cfg.noise.dtheta != 0.0) {
    const Matrix r = phase_noise_rotation(model, cfg.noise.dtheta).matrix();
    if (model.lossy()) prev.rho = r * prev.rho * r.adjoint();
    else prev.psi = r * prev.psi;
  }
  return prev;
}

inline EvolutionResult finish(const GateConfig& cfg, const PureState& input, GateRun run) {
  EvolutionResult res;
  res.gamma = cfg.gamma;
  res.tau = cfg.tau();
  res.steps = run.steps;
  res.fock = cfg.fock;
  res.photon_trace = std::move(run.trace);
  if (cfg.kappa > 0.0) {
    Matrix rho = std::move(run.rho);
    symmetrize(rho);
    const Complex tr = rho.trace();
    res.trace_drift = std::abs(tr - 1.0);
    if (res.trace_drift > 1e-6) res.diagnostics.warn("cubic gate: trace drift exceeds 1e-6");
    LindbladReport rep;
    check_positivity(rho, rep);
    res.min_eigenvalue = rep.min_eigenvalue;
    res.diagnostics.merge(rep.diagnostics);
    rho /= tr.real();
    res.mixed = MixedState(rho);
    res.fidelity = fidelity(input, *res.mixed);
  } else {
    res.pure = PureState::normalized(run.psi);
    res.fidelity = fidelity(input, *res.pure);
  }
  res.error = std::clamp(1.0 - res.fidelity, 0.0, 1.0);
  return res;
}

inline EvolutionResult gate_at(const GateConfig& cfg, const PureState& input, bool discrete, int samples) {
  if (cfg.gamma == 0.0) {
    EvolutionResult res;
    res.pure = input;
    res.fock = cfg.fock;
    return res;
  }
  return finish(cfg, input, run_gate(cfg, input, discrete, samples));
}

// Input re-expressed at a different cutoff (padding or cropping the Fock amplitudes).
inline PureState resize_state(const PureState& psi, int dim) {
  Vector v = Vector::Zero(dim);
  const int k = std::min(dim, psi.dim());
  v.head(k) = psi.amplitudes().head(k);
  return PureState::normalized(v);
}

template <typename Make>
EvolutionResult with_truncation_contract(const GateConfig& cfg, Make&& make_input, bool discrete, int samples) {
  GateConfig c = cfg;
  EvolutionResult res = gate_at(c, make_input(c.fock), discrete, samples);
  if (!cfg.check_truncation) return res;
  while (true) {
    if (2 * c.fock > cfg.max_fock) {
      std::ostringstream os;
      os << "truncation: gate error not converged to " << cfg.truncation_tol << " at N = " << c.fock;
      res.diagnostics.warn(os.str());
      return res;
    }
    c.fock *= 2;
    EvolutionResult next = gate_at(c, make_input(c.fock), discrete, samples);
    const double change = std::abs(next.error - res.error);
    next.diagnostics.merge(res.diagnostics);
    res = std::move(next);
    if (change <= cfg.truncation_tol) return res;
  }
}

}  // namespace detail

/// Continuous-drive gate on `input` (built at cfg.fock levels).
inline EvolutionResult cubic_gate(const GateConfig& cfg, const PureState& input) {
  cfg.validate();
  require(input.dim() == cfg.fock, "cubic_gate: input dimension differs from the Fock cutoff");
  return detail::with_truncation_contract(
      cfg, [&](int dim) { return dim == input.dim() ? input : detail::resize_state(input, dim); }, false, 0);
}

/// Continuous-drive gate with the input rebuilt from its specification at each cutoff.
inline EvolutionResult cubic_gate(const GateConfig& cfg, const InputSpec& input) {
  cfg.validate();
  return detail::with_truncation_contract(cfg, [&](int dim) { return input.build(dim); }, false, 0);
}

inline void validate_trotter(const GateConfig& cfg) {
  require(cfg.trotter_steps >= 1, "trotterized_gate: trotter_steps must be at least 1");
  if (cfg.kappa > 0.0) throw InvalidArgument("trotterized_gate: unsupported configuration, loss requires kappa = 0");
  if (cfg.noise.dbetap_rel != 0.0) {
    throw InvalidArgument("trotterized_gate: unsupported configuration, quadrature drive noise is not modelled");
  }
}

/// Discrete-drive variant: N kick-free Kerr segments between displacement kicks.
inline EvolutionResult trotterized_gate(const GateConfig& cfg, const PureState& input) {
  cfg.validate();
  validate_trotter(cfg);
  require(input.dim() == cfg.fock, "trotterized_gate: input dimension differs from the Fock cutoff");
  return detail::with_truncation_contract(
      cfg, [&](int dim) { return dim == input.dim() ? input : detail::resize_state(input, dim); }, true, 0);
}

inline EvolutionResult trotterized_gate(const GateConfig& cfg, const InputSpec& input) {
  cfg.validate();
  validate_trotter(cfg);
  return detail::with_truncation_contract(cfg, [&](int dim) { return input.build(dim); }, true, 0);
}

/// Gate run that also records the photon number at `samples` evenly spaced times in [0, tau].
inline EvolutionResult photon_number_trace(const GateConfig& cfg, const PureState& input, int samples) {
  cfg.validate();
  require(samples >= 2, "photon_number_trace: need at least two samples");
  require(input.dim() == cfg.fock, "photon_number_trace: input dimension differs from the Fock cutoff");
  require(cfg.gamma > 0.0, "photon_number_trace: gamma must be positive");
  GateConfig c = cfg;
  c.check_truncation = false;
  return detail::gate_at(c, input, cfg.trotter_steps > 0, samples);
}

/// Relative excursion (max - min) / mean of the total photon number over a trace.
inline double photon_excursion(const std::vector<PhotonSample>& trace) {
  require(!trace.empty(), "photon_excursion: empty trace");
  double lo = trace.front().total_mean, hi = lo, sum = 0.0;
  for (const auto& s : trace) {
    lo = std::min(lo, s.total_mean);
    hi = std::max(hi, s.total_mean);
    sum += s.total_mean;
  }
  return (hi - lo) / (sum / trace.size());
}

}  // namespace kerrcubic
