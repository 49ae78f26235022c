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

// Dense linear algebra on a single bosonic mode truncated to N Fock levels.
//
// Conventions: hbar = 1, x = (a + a^dagger)/sqrt(2), p = (a - a^dagger)/(i sqrt(2)),
// D(s) = exp(s a^dagger - s* a), S(zeta) = exp(zeta (a^dagger^2 - a^2)/2) so that
// S^dagger a S = cosh(zeta) a + sinh(zeta) a^dagger and the x-variance of S(zeta)|0>
// is e^{2 zeta}/2.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kerrcubic/errors.hpp"
#include "kerrcubic/linalg.hpp"

namespace kerrcubic {

/// Square matrix on the truncated Fock space, optionally declared Hermitian.
class Operator {
 public:
  Operator() = default;
  explicit Operator(Matrix matrix, bool hermitian = false)
      : matrix_(std::move(matrix)), hermitian_(hermitian) {
    require(matrix_.rows() == matrix_.cols(), "Operator: matrix must be square");
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Matrix& matrix() const { return matrix_; }
  bool declared_hermitian() const { return hermitian_; }

  /// max|M - M^dagger| < rel_tol * max|M|.
  bool check_hermitian(double rel_tol = 1e-12) const {
    const double scale = max_abs(matrix_);
    return hermiticity_defect(matrix_) <= rel_tol * std::max(scale, 1e-300);
  }

  Operator adjoint() const { return Operator(matrix_.adjoint(), hermitian_); }

  friend Operator operator*(const Operator& a, const Operator& b) {
    require(a.dim() == b.dim(), "Operator product: dimension mismatch");
    return Operator(a.matrix_ * b.matrix_);
  }
  friend Operator operator+(const Operator& a, const Operator& b) {
    require(a.dim() == b.dim(), "Operator sum: dimension mismatch");
    return Operator(a.matrix_ + b.matrix_, a.hermitian_ && b.hermitian_);
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    require(a.dim() == b.dim(), "Operator difference: dimension mismatch");
    return Operator(a.matrix_ - b.matrix_, a.hermitian_ && b.hermitian_);
  }
  friend Operator operator*(Complex c, const Operator& a) {
    return Operator(c * a.matrix_, a.hermitian_ && c.imag() == 0.0);
  }
  friend Operator operator*(double c, const Operator& a) { return Operator(c * a.matrix_, a.hermitian_); }

 private:
  Matrix matrix_;
  bool hermitian_ = false;
};

/// Normalized Fock-basis amplitude vector.
class PureState {
 public:
  PureState() = default;
  explicit PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
    require(amplitudes_.size() >= 1, "PureState: empty amplitude vector");
    const double norm = amplitudes_.norm();
    if (std::abs(norm - 1.0) > 1e-10) {
      std::ostringstream os;
      os << "PureState: norm " << norm << " differs from 1 by more than 1e-10";
      throw InvalidArgument(os.str());
    }
  }

  static PureState normalized(Vector amplitudes) {
    const double norm = amplitudes.norm();
    require(norm > 0.0 && std::isfinite(norm), "PureState: cannot normalize a zero vector");
    return PureState(amplitudes / norm);
  }

  static PureState fock(int n, int dim) {
    require(n >= 0 && n < dim, "PureState::fock: level outside the truncated space");
    Vector v = Vector::Zero(dim);
    v[n] = 1.0;
    return PureState(std::move(v));
  }

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const Vector& amplitudes() const { return amplitudes_; }

 private:
  Vector amplitudes_;
};

/// Density matrix with unit trace, Hermitian to 1e-10.
class MixedState {
 public:
  MixedState() = default;
  explicit MixedState(Matrix rho) : rho_(std::move(rho)) {
    require(rho_.rows() == rho_.cols() && rho_.rows() >= 1, "MixedState: matrix must be square");
    const Complex tr = rho_.trace();
    if (std::abs(tr - 1.0) > 1e-8) {
      std::ostringstream os;
      os << "MixedState: trace " << tr << " differs from 1 by more than 1e-8";
      throw InvalidArgument(os.str());
    }
    require(hermiticity_defect(rho_) <= 1e-10, "MixedState: density matrix is not Hermitian");
  }

  static MixedState from_pure(const PureState& psi) {
    return MixedState(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  int dim() const { return static_cast<int>(rho_.rows()); }
  const Matrix& matrix() const { return rho_; }

  double min_eigenvalue() const { return hermitian_eigen(rho_).values[0]; }
  double purity() const { return (rho_ * rho_).trace().real(); }

 private:
  Matrix rho_;
};

// ---------------------------------------------------------------------------
// Mode operators

inline Operator annihilation(int n) {
  if (n < 2) throw InvalidArgument("annihilation: dimension must be at least 2, got " + std::to_string(n));
  Matrix a = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return Operator(std::move(a));
}

inline Operator creation(int n) { return annihilation(n).adjoint(); }

inline Operator number_operator(int n) {
  require(n >= 2, "number_operator: dimension must be at least 2");
  Matrix m = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
  return Operator(std::move(m), true);
}

inline Operator identity_operator(int n) { return Operator(Matrix::Identity(n, n), true); }

inline Operator position(int n) {
  const Matrix a = annihilation(n).matrix();
  return Operator((a + a.adjoint()) / std::numbers::sqrt2, true);
}

inline Operator momentum(int n) {
  const Matrix a = annihilation(n).matrix();
  return Operator((a - a.adjoint()) / (kI * std::numbers::sqrt2), true);
}

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

/// Upper-left k x k block.
inline Matrix interior(const Matrix& m, int k) { return m.topLeftCorner(k, k); }

/// Size of the block on which Gaussian unitaries are trusted: N - ceil(4 sqrt(N)).
inline int interior_size(int n) {
  return std::max(1, n - static_cast<int>(std::ceil(4.0 * std::sqrt(static_cast<double>(n)))));
}

// ---------------------------------------------------------------------------
// Exponentials and Gaussian unitaries

/// exp(-i G t) by spectral decomposition; G must be Hermitian.
inline Operator exp_generator(const Operator& generator, double t) {
  if (!generator.check_hermitian(1e-12)) {
    throw InvalidArgument("exp_generator: generator is not Hermitian");
  }
  if (t == 0.0) return identity_operator(generator.dim());
  return Operator(unitary_from_generator(hermitian_eigen(generator.matrix()), t));
}

/// D(s) = exp(s a^dagger - s* a).
inline Operator displacement(Complex s, int n, Diagnostics* diag = nullptr) {
  const Matrix a = annihilation(n).matrix();
  if (diag && std::norm(s) > n / 4.0) {
    std::ostringstream os;
    os << "displacement: |s|^2 = " << std::norm(s) << " exceeds N/4 = " << n / 4.0
       << "; truncation error likely";
    diag->warn(os.str());
  }
  if (s == Complex(0.0)) return identity_operator(n);
  // s a^dagger - s* a = -i G with G = i (s a^dagger - s* a) Hermitian.
  Operator generator(kI * (s * a.adjoint() - std::conj(s) * a), true);
  return exp_generator(generator, 1.0);
}

/// S(zeta) = exp(zeta (a^dagger^2 - a^2) / 2).
inline Operator squeeze(double zeta, int n, Diagnostics* diag = nullptr) {
  const Matrix a = annihilation(n).matrix();
  if (diag && std::exp(2.0 * std::abs(zeta)) > n / 8.0) {
    std::ostringstream os;
    os << "squeeze: e^{2|zeta|} = " << std::exp(2.0 * std::abs(zeta)) << " is large for N = " << n
       << "; truncation error likely";
    diag->warn(os.str());
  }
  if (zeta == 0.0) return identity_operator(n);
  const Matrix a2 = a * a;
  Operator generator(kI * 0.5 * zeta * (a2.adjoint() - a2), true);
  return exp_generator(generator, 1.0);
}

inline PureState apply(const Operator& u, const PureState& psi) {
  require(u.dim() == psi.dim(), "apply: dimension mismatch");
  return PureState::normalized(u.matrix() * psi.amplitudes());
}

inline MixedState apply(const Operator& u, const MixedState& rho) {
  require(u.dim() == rho.dim(), "apply: dimension mismatch");
  Matrix out = u.matrix() * rho.matrix() * u.matrix().adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  return MixedState(out / out.trace().real());
}

// ---------------------------------------------------------------------------
// Measures

/// |<target|out>|^2.
inline double fidelity(const PureState& target, const PureState& out) {
  require(target.dim() == out.dim(), "fidelity: dimension mismatch");
  return std::clamp(std::norm(target.amplitudes().dot(out.amplitudes())), 0.0, 1.0);
}

/// <target|rho|target>.
inline double fidelity(const PureState& target, const MixedState& out) {
  require(target.dim() == out.dim(), "fidelity: dimension mismatch");
  const Vector& t = target.amplitudes();
  return std::clamp(t.dot(out.matrix() * t).real(), 0.0, 1.0);
}

inline Complex expectation(const Operator& op, const PureState& psi) {
  require(op.dim() == psi.dim(), "expectation: dimension mismatch");
  return psi.amplitudes().dot(op.matrix() * psi.amplitudes());
}

inline Complex expectation(const Operator& op, const MixedState& rho) {
  require(op.dim() == rho.dim(), "expectation: dimension mismatch");
  return (op.matrix() * rho.matrix()).trace();
}

template <typename State>
double variance(const Operator& op, const State& state) {
  const Complex mean = expectation(op, state);
  return (expectation(op * op, state) - mean * mean).real();
}

namespace detail {

// Hermite functions phi_0..phi_{dim-1} at x by the scaled three-term recurrence; the running
// scale is kept in log form so high orders neither overflow nor underflow.
inline void hermite_functions(double x, int dim, double* out) {
  constexpr double kBig = 1e150;
  double log_scale = -0.25 * std::log(std::numbers::pi) - 0.5 * x * x;
  double prev = 0.0;
  double cur = 1.0;
  out[0] = std::exp(log_scale);
  for (int n = 0; n + 1 < dim; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * x * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      prev /= kBig;
      log_scale += std::log(kBig);
    }
    out[n + 1] = cur * std::exp(log_scale);
  }
}

// Rows: points, columns: Hermite functions.
inline RealMatrix hermite_matrix(const std::vector<double>& xs, int dim) {
  RealMatrix phi(static_cast<Eigen::Index>(xs.size()), dim);
  std::vector<double> row(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    hermite_functions(xs[i], dim, row.data());
    for (int n = 0; n < dim; ++n) phi(static_cast<Eigen::Index>(i), n) = row[static_cast<std::size_t>(n)];
  }
  return phi;
}

}  // namespace detail

/// Wigner function on the grid xs x ps; result(i, j) = W(xs[i], ps[j]), normalized so that
/// the integral over phase space is 1. Computed from the position wavefunctions of the
/// eigenvectors of rho, W = (1/pi) int psi*(x + y) psi(x - y) exp(2 i p y) dy, by the trapezoid
/// rule on a grid fine enough to resolve the oscillations of the integrand.
inline RealMatrix wigner(const MixedState& state, std::span<const double> xs, std::span<const double> ps) {
  for (double v : xs) require(std::isfinite(v), "wigner: non-finite grid coordinate");
  for (double v : ps) require(std::isfinite(v), "wigner: non-finite grid coordinate");
  const int dim = state.dim();
  const auto eig = hermitian_eigen(state.matrix());
  const double top = std::max(eig.values.maxCoeff(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k)
    if (eig.values[k] > 1e-14 * top || eig.values[k] < -1e-14 * top) keep.push_back(k);
  Matrix vecs(dim, static_cast<Eigen::Index>(keep.size()));
  RealVector weights(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    vecs.col(static_cast<Eigen::Index>(k)) = eig.vectors.col(keep[k]);
    weights[static_cast<Eigen::Index>(k)] = eig.values[keep[k]];
  }

  double pmax = 0.0;
  for (double p : ps) pmax = std::max(pmax, std::abs(p));
  const double kmax = std::sqrt(2.0 * dim + 1.0);
  const double reach = kmax + 8.0;  // Hermite functions below dim vanish beyond this
  const double hy = std::min(0.05, 1.0 / (2.0 * kmax + 2.0 * pmax));

  RealMatrix out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ps.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double ymax = std::max(0.0, reach - std::abs(x));
    const int ny = static_cast<int>(std::ceil(ymax / hy)) + 1;
    std::vector<double> plus(static_cast<std::size_t>(ny)), minus(static_cast<std::size_t>(ny));
    for (int j = 0; j < ny; ++j) {
      plus[static_cast<std::size_t>(j)] = x + j * hy;
      minus[static_cast<std::size_t>(j)] = x - j * hy;
    }
    const Matrix fp = detail::hermite_matrix(plus, dim).cast<Complex>() * vecs;
    const Matrix fm = detail::hermite_matrix(minus, dim).cast<Complex>() * vecs;
    // g(y) = sum_k w_k conj(psi_k(x + y)) psi_k(x - y); g(-y) = conj(g(y)).
    const Vector g = (fp.conjugate().array() * fm.array()).matrix() * weights.cast<Complex>();
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const double p = ps[j];
      double acc = 0.5 * g[0].real();
      for (int k = 1; k < ny; ++k) acc += std::real(g[k] * std::exp(Complex(0.0, 2.0 * p * k * hy)));
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 2.0 * hy * acc / std::numbers::pi;
    }
  }
  return out;
}

inline RealMatrix wigner(const PureState& state, std::span<const double> xs, std::span<const double> ps) {
  return wigner(MixedState::from_pure(state), xs, ps);
}

/// Evenly spaced grid of `count` points spanning [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int count) {
  require(count >= 1, "linspace: count must be positive");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Truncation convergence

struct TruncationReport {
  double value = 0.0;      // scalar at the accepted dimension
  double reference = 0.0;  // scalar at the previous dimension
  int dim = 0;
  bool converged = false;
};

/// Recompute `scalar(N)` at doubled cutoffs until successive values agree to `tol`
/// or `max_dim` is reached.
inline TruncationReport converge_truncation(const std::function<double(int)>& scalar, int dim, double tol,
                                            int max_dim, Diagnostics* diag = nullptr) {
  require(dim >= 2, "converge_truncation: dimension must be at least 2");
  TruncationReport report;
  report.reference = scalar(dim);
  report.dim = dim;
  report.value = report.reference;
  while (2 * report.dim <= max_dim) {
    const int next = 2 * report.dim;
    const double value = scalar(next);
    report.reference = report.value;
    report.value = value;
    report.dim = next;
    if (std::abs(value - report.reference) <= tol) {
      report.converged = true;
      return report;
    }
  }
  if (diag) {
    std::ostringstream os;
    os << "truncation: scalar changed by " << std::abs(report.value - report.reference)
       << " at N = " << report.dim << " (tolerance " << tol << ")";
    diag->warn(os.str());
  }
  return report;
}

}  // namespace kerrcubic
