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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "kerrcubic/errors.hpp"

#ifdef KERRCUBIC_USE_LAPACKE
#include <lapacke.h>
#endif

namespace kerrcubic {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
struct HermitianEigen {
  RealVector values;
  Matrix vectors;

  /// V f(D) V^dagger for a scalar function f of the eigenvalues.
  template <typename F>
  Matrix apply(F&& f) const {
    Vector diag(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) diag[i] = f(values[i]);
    return vectors * diag.asDiagonal() * vectors.adjoint();
  }

  /// V f(D) V^dagger v without forming the full matrix.
  template <typename F>
  Vector apply_to(F&& f, const Vector& v) const {
    Vector w = vectors.adjoint() * v;
    for (Eigen::Index i = 0; i < values.size(); ++i) w[i] *= f(values[i]);
    return vectors * w;
  }
};

/// Largest absolute entry of M - M^dagger.
inline double hermiticity_defect(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline HermitianEigen hermitian_eigen(const Matrix& m) {
  require(m.rows() == m.cols(), "hermitian_eigen: matrix must be square");
  const Eigen::Index n = m.rows();
  HermitianEigen out;
  if (n == 0) return out;
  // Only the upper triangle is referenced; symmetrize so both backends agree.
  Matrix a = 0.5 * (m + m.adjoint());
#ifdef KERRCUBIC_USE_LAPACKE
  out.values.resize(n);
  const lapack_int info =
      LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n),
                     reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(n),
                     out.values.data());
  if (info != 0) throw NumericalError("zheevd failed with info " + std::to_string(info));
  out.vectors = std::move(a);
#else
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
  out.values = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
#endif
  return out;
}

/// exp(-i t G) for Hermitian G.
inline Matrix unitary_from_generator(const HermitianEigen& eig, double t) {
  return eig.apply([t](double w) { return std::exp(Complex(0.0, -w * t)); });
}

/// Hermitian matrix stored by its diagonal and `width` upper diagonals.
class BandedHermitian {
 public:
  BandedHermitian() = default;

  /// Band of a dense Hermitian matrix; entries outside the band must vanish.
  static BandedHermitian from_dense(const Matrix& m) {
    BandedHermitian b;
    b.n_ = static_cast<int>(m.rows());
    for (int d = b.n_ - 1; d > 0; --d) {
      if (m.diagonal(d).cwiseAbs().maxCoeff() > 0.0) {
        b.width_ = d;
        break;
      }
    }
    b.bands_.resize(static_cast<std::size_t>(b.width_) + 1);
    for (int d = 0; d <= b.width_; ++d) b.bands_[static_cast<std::size_t>(d)] = m.diagonal(d);
    b.bands_[0] = b.bands_[0].real().cast<Complex>();
    return b;
  }

  int dim() const { return n_; }
  int width() const { return width_; }

  void multiply(const Vector& x, Vector& y) const {
    y = bands_[0].cwiseProduct(x);
    for (int d = 1; d <= width_; ++d) {
      const Vector& u = bands_[static_cast<std::size_t>(d)];
      const int len = n_ - d;
      y.head(len) += u.cwiseProduct(x.segment(d, len));
      y.segment(d, len) += u.conjugate().cwiseProduct(x.head(len));
    }
  }

  /// Gershgorin bounds of the spectrum.
  std::pair<double, double> spectral_bounds() const {
    Eigen::ArrayXd radius = Eigen::ArrayXd::Zero(n_);
    for (int d = 1; d <= width_; ++d) {
      const Eigen::ArrayXd a = bands_[static_cast<std::size_t>(d)].cwiseAbs().array();
      radius.head(n_ - d) += a;
      radius.segment(d, n_ - d) += a;
    }
    const Eigen::ArrayXd center = bands_[0].real().array();
    return {(center - radius).minCoeff(), (center + radius).maxCoeff()};
  }

 private:
  int n_ = 0;
  int width_ = 0;
  std::vector<Vector> bands_;
};

namespace detail {

// J_0(z) .. J_K(z) by Miller's backward recurrence, normalized with J_0 + 2 sum J_2k = 1.
inline std::vector<double> bessel_j_sequence(double z, int count) {
  const int start = count + 32 + static_cast<int>(std::sqrt(40.0 * count));
  std::vector<double> j(static_cast<std::size_t>(start) + 2, 0.0);
  j[static_cast<std::size_t>(start)] = 1e-300;
  for (int k = start; k > 0; --k) {
    j[static_cast<std::size_t>(k) - 1] = 2.0 * k / z * j[static_cast<std::size_t>(k)] - j[static_cast<std::size_t>(k) + 1];
    if (std::abs(j[static_cast<std::size_t>(k) - 1]) > 1e250) {
      for (int m = k - 1; m <= start; ++m) j[static_cast<std::size_t>(m)] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * j[static_cast<std::size_t>(k)];
  j.resize(static_cast<std::size_t>(count));
  for (double& v : j) v /= norm;
  return j;
}

}  // namespace detail

/// exp(-i t H) psi by a Chebyshev expansion, accurate to about machine precision.
inline Vector chebyshev_propagate(const BandedHermitian& h, double t, const Vector& psi) {
  const auto [lo, hi] = h.spectral_bounds();
  const double center = 0.5 * (hi + lo);
  const double half = std::max(0.5 * (hi - lo), 1e-300);
  const double z = std::abs(t) * half;
  const Complex phase = std::exp(Complex(0.0, -t * center));
  if (z < 1e-14) return phase * psi;
  const int count = static_cast<int>(std::ceil(z + 10.0 * std::cbrt(z) + 30.0));
  const std::vector<double> bessel = detail::bessel_j_sequence(z, count);
  // exp(-i t (c + r y)) = e^{-i t c} sum_k (2 - delta_k0) (-i sgn t)^k J_k(|t| r) T_k(y)
  const Complex step = t >= 0.0 ? Complex(0.0, -1.0) : Complex(0.0, 1.0);
  auto scaled = [&](const Vector& x, Vector& y) {
    h.multiply(x, y);
    y = (y - center * x) / half;
  };
  Vector prev = psi;
  Vector cur(psi.size());
  scaled(psi, cur);
  Vector out = bessel[0] * psi + 2.0 * step * bessel[1] * cur;
  Complex coef = step;
  Vector next(psi.size());
  for (int k = 2; k < count; ++k) {
    scaled(cur, next);
    next = 2.0 * next - prev;
    coef *= step;
    out += (2.0 * bessel[static_cast<std::size_t>(k)]) * coef * next;
    prev.swap(cur);
    cur.swap(next);
    if (k > z && std::abs(bessel[static_cast<std::size_t>(k)]) < 1e-18) break;
  }
  return phase * out;
}

}  // namespace kerrcubic
