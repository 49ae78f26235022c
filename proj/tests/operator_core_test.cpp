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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kerrcubic/operator_core.hpp"

namespace kc = kerrcubic;
using kc::Complex;
using kc::Matrix;

namespace {

double interior_unitarity_defect(const kc::Operator& u) {
  const int k = kc::interior_size(u.dim());
  const Matrix uu = (u.matrix().adjoint() * u.matrix()).topLeftCorner(k, k);
  return (uu - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Annihilation, MatrixEntries) {
  const Matrix a = kc::annihilation(3).matrix();
  EXPECT_EQ(a(0, 1), Complex(1.0));
  EXPECT_NEAR(a(1, 2).real(), std::sqrt(2.0), 1e-15);
  int nonzero = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) nonzero += a(i, j) != Complex(0.0);
  EXPECT_EQ(nonzero, 2);
}

TEST(Annihilation, RejectsTinyDimension) { EXPECT_THROW(kc::annihilation(1), kc::InvalidArgument); }

TEST(Annihilation, KillsVacuum) {
  const kc::Vector v = kc::annihilation(8).matrix() * kc::PureState::fock(0, 8).amplitudes();
  EXPECT_EQ(v.norm(), 0.0);
}

TEST(Annihilation, CanonicalCommutatorOnInterior) {
  for (int n : {2, 5, 40}) {
    const Matrix c = kc::commutator(kc::annihilation(n), kc::creation(n)).matrix().topLeftCorner(n - 1, n - 1);
    EXPECT_LT((c - Matrix::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff(), 1e-13) << n;
    const Matrix xp = kc::commutator(kc::position(n), kc::momentum(n)).matrix().topLeftCorner(n - 1, n - 1);
    EXPECT_LT((xp - kc::kI * Matrix::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff(), 1e-13) << n;
  }
}

TEST(Displacement, ZeroIsIdentity) {
  EXPECT_EQ((kc::displacement(0.0, 16).matrix() - Matrix::Identity(16, 16)).norm(), 0.0);
}

TEST(Displacement, CoherentStatePhotonNumber) {
  const auto psi = kc::apply(kc::displacement(2.0, 64), kc::PureState::fock(0, 64));
  EXPECT_NEAR(kc::expectation(kc::number_operator(64), psi).real(), 4.0, 1e-6);
  EXPECT_NEAR(kc::expectation(kc::position(64), psi).real(), std::numbers::sqrt2 * 2.0, 1e-8);
}

TEST(Displacement, InversePairOnInterior) {
  const int n = 64;
  const Matrix prod = kc::displacement(1.0, n).matrix() * kc::displacement(-1.0, n).matrix();
  const int k = kc::interior_size(n);
  EXPECT_LT((prod.topLeftCorner(k, k) - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(interior_unitarity_defect(kc::displacement(Complex(0.7, -1.1), n)), 1e-10);
}

TEST(Displacement, ConjugatesAnnihilation) {
  const int n = 80;
  const Complex s(0.6, 0.4);
  const Matrix d = kc::displacement(s, n).matrix();
  const Matrix lhs = d.adjoint() * kc::annihilation(n).matrix() * d;
  const Matrix rhs = kc::annihilation(n).matrix() + s * Matrix::Identity(n, n);
  const int k = n / 2;
  EXPECT_LT((lhs - rhs).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Displacement, WarnsForLargeAmplitude) {
  kc::Diagnostics diag;
  kc::displacement(5.0, 32, &diag);
  EXPECT_FALSE(diag.clean());
}

TEST(Squeeze, ZeroIsIdentity) { EXPECT_EQ((kc::squeeze(0.0, 10).matrix() - Matrix::Identity(10, 10)).norm(), 0.0); }

TEST(Squeeze, PositionVarianceAndUncertainty) {
  const int n = 128;
  for (double zeta : {-0.9, -0.3, 0.4, 0.8}) {
    const auto psi = kc::apply(kc::squeeze(zeta, n), kc::PureState::fock(0, n));
    const double vx = kc::expectation(kc::position(n) * kc::position(n), psi).real();
    const double vp = kc::expectation(kc::momentum(n) * kc::momentum(n), psi).real();
    EXPECT_NEAR(vx, std::exp(2 * zeta) / 2, 1e-6) << zeta;
    EXPECT_NEAR(vx * vp, 0.25, 1e-6) << zeta;
  }
}

TEST(Squeeze, LogHalfGivesQuarterPositionVariance) {
  // zeta = ln 0.5 squeezes x: <x^2> = 0.125 and <p^2> = 2.
  const int n = 96;
  const auto psi = kc::apply(kc::squeeze(std::log(0.5), n), kc::PureState::fock(0, n));
  EXPECT_NEAR(kc::expectation(kc::position(n) * kc::position(n), psi).real(), 0.125, 1e-8);
  EXPECT_NEAR(kc::expectation(kc::momentum(n) * kc::momentum(n), psi).real(), 2.0, 1e-8);
  // The p-squeezed partner has <p^2> = 0.125.
  const auto q = kc::apply(kc::squeeze(-std::log(0.5), n), kc::PureState::fock(0, n));
  EXPECT_NEAR(kc::expectation(kc::momentum(n) * kc::momentum(n), q).real(), 0.125, 1e-8);
}

TEST(Squeeze, UnitaryOnInterior) { EXPECT_LT(interior_unitarity_defect(kc::squeeze(0.9, 128)), 1e-8); }

TEST(ExpGenerator, TrivialCases) {
  const auto n = kc::number_operator(12);
  EXPECT_EQ((kc::exp_generator(n, 0.0).matrix() - Matrix::Identity(12, 12)).norm(), 0.0);
  EXPECT_LT((kc::exp_generator(n, 2 * std::numbers::pi).matrix() - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(ExpGenerator, GroupProperty) {
  const auto x = kc::position(30);
  const Matrix lhs = kc::exp_generator(x, 0.3).matrix() * kc::exp_generator(x, 0.45).matrix();
  EXPECT_LT((lhs - kc::exp_generator(x, 0.75).matrix()).cwiseAbs().maxCoeff(), 1e-9);
  const Matrix u = kc::exp_generator(x, 1.7).matrix();
  EXPECT_LT((u.adjoint() * u - Matrix::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExpGenerator, RejectsNonHermitian) {
  EXPECT_THROW(kc::exp_generator(kc::annihilation(5), 1.0), kc::InvalidArgument);
}

TEST(Fidelity, BasicValues) {
  const auto zero = kc::PureState::fock(0, 4);
  const auto one = kc::PureState::fock(1, 4);
  EXPECT_DOUBLE_EQ(kc::fidelity(zero, zero), 1.0);
  EXPECT_DOUBLE_EQ(kc::fidelity(zero, one), 0.0);
  Matrix rho = Matrix::Zero(4, 4);
  rho(0, 0) = rho(1, 1) = 0.5;
  EXPECT_DOUBLE_EQ(kc::fidelity(zero, kc::MixedState(rho)), 0.5);
}

TEST(Fidelity, SymmetricAndPhaseInvariant) {
  const auto a = kc::apply(kc::displacement(Complex(0.3, 0.2), 20), kc::PureState::fock(0, 20));
  const auto b = kc::apply(kc::squeeze(0.2, 20), kc::PureState::fock(1, 20));
  EXPECT_NEAR(kc::fidelity(a, b), kc::fidelity(b, a), 1e-15);
  const kc::PureState phased(std::exp(Complex(0.0, 1.234)) * b.amplitudes());
  EXPECT_NEAR(kc::fidelity(a, phased), kc::fidelity(a, b), 1e-15);
}

TEST(Fidelity, DimensionMismatch) {
  EXPECT_THROW(kc::fidelity(kc::PureState::fock(0, 3), kc::PureState::fock(0, 4)), kc::InvalidArgument);
}

TEST(States, ValidateNormAndTrace) {
  kc::Vector v = kc::Vector::Zero(3);
  v[0] = 1.1;
  EXPECT_THROW(kc::PureState{v}, kc::InvalidArgument);
  Matrix rho = Matrix::Identity(3, 3);
  EXPECT_THROW(kc::MixedState{rho}, kc::InvalidArgument);
}

TEST(Expectation, Basics) {
  EXPECT_EQ(kc::expectation(kc::number_operator(6), kc::PureState::fock(0, 6)), Complex(0.0));
  EXPECT_THROW(kc::expectation(kc::number_operator(6), kc::PureState::fock(0, 5)), kc::InvalidArgument);
}

TEST(Wigner, VacuumOriginAndNormalization) {
  const auto vac = kc::PureState::fock(0, 10);
  const double origin[] = {0.0};
  EXPECT_NEAR(kc::wigner(vac, origin, origin)(0, 0), 1.0 / std::numbers::pi, 1e-8);
  const auto grid = kc::linspace(-6.0, 6.0, 241);
  const auto w = kc::wigner(vac, grid, grid);
  EXPECT_NEAR(w.sum() * 0.05 * 0.05, 1.0, 1e-4);
}

TEST(Wigner, FockOneIsNegativeAtOrigin) {
  const double origin[] = {0.0};
  EXPECT_NEAR(kc::wigner(kc::PureState::fock(1, 6), origin, origin)(0, 0), -1.0 / std::numbers::pi, 1e-10);
}

TEST(Wigner, CoherentStateIsShiftedGaussian) {
  const int n = 40;
  const auto psi = kc::apply(kc::displacement(Complex(1.0, 0.5), n), kc::PureState::fock(0, n));
  // Centre at x = sqrt(2) Re s, p = sqrt(2) Im s.
  const double xs[] = {std::numbers::sqrt2, std::numbers::sqrt2 + 0.3};
  const double ps[] = {std::numbers::sqrt2 * 0.5};
  const auto w = kc::wigner(psi, xs, ps);
  EXPECT_NEAR(w(0, 0), 1.0 / std::numbers::pi, 1e-8);
  EXPECT_NEAR(w(1, 0), std::exp(-0.09) / std::numbers::pi, 1e-8);
}

TEST(Wigner, LinearInDensityMatrix) {
  const int n = 12;
  const auto a = kc::MixedState::from_pure(kc::PureState::fock(2, n));
  const auto b = kc::MixedState::from_pure(kc::apply(kc::displacement(0.4, n), kc::PureState::fock(0, n)));
  const kc::MixedState mix(0.3 * a.matrix() + 0.7 * b.matrix());
  const auto grid = kc::linspace(-2.0, 2.0, 9);
  const kc::RealMatrix lhs = kc::wigner(mix, grid, grid);
  const kc::RealMatrix rhs = 0.3 * kc::wigner(a, grid, grid) + 0.7 * kc::wigner(b, grid, grid);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Truncation, DoublingConverges) {
  auto coherent_x = [](int n) {
    const auto psi = kc::apply(kc::displacement(1.5, n), kc::PureState::fock(0, n));
    return kc::expectation(kc::position(n), psi).real();
  };
  const auto report = kc::converge_truncation(coherent_x, 16, 1e-6, 256);
  EXPECT_TRUE(report.converged);
  EXPECT_NEAR(report.value, std::numbers::sqrt2 * 1.5, 1e-6);
}

TEST(Truncation, FlagsNonConvergence) {
  kc::Diagnostics diag;
  const auto report = kc::converge_truncation([](int n) { return 1.0 / n; }, 4, 1e-9, 32, &diag);
  EXPECT_FALSE(report.converged);
  EXPECT_FALSE(diag.clean());
}

TEST(Wigner, AccurateForHighFockLevels) {
  const int n = 200;
  const int level = 150;
  const auto psi = kc::PureState::fock(level, n);
  const std::vector<double> xs = {0.0, 3.0, 10.0, 16.5};
  const std::vector<double> ps = {0.0, 1.7, 6.0};
  const auto w = kc::wigner(psi, xs, ps);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const double r2 = xs[i] * xs[i] + ps[j] * ps[j];
      const double expect = (level % 2 ? -1.0 : 1.0) / std::numbers::pi * std::exp(-r2) * std::laguerre(level, 2.0 * r2);
      EXPECT_NEAR(w(i, j), expect, 1e-10) << xs[i] << " " << ps[j];
    }
  }
}
