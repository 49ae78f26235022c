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
#include <random>

#include "kerrcubic/algebra.hpp"

namespace kc = kerrcubic;
using kc::AlphaPoly;
using kc::BosonPolynomial;
using kc::Complex;
using kc::Matrix;

namespace {

BosonPolynomial random_polynomial(std::mt19937& rng, int max_degree) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BosonPolynomial p;
  for (int m = 0; m <= max_degree; ++m)
    for (int n = 0; m + n <= max_degree; ++n) p = p + BosonPolynomial::monomial(m, n, Complex(u(rng), u(rng)));
  return p;
}

double interior_diff(const Matrix& a, const Matrix& b, int k) {
  return (a - b).topLeftCorner(k, k).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(AlphaPoly, ArithmeticAndPruning) {
  const AlphaPoly p({1.0, 2.0});
  const AlphaPoly q({-1.0, -2.0});
  EXPECT_TRUE((p + q).is_zero());
  EXPECT_EQ((p * p).coefficients(), (std::vector<Complex>{1.0, 4.0, 4.0}));
  EXPECT_EQ(p.evaluate(3.0), Complex(7.0));
  EXPECT_EQ(AlphaPoly::monomial(2, 5.0).degree(), 2);
}

TEST(Multiply, CanonicalCommutator) {
  const auto prod = kc::multiply(BosonPolynomial::a(), BosonPolynomial::adag());
  EXPECT_EQ(prod, BosonPolynomial(BosonPolynomial::Terms{{{1, 1}, 1.0}, {{0, 0}, 1.0}}));
}

TEST(Multiply, RookNumbers) {
  const auto prod = kc::multiply(BosonPolynomial::monomial(0, 2), BosonPolynomial::monomial(2, 0));
  EXPECT_EQ(prod, BosonPolynomial(BosonPolynomial::Terms{{{2, 2}, 1.0}, {{1, 1}, 4.0}, {{0, 0}, 2.0}}));
}

TEST(Multiply, AgreesWithMatrixProduct) {
  std::mt19937 rng(7);
  const int n = 40;
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_polynomial(rng, 3);
    const auto q = random_polynomial(rng, 3);
    const Matrix lhs = kc::to_matrix(kc::multiply(p, q), 0.0, n).matrix();
    const Matrix rhs = kc::to_matrix(p, 0.0, n).matrix() * kc::to_matrix(q, 0.0, n).matrix();
    EXPECT_LT(interior_diff(lhs, rhs, n - 3), 1e-9);
  }
}

TEST(Multiply, PreservesHermiticity) {
  std::mt19937 rng(11);
  auto p = random_polynomial(rng, 3);
  p = p + p.adjoint();
  auto q = random_polynomial(rng, 2);
  q = q + q.adjoint();
  const auto sym = kc::multiply(p, q) + kc::multiply(q, p);
  EXPECT_TRUE(sym.is_hermitian_at(0.0));
}

TEST(GaussianFrame, IdentityFrame) {
  const auto r = kc::substitute_gaussian_frame(BosonPolynomial::a(), 1.0);
  EXPECT_EQ(r.coefficient(0, 1), AlphaPoly(1.0));
  EXPECT_EQ(r.coefficient(0, 0), AlphaPoly::monomial(1));
  std::mt19937 rng(3);
  const auto p = random_polynomial(rng, 3);
  EXPECT_EQ(kc::substitute_gaussian_frame(p, 1.0).evaluate(0.0), p);
}

TEST(GaussianFrame, NumberOperatorConstant) {
  const double lambda = 2.7;
  const double s = std::sinh(std::log(lambda));
  const auto c = kc::substitute_gaussian_frame(BosonPolynomial::monomial(1, 1), lambda).coefficient(0, 0);
  ASSERT_EQ(c.degree(), 2);
  EXPECT_NEAR(c.coeff(0).real(), s * s, 1e-14);
  EXPECT_EQ(c.coeff(1), Complex(0.0));
  EXPECT_NEAR(c.coeff(2).real(), 1.0, 1e-15);
}

TEST(GaussianFrame, MatchesExplicitConjugation) {
  const int n = 60;
  const int big = 3 * n;  // conjugate in a larger space so truncation of D and S does not leak in
  const double lambda = 1.6;
  const double alpha = 2.0;
  const Matrix sd = kc::displacement(alpha, big).matrix() * kc::squeeze(std::log(lambda), big).matrix();
  const Matrix direct = (sd.adjoint() * kc::number_operator(big).matrix() * sd).topLeftCorner(n, n);
  const Matrix algebra = kc::to_matrix(kc::substitute_gaussian_frame(BosonPolynomial::monomial(1, 1), lambda), alpha, n).matrix();
  EXPECT_LT(interior_diff(direct, algebra, 20), 1e-7);
}

TEST(GaussianFrame, ExponentialsAgreeWithConjugatedPropagator) {
  const int n = 120;
  const int big = 320;
  const double lambda = 1.5;
  const double alpha = 1.2;
  const double t = 0.3;
  const auto h = kc::driven_kerr(1.0, AlphaPoly(0.4), AlphaPoly(0.2));
  const Matrix sd = kc::displacement(alpha, big).matrix() * kc::squeeze(std::log(lambda), big).matrix();
  const Matrix direct =
      (sd.adjoint() * kc::exp_generator(kc::to_matrix(h, 0.0, big), t).matrix() * sd).topLeftCorner(n, n);
  const auto heff = kc::to_matrix(kc::substitute_gaussian_frame(h, lambda), alpha, n);
  const Matrix algebra = kc::exp_generator(heff, t).matrix();
  const int k = 5;
  EXPECT_LT((direct - algebra).topLeftCorner(k, k).norm(), 1e-5);
}

TEST(DrivenKerr, Structure) {
  const auto pure = kc::driven_kerr(1.0, AlphaPoly(), AlphaPoly());
  EXPECT_EQ(pure, BosonPolynomial::monomial(2, 2, -0.5));
  const auto h = kc::driven_kerr(1.0, AlphaPoly({0.0, 0.3}), AlphaPoly({0.0, 0.0, 0.7}));
  EXPECT_TRUE(h.is_hermitian_at(2.0));
  EXPECT_THROW(kc::driven_kerr(0.0, AlphaPoly(), AlphaPoly()), kc::InvalidArgument);
}

TEST(DrivenKerr, MatrixMatchesDirectConstruction) {
  const int n = 32;
  const Matrix a = kc::annihilation(n).matrix();
  const Matrix ad = a.adjoint();
  const Matrix direct = -0.5 * ad * ad * a * a + 0.3 * ad * a + 0.7 * (a + ad);
  const Matrix poly = kc::to_matrix(kc::driven_kerr(1.0, AlphaPoly(0.3), AlphaPoly(0.7)), 0.0, n).matrix();
  // The direct product loses the top level of a^dagger^2 a^2; compare away from the edge.
  EXPECT_LT(interior_diff(direct, poly, n - 2), 1e-12);
}

TEST(CubicParameters, FormulaValues) {
  const auto p = kc::cubic_parameters(1.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(p.tau, std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(p.mu, 1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(p.delta.evaluate(1.0), Complex(2.0));
  EXPECT_EQ(p.beta.evaluate(1.0), Complex(-2.0));
  const auto fig4 = kc::cubic_parameters(1.0, std::pow(10.0, 0.75), 1.4e4, 0.1);
  EXPECT_NEAR(fig4.tau, 5.681e-8, 1e-11);
}

TEST(CubicParameters, MuTauIsGamma) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double gamma = u(rng) / 10;
    const auto p = kc::cubic_parameters(u(rng), u(rng), 100 * u(rng), gamma);
    EXPECT_EQ(p.mu * p.tau, gamma);
  }
}

TEST(CubicParameters, RejectsNonPositive) {
  EXPECT_THROW(kc::cubic_parameters(1.0, -1.0, 1.0, 1.0), kc::InvalidArgument);
  EXPECT_THROW(kc::cubic_parameters(1.0, 1.0, 0.0, 1.0), kc::InvalidArgument);
}

TEST(EffectiveCubic, CounterTermsCancelExactly) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (int i = 0; i < 10; ++i) {
    const auto form = kc::weyl_form(kc::effective_cubic_hamiltonian(u(rng), u(rng), 10.0, 0.1));
    EXPECT_TRUE(kc::quadrature_coefficient(form, 1, 0).is_zero());
    EXPECT_TRUE(kc::quadrature_coefficient(form, 2, 0).is_zero());
  }
}

TEST(EffectiveCubic, CubicCoefficientIsMinusMu) {
  const auto form = kc::weyl_form(kc::effective_cubic_hamiltonian(1.0, 2.0, 8.0, 0.1));
  const Complex c = kc::quadrature_coefficient(form, 3, 0).evaluate(8.0);
  EXPECT_NEAR(c.real(), -8.0 * 8.0 / std::numbers::sqrt2, 1e-12);
  EXPECT_NEAR(c.real(), -45.254833995939045, 1e-12);
  EXPECT_EQ(c.imag(), 0.0);
  EXPECT_NEAR(kc::quadrature_coefficient(form, 4, 0).evaluate(8.0).real(), -16.0 / 8.0, 1e-12);
}

TEST(EffectiveCubic, MatrixIsHermitian) {
  const auto m = kc::to_matrix(kc::effective_cubic_hamiltonian(1.0, 2.0, 8.0, 0.1), 8.0, 64);
  EXPECT_TRUE(m.declared_hermitian());
  EXPECT_LT(kc::hermiticity_defect(m.matrix()), 1e-12 * kc::max_abs(m.matrix()));
}

TEST(ToMatrix, NumberOperatorAndDegreeCheck) {
  const auto m = kc::to_matrix(BosonPolynomial::monomial(1, 1), 0.0, 7).matrix();
  for (int i = 0; i < 7; ++i) EXPECT_EQ(m(i, i), Complex(i));
  EXPECT_THROW(kc::to_matrix(BosonPolynomial::monomial(4, 4), 0.0, 8), kc::InvalidArgument);
}

TEST(WeylForm, KnownSymbols) {
  // a^dagger a = (x^2 + p^2)/2 - 1/2.
  const auto form = kc::weyl_form(BosonPolynomial::monomial(1, 1));
  EXPECT_NEAR(kc::quadrature_coefficient(form, 2, 0).evaluate(0).real(), 0.5, 1e-15);
  EXPECT_NEAR(kc::quadrature_coefficient(form, 0, 2).evaluate(0).real(), 0.5, 1e-15);
  EXPECT_NEAR(kc::quadrature_coefficient(form, 0, 0).evaluate(0).real(), -0.5, 1e-15);
  EXPECT_TRUE(kc::quadrature_coefficient(form, 1, 1).is_zero());
  // x p + p x has symbol 2 x p.
  const auto x = BosonPolynomial::x();
  const auto p = BosonPolynomial::p();
  const auto xp = kc::weyl_form(x * p + p * x);
  EXPECT_NEAR(kc::quadrature_coefficient(xp, 1, 1).evaluate(0).real(), 2.0, 1e-15);
  EXPECT_EQ(xp.size(), 1u);
}

#include "reference_forms.hpp"

TEST(EffectiveKerr, MatchesClosedFormAtRandomParameters) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int i = 0; i < 5; ++i) {
    const double chi = u(rng), lambda = u(rng), delta = u(rng) - 1.5, beta = u(rng) - 1.5;
    const auto ours = kc::weyl_form(kc::effective_hamiltonian(chi, lambda, AlphaPoly(delta), AlphaPoly(beta)));
    const auto ref = kc::weyl_form(kc::testing::closed_form_effective_kerr(chi, lambda, delta, beta));
    // Coefficients such as lambda^-4 p^4 emerge from cancellations among lambda^4-sized terms,
    // so the attainable relative accuracy is eps * max(lambda, 1/lambda)^8.
    const double conditioning = std::pow(std::max(lambda, 1.0 / lambda), 8);
    EXPECT_LT(kc::testing::symbol_mismatch(ours, ref), 64 * 2.22e-16 * conditioning);
  }
}
