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

#include "kerrcubic/states.hpp"

namespace kc = kerrcubic;
using kc::Complex;
using kc::Matrix;

namespace {

double variance_p2(const kc::PureState& psi) {
  const int n = psi.dim();
  return kc::expectation(kc::to_matrix(kc::BosonPolynomial::p() * kc::BosonPolynomial::p(), 0.0, n), psi).real();
}

double mean_x2(const kc::PureState& psi) {
  const int n = psi.dim();
  return kc::expectation(kc::to_matrix(kc::BosonPolynomial::x() * kc::BosonPolynomial::x(), 0.0, n), psi).real();
}

kc::GkpParams gkp(kc::GkpLabel label, double delta, kc::GkpConvention conv = kc::GkpConvention::Literal) {
  kc::GkpParams p;
  p.label = label;
  p.delta = delta;
  p.convention = conv;
  return p;
}

}  // namespace

TEST(SqueezedVacuum, UnitWidthIsVacuum) {
  EXPECT_NEAR(kc::fidelity(kc::squeezed_vacuum(1.0, 16), kc::PureState::fock(0, 16)), 1.0, 1e-15);
}

TEST(SqueezedVacuum, Moments) {
  const auto psi = kc::squeezed_vacuum(0.5, 128);
  EXPECT_NEAR(variance_p2(psi), 0.125, 1e-6);
  EXPECT_NEAR(mean_x2(psi), 2.0, 1e-6);
  EXPECT_NEAR(kc::expectation(kc::position(128), psi).real(), 0.0, 1e-12);
  EXPECT_NEAR(kc::expectation(kc::momentum(128), psi).real(), 0.0, 1e-12);
}

TEST(SqueezedVacuum, MatchesSqueezeOperator) {
  const int n = 96;
  const auto direct = kc::apply(kc::squeeze(-std::log(0.6), n), kc::PureState::fock(0, n));
  EXPECT_NEAR(kc::fidelity(direct, kc::squeezed_vacuum(0.6, n)), 1.0, 1e-10);
}

TEST(SqueezedVacuum, WarnsWhenTruncated) {
  kc::Diagnostics diag;
  kc::squeezed_vacuum(0.05, 16, &diag);
  EXPECT_FALSE(diag.clean());
  EXPECT_THROW(kc::squeezed_vacuum(0.0, 16), kc::InvalidArgument);
}

TEST(Gkp, ZPlusIsCentredAndParityEven) {
  for (auto conv : {kc::GkpConvention::Literal, kc::GkpConvention::StandardLattice}) {
    const int n = 128;
    const auto zp = kc::gkp_state(gkp(kc::GkpLabel::ZPlus, 0.5, conv), n);
    EXPECT_NEAR(kc::expectation(kc::position(n), zp).real(), 0.0, 1e-8);
    const auto flipped = kc::apply(kc::parity_operator(n), zp);
    EXPECT_GT(kc::fidelity(zp, flipped), 1.0 - 1e-8);
  }
}

TEST(Gkp, CodeWordOverlapRegression) {
  // |Delta> is squeezed in p while the displacements move x, so neighbouring peaks overlap
  // strongly at Delta = 0.5; the value is frozen from the validated construction.
  const int n = 128;
  const auto zp = kc::gkp_state(gkp(kc::GkpLabel::ZPlus, 0.5), n);
  const auto zm = kc::gkp_state(gkp(kc::GkpLabel::ZMinus, 0.5), n);
  EXPECT_NEAR(std::abs(zp.amplitudes().dot(zm.amplitudes())), 0.942749911654, 1e-9);
}

TEST(Gkp, RawNormNeedsNormalization) {
  EXPECT_NEAR(kc::gkp_raw_norm(gkp(kc::GkpLabel::ZPlus, 0.3), 0), 1.79099741477, 1e-9);
  EXPECT_GT(std::abs(kc::gkp_raw_norm(gkp(kc::GkpLabel::ZPlus, 0.3), 0) - 1.0), 0.1);
  const auto zp = kc::gkp_state(gkp(kc::GkpLabel::ZPlus, 0.3), 256);
  EXPECT_NEAR(zp.amplitudes().norm(), 1.0, 1e-12);
}

TEST(Gkp, SuperpositionsAreNormalized) {
  for (auto label : {kc::GkpLabel::XPlus, kc::GkpLabel::XMinus, kc::GkpLabel::YPlus, kc::GkpLabel::YMinus}) {
    EXPECT_NEAR(kc::gkp_state(gkp(label, 0.4), 128).amplitudes().norm(), 1.0, 1e-12);
  }
}

TEST(Gkp, ConvergesUnderCutoffDoubling) {
  for (auto label : {kc::GkpLabel::ZPlus, kc::GkpLabel::ZMinus, kc::GkpLabel::YPlus}) {
    const auto small = kc::gkp_state(gkp(label, 0.5), 128);
    const auto large = kc::gkp_state(gkp(label, 0.5), 256);
    kc::Vector padded = kc::Vector::Zero(256);
    padded.head(128) = small.amplitudes();
    EXPECT_GT(kc::fidelity(large, kc::PureState::normalized(padded)), 1.0 - 1e-6);
  }
}

TEST(Gkp, ParsesLabels) {
  EXPECT_EQ(kc::parse_gkp_label("y-"), kc::GkpLabel::YMinus);
  EXPECT_THROW(kc::parse_gkp_label("w+"), kc::InvalidArgument);
  EXPECT_EQ(kc::InputSpec::parse("squeezed", 0.5).kind, kc::InputSpec::Kind::Squeezed);
}

TEST(IdealCubicGate, Identities) {
  const int n = 128;
  const int k = kc::interior_size(n);
  EXPECT_EQ((kc::ideal_cubic_gate(0.0, n).matrix() - Matrix::Identity(n, n)).norm(), 0.0);
  const Matrix u = kc::ideal_cubic_gate(0.1, n).matrix();
  const Matrix x = kc::position(n).matrix();
  EXPECT_LT((u * x - x * u).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-8);
  const Matrix inv = u * kc::ideal_cubic_gate(-0.1, n).matrix();
  EXPECT_LT((inv - Matrix::Identity(n, n)).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-9);
  const Matrix twice = u * u - kc::ideal_cubic_gate(0.2, n).matrix();
  EXPECT_LT(twice.topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((u.adjoint() * u - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(NlqVariance, CubicStateOfSqueezedVacuum) {
  const int n = 256;
  const auto out = kc::cubic_phase_state(0.1, kc::squeezed_vacuum(0.5, n), n);
  EXPECT_NEAR(kc::nlq_variance(out, 0.1), 0.125, 1e-5);
  // The spectral gate on the truncated x gets close at this cutoff too.
  const auto spectral = kc::apply(kc::ideal_cubic_gate(0.1, n), kc::squeezed_vacuum(0.5, n));
  EXPECT_NEAR(kc::nlq_variance(spectral, 0.1), 0.125, 1e-4);
  EXPECT_GT(kc::fidelity(out, spectral), 1.0 - 1e-6);
}

TEST(NlqVariance, VacuumAndInvariance) {
  EXPECT_NEAR(kc::nlq_variance(kc::PureState::fock(0, 32), 0.0), 0.5, 1e-12);
  const int n = 256;
  for (double delta : {0.6, 0.8}) {
    const auto psi = kc::squeezed_vacuum(delta, n);
    const double gamma = 0.07;
    const auto out = kc::cubic_phase_state(gamma, psi, n);
    EXPECT_NEAR(kc::nlq_variance(out, gamma), kc::nlq_variance(psi, 0.0), 1e-8);
  }
}
