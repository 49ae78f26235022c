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
#include <stdexcept>

#include "kerrcubic/experiments.hpp"

namespace kc = kerrcubic;

namespace {

kc::GateConfig lossless(double lambda_db, double alpha, int fock = 64) {
  kc::GateConfig cfg;
  cfg.lambda = kc::lambda_from_db(lambda_db);
  cfg.alpha = alpha;
  cfg.gamma = 0.1;
  cfg.fock = fock;
  return cfg;
}

double cube(double x) { return x * x * x; }

kc::InputSpec squeezed() { return kc::InputSpec::parse("squeezed", 0.5); }

}  // namespace

TEST(Experiments, ParallelMapKeepsOrderAndRethrows) {
  std::vector<int> items(50);
  for (int i = 0; i < 50; ++i) items[i] = i;
  const auto out = kc::parallel_map(items, 4, [](int i) { return i * i; });
  for (int i = 0; i < 50; ++i) EXPECT_EQ(out[i], i * i);
  EXPECT_THROW(kc::parallel_map(items, 3,
                                [](int i) {
                                  if (i == 17) throw std::runtime_error("boom");
                                  return i;
                                }),
               std::runtime_error);
}

TEST(Experiments, FitExactCubic) {
  std::vector<std::pair<double, double>> pts;
  for (double x : {0.5, 1.0, 2.0, 3.0, 7.0}) pts.emplace_back(x, 7.0 * cube(x));
  const auto fit = kc::fit_power_law(pts);
  EXPECT_NEAR(fit.exponent, 3.0, 1e-12);
  EXPECT_NEAR(fit.prefactor, 7.0, 1e-10);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.points, 5u);
}

TEST(Experiments, FitPerturbedInverseQuartic) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 11; ++i) {
    const double x = std::pow(10.0, 0.1 * i);
    pts.emplace_back(x, std::pow(x, -4.0) * (1.0 + (i % 2 == 0 ? 0.01 : -0.01)));
  }
  const auto fit = kc::fit_power_law(pts);
  EXPECT_NEAR(fit.exponent, -4.0, 0.05);
  EXPECT_GE(fit.r_squared, 0.0);
  EXPECT_LE(fit.r_squared, 1.0);
}

TEST(Experiments, FitRejectsBadInput) {
  EXPECT_THROW(kc::fit_power_law({{1.0, 1.0}, {2.0, 4.0}}), kc::InvalidArgument);
  EXPECT_THROW(kc::fit_power_law({{1.0, 1.0}, {2.0, -4.0}, {3.0, 9.0}}), kc::InvalidArgument);
  EXPECT_THROW(kc::fit_power_law({{0.0, 1.0}, {2.0, 4.0}, {3.0, 9.0}}), kc::InvalidArgument);
}

TEST(Experiments, SweepParameterNamesRoundTrip) {
  for (const char* name : {"lambda_db", "alpha", "alpha_coefficient", "dtheta", "ddelta_rel", "dbetax_rel",
                           "chi_over_kappa", "trotter_steps"})
    EXPECT_EQ(kc::to_string(kc::parse_sweep_parameter(name)), name);
  EXPECT_THROW(kc::parse_sweep_parameter("kappa"), kc::InvalidArgument);
}

TEST(Experiments, OptimizerFindsSyntheticMinimum) {
  auto f = [](const kc::GateConfig& c) {
    const double d = std::log(c.alpha / 7.0);
    return 0.1 + d * d;
  };
  const auto best = kc::optimize_alpha(kc::GateConfig{}, f, 0.5, 500.0);
  EXPECT_TRUE(best.unimodal);
  EXPECT_NEAR(best.alpha / 7.0, 1.0, 2e-3);
  EXPECT_NEAR(best.error, 0.1, 1e-6);
}

TEST(Experiments, OptimizerFallsBackOnMultimodalScan) {
  auto f = [](const kc::GateConfig& c) {
    const double l = std::log(c.alpha);
    return 2.0 + std::cos(3.0 * l) + 0.05 * l * l;
  };
  const auto best = kc::optimize_alpha(kc::GateConfig{}, f, 0.01, 100.0);
  EXPECT_FALSE(best.unimodal);
  EXPECT_FALSE(best.diagnostics.clean());
  // The dense grid contains the global basin near log alpha = +-pi/3.
  EXPECT_LT(best.error, 1.1);
}

TEST(Experiments, OptimizerDegenerateBracket) {
  const auto cfg = lossless(10.0, 1.0);
  const double alpha = 2.0 * cube(cfg.lambda);
  const auto best = kc::optimize_alpha(cfg, squeezed(), alpha, alpha);
  EXPECT_EQ(best.alpha, alpha);
  kc::GateConfig at = cfg;
  at.alpha = alpha;
  EXPECT_EQ(best.error, kc::cubic_gate(at, squeezed().build(cfg.fock)).error);
  EXPECT_THROW(kc::optimize_alpha(cfg, squeezed(), 2.0, 1.0), kc::InvalidArgument);
}

TEST(Experiments, OptimumIsLocalMinimum) {
  const auto cfg = lossless(10.0, 1.0);
  const double l3 = cube(cfg.lambda);
  const auto best = kc::optimize_alpha(cfg, squeezed(), 0.5 * l3, 20.0 * l3);
  const auto error_of = kc::gate_error_fn(squeezed());
  for (double f : {0.95, 1.05}) {
    kc::GateConfig c = cfg;
    c.alpha = best.alpha * f;
    EXPECT_GE(error_of(c), best.error - 1e-9);
  }
  EXPECT_GT(best.alpha / l3, 1.0);
  EXPECT_LT(best.alpha / l3, 4.0);
}

TEST(Experiments, SinglePointSweepMatchesGate) {
  kc::SweepSpec spec;
  spec.base = lossless(10.0, 1.0);
  spec.input = squeezed();
  spec.values = {12.0};
  spec.alpha_mode = kc::AlphaMode::Coefficient;
  spec.alpha_coefficient = 2.0;
  const auto rows = kc::lambda_sweep(spec);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].ok) << rows[0].message;
  const auto cfg = lossless(12.0, 2.0 * cube(kc::lambda_from_db(12.0)));
  EXPECT_EQ(rows[0].error, kc::cubic_gate(cfg, squeezed().build(cfg.fock)).error);
  EXPECT_DOUBLE_EQ(rows[0].alpha, cfg.alpha);
  EXPECT_DOUBLE_EQ(rows[0].alpha_coefficient, 2.0);
}

TEST(Experiments, ParallelSweepMatchesSerialBitwise) {
  kc::SweepSpec spec;
  spec.base = lossless(10.0, 1.0, 48);
  spec.input = kc::InputSpec::parse("z+", 0.5);
  spec.values = {8.0, 10.0, 12.0, 14.0};
  spec.alpha_mode = kc::AlphaMode::Coefficient;
  const auto serial = kc::lambda_sweep(spec);
  spec.workers = 3;
  const auto parallel = kc::lambda_sweep(spec);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].value, parallel[i].value);
    EXPECT_EQ(serial[i].alpha, parallel[i].alpha);
    EXPECT_EQ(serial[i].error, parallel[i].error);
  }
}

TEST(Experiments, SweepRecordsFailedRowsAndContinues) {
  kc::SweepSpec spec;
  spec.base = lossless(10.0, 100.0, 48);
  spec.input = squeezed();
  spec.parameter = kc::SweepParameter::ChiOverKappa;
  spec.alpha_mode = kc::AlphaMode::Fixed;
  spec.values = {-1.0, 1e-3};
  const auto rows = kc::run_sweep(spec);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_FALSE(rows[0].message.empty());
  EXPECT_TRUE(rows[1].ok) << rows[1].message;
}

TEST(Experiments, WarmStartedSweepIsDeterministic) {
  kc::SweepSpec spec;
  spec.base = lossless(10.0, 1.0, 48);
  spec.input = squeezed();
  spec.values = {10.0, 12.0};
  const auto a = kc::lambda_sweep(spec);
  const auto b = kc::lambda_sweep(spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a[i].ok) << a[i].message;
    EXPECT_EQ(a[i].alpha, b[i].alpha);
    EXPECT_EQ(a[i].error, b[i].error);
  }
  EXPECT_LT(a[1].error, a[0].error);
}

TEST(Experiments, ZeroPhaseNoiseRecoversNoiselessError) {
  kc::NoiseSweepSpec spec;
  spec.base = lossless(10.0, 1.0, 48);
  spec.input = squeezed();
  spec.alpha_mode = kc::AlphaMode::Coefficient;
  spec.noise = kc::SweepParameter::Dtheta;
  spec.noise_values = {0.0, 1e-3};
  spec.lambda_db_values = {10.0};
  const auto rows = kc::noise_sweep(spec);
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_TRUE(rows[0].ok && rows[1].ok);
  EXPECT_EQ(rows[0].error, rows[0].noiseless_error);
  EXPECT_GT(rows[1].excess(), 0.0);
  spec.noise = kc::SweepParameter::Alpha;
  EXPECT_THROW(kc::noise_sweep(spec), kc::InvalidArgument);
}

TEST(Experiments, NelderMeadMinimizesQuadratic) {
  auto f = [](const std::vector<double>& v) {
    return (v[0] - 1.0) * (v[0] - 1.0) + 4.0 * (v[1] + 2.0) * (v[1] + 2.0) + 1.0;
  };
  const auto x = kc::detail::nelder_mead(f, {0.0, 0.0}, {0.5, 0.5}, 2000, 1e-16);
  EXPECT_NEAR(x[0], 1.0, 1e-5);
  EXPECT_NEAR(x[1], -2.0, 1e-5);
}

TEST(Experiments, CubicStateIsNonClassical) {
  kc::GateConfig cfg = lossless(12.0, 0.0);
  cfg.alpha = 2.1 * cube(cfg.lambda);
  kc::StateGenOptions opts;
  opts.x_points = 33;
  opts.p_points = 33;
  const auto res = kc::generate_cubic_state(cfg, opts);
  EXPECT_GT(res.fidelity, 0.99);
  EXPECT_EQ(res.fidelity, res.raw_fidelity);
  EXPECT_LT(res.wigner_min, -0.01);
  EXPECT_EQ(res.wigner.rows(), 33);
  EXPECT_NEAR(res.nlq_variance, 0.125, 0.01);
}

TEST(Experiments, CubicStateInfidelityFallsWithSqueezing) {
  std::vector<std::pair<double, double>> pts;
  for (double db : {14.0, 16.0, 18.0}) {
    kc::GateConfig cfg = lossless(db, 0.0);
    const double l3 = cube(cfg.lambda);
    const auto best = kc::optimize_alpha(cfg, squeezed(), 1.0 * l3, 4.0 * l3);
    pts.emplace_back(cfg.lambda, best.error);
  }
  EXPECT_NEAR(kc::fit_power_law(pts).exponent, -4.0, 0.3);
}

TEST(Experiments, CorrectionNeverLowersFidelity) {
  kc::GateConfig cfg = lossless(10.0, 0.0, 48);
  cfg.alpha = 2.0 * cube(cfg.lambda);
  cfg.kappa = 1e-3 * cfg.chi;
  kc::StateGenOptions opts;
  opts.correct = true;
  opts.x_points = 9;
  opts.p_points = 9;
  const auto res = kc::generate_cubic_state(cfg, opts);
  EXPECT_GE(res.fidelity, res.raw_fidelity);
  EXPECT_LE(res.fidelity, 1.0 + 1e-12);
}
