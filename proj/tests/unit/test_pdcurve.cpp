/*
 * Copyright 2026 The hetfx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>

#include <gtest/gtest.h>

#include "hetfx/common.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/pdcurve.hpp"
#include "hetfx/simlab.hpp"

namespace hetfx::pdcurve {
namespace {

using learners::LearnerSpec;

// Randomized design with tau_x(X) = het(V1, V2); outcomes are noiseless when
// `noise` is zero so linear nuisance fits are exact.
Dataset design(Index n, double rho, std::uint64_t seed, double noise, double c1, double c2) {
  Rng rng = make_rng(seed, 0);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd a(n), y(n);
  for (Index i = 0; i < n; ++i) {
    const double w = standard_normal(rng), z1 = standard_normal(rng), z2 = standard_normal(rng);
    const double v1 = z1, v2 = rho * z1 + std::sqrt(1 - rho * rho) * z2;
    x.row(i) << w, v1, v2;
    a(i) = uniform01(rng) < expit(0.3 * w) ? 1.0 : 0.0;
    y(i) = w + a(i) * (c1 * v1 + c2 * v2) + noise * standard_normal(rng);
  }
  return Dataset({"W", "V1", "V2"}, x, a, y);
}

PdSpecs linear_specs() {
  PdSpecs s;
  s.residual = learners::ResidualDensity::kGaussian;
  s.tauv = LearnerSpec::linear_ridge();
  return s;
}

PdNuisance build(const Dataset& d, std::uint64_t seed) {
  const FoldAssignment folds = assign_folds(d, 2, seed);
  const crossfit::NuisanceFit nf =
      crossfit::fit_nuisances(d, folds, LearnerSpec::logistic(), LearnerSpec::linear_ridge());
  return build_pd_nuisance(d, nf, {"V1", "V2"}, 0, linear_specs(), seed);
}

TEST(Nuisance, IndependenceGivesUnitDensityRatio) {
  const PdNuisance p = build(design(5000, 0.0, 1, 1.0, 1.0, 1.0), 1);
  const Eigen::ArrayXd ratio = p.marginal_density.array() / p.cond_density.array();
  ASSERT_TRUE(ratio.allFinite());
  // Beyond ~3 sd any fitted density carries relative error of order z^2 times
  // the mean/scale error, so the bound is asserted on the bulk of rows.
  const auto close = ((ratio - 1.0).abs() < 0.2).count();
  EXPECT_GE(close, static_cast<Index>(0.99 * 5000));
  std::vector<double> r(ratio.data(), ratio.data() + ratio.size());
  EXPECT_NEAR(quantile(r, 0.5), 1.0, 0.02);
}

TEST(Nuisance, SurfaceIgnoringOtherModifiersEqualsTheAverage) {
  const PdNuisance p = build(design(800, 0.4, 2, 0.0, 1.0, 0.0), 2);
  EXPECT_LT((p.theta - p.tau_v).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((p.tau_v - p.modifiers.col(0)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Nuisance, SimulationAverageHasUnitSlope) {
  const auto s = simlab::simulate({5000, 0.2, 3, false});
  const FoldAssignment folds = assign_folds(s.data, 2, 3);
  const PdNuisance p = simlab::oracle_pd_nuisance(s, folds);
  EXPECT_NEAR(p.tauv_slice(1.0).mean(), 1.0, 0.05);
}

TEST(Nuisance, PredictionsRespectFolds) {
  const Dataset d = design(600, 0.3, 4, 1.0, 1.0, 1.0);
  const PdNuisance p = build(d, 4);
  EXPECT_EQ(p.fold_of, assign_folds(d, 2, 4).fold_of);
  EXPECT_TRUE(p.cond_density.allFinite());
  EXPECT_GT(p.cond_density.minCoeff(), 0.0);
}

TEST(Nuisance, ContractErrors) {
  const Dataset d = design(200, 0.3, 5, 1.0, 1.0, 1.0);
  const FoldAssignment folds = assign_folds(d, 2, 5);
  const crossfit::NuisanceFit fixed = crossfit::fixed_nuisances(
      Eigen::VectorXd::Constant(200, 0.5), Eigen::VectorXd::Zero(200), Eigen::VectorXd::Zero(200),
      folds);
  EXPECT_THROW(build_pd_nuisance(d, fixed, {"V1", "V2"}, 0, linear_specs()), ConfigError);
  const crossfit::NuisanceFit nf =
      crossfit::fit_nuisances(d, folds, LearnerSpec::logistic(), LearnerSpec::linear_ridge());
  EXPECT_THROW(build_pd_nuisance(d, nf, {"V1"}, 0, linear_specs()), ConfigError);
}

PdNuisance toy(Index n) {
  PdNuisance p;
  Rng rng = make_rng(6, 0);
  p.modifiers = Eigen::MatrixXd(n, 2);
  for (Index i = 0; i < n; ++i) p.modifiers.row(i) << standard_normal(rng), standard_normal(rng);
  p.dr_resid = Eigen::VectorXd::Zero(n);
  p.tau_x = p.modifiers.col(0) + p.modifiers.col(1);
  p.tau_v = p.tau_x;
  p.theta = p.modifiers.col(0);
  p.marginal_density = p.modifiers.col(0).unaryExpr([](double v) { return normal_pdf(v); });
  p.cond_density = 0.7 * p.marginal_density;
  return p;
}

TEST(PseudoOutcome, VanishingBracketLeavesTheAverage) {
  const PdNuisance p = toy(50);
  const PdPseudoOutcomes po = pseudo_pd(p);
  EXPECT_LT((po.phi_pd - p.theta).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PseudoOutcome, UnitRatioAddsTheResidual) {
  PdNuisance p = toy(50);
  p.cond_density = p.marginal_density;
  p.dr_resid = p.modifiers.col(1) * 3.0;
  const PdPseudoOutcomes po = pseudo_pd(p);
  EXPECT_LT((po.phi_pd - (p.dr_resid + p.theta)).cwiseAbs().maxCoeff(), 1e-14);
  // Hand evaluation of one row with ratio 2.
  p.cond_density(0) = 0.5 * p.marginal_density(0);
  p.tau_x(0) += 1.0;
  EXPECT_NEAR(pseudo_pd(p).phi_pd(0), (p.dr_resid(0) + 1.0) * 2.0 + p.theta(0), 1e-12);
}

TEST(PseudoOutcome, FloorCountIsMonotone) {
  PdNuisance p = toy(400);
  for (Index i = 0; i < 400; ++i) p.cond_density(i) = p.marginal_density(i) * std::pow(10.0, -4.0 * i / 400.0);
  Index prev = 0;
  for (double floor : {0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5}) {
    const Index c = pseudo_pd(p, floor).floored_rows;
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_GT(prev, 0);
}

TEST(PseudoOutcome, MeanMatchesCateUnderIndependence) {
  const auto s = simlab::simulate({20000, 0.0, 7, false});
  const FoldAssignment folds = assign_folds(s.data, 2, 7);
  const Eigen::VectorXd cate = crossfit::pseudo_cate(s.data, simlab::oracle_nuisances(s, folds)).phi;
  const Eigen::VectorXd pd = pseudo_pd(simlab::oracle_pd_nuisance(s, folds)).phi_pd;
  const double se = std::sqrt(variance(as_span(pd - cate)) / 20000.0);
  EXPECT_LT(std::abs(pd.mean() - cate.mean()), 4 * se + 1e-12);
}

TEST(Curve, HeterogeneityFromTheOtherModifierIsFlat) {
  const double rho = 0.6;
  const Dataset d = design(10000, rho, 8, 1.0, 0.0, 1.0);
  const FoldAssignment folds = assign_folds(d, 2, 8);
  const crossfit::NuisanceFit nf =
      crossfit::fit_nuisances(d, folds, LearnerSpec::logistic(), LearnerSpec::linear_ridge());
  const PdNuisance p = build_pd_nuisance(d, nf, {"V1", "V2"}, 0, linear_specs(), 8);
  bands::CurveOptions opt;
  opt.h = 0.5;
  opt.mode = localpoly::Mode::kPlain;
  opt.grid = {-1.0, 1.0};
  opt.bands = false;
  const bands::CurveEstimate pd = pd_curve(p, opt);
  EXPECT_NEAR((pd.estimate[1] - pd.estimate[0]) / 2, 0.0, 0.1);
  const Eigen::VectorXd phi = crossfit::pseudo_cate(d, nf).phi;
  const bands::CurveEstimate uni = bands::cate_curve(d.column("V1"), phi, opt);
  EXPECT_NEAR((uni.estimate[1] - uni.estimate[0]) / 2, rho, 0.1);
}

TEST(Curve, PointsOutsideSupportAreReported) {
  const auto s = simlab::simulate({800, 0.2, 9, false});
  const PdNuisance p = simlab::oracle_pd_nuisance(s, assign_folds(s.data, 2, 9));
  bands::CurveOptions opt;
  opt.h = 0.4;
  opt.grid = {0.0, 25.0};
  const bands::CurveEstimate ce = pd_curve(p, opt);
  EXPECT_TRUE(std::isfinite(ce.estimate[0]));
  EXPECT_TRUE(std::isnan(ce.estimate[1]));
  EXPECT_FALSE(ce.diagnostics.empty());
  EXPECT_EQ(ce.kind, "pd");
}

TEST(Curve, BandSpreadMatchesMonteCarlo) {
  const Index n = 2000;
  const double h = 0.6;
  std::vector<double> est, se;
  for (int r = 0; r < 200; ++r) {
    const auto s = simlab::simulate({n, 0.2, derive_seed(10, r), false});
    const PdNuisance p = simlab::oracle_pd_nuisance(s, assign_folds(s.data, 2, r));
    bands::CurveOptions opt;
    opt.h = h;
    opt.grid = {0.0};
    opt.band.draws = 500;
    const bands::CurveEstimate ce = pd_curve(p, opt);
    est.push_back(ce.estimate[0]);
    se.push_back(ce.sigma[0] / std::sqrt(n * h));
  }
  const double mc_sd = std::sqrt(variance(est) * 200.0 / 199.0);
  EXPECT_NEAR(mean(se) / mc_sd, 1.0, 0.2);
}

}  // namespace
}  // namespace hetfx::pdcurve
