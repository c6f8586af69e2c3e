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
#include <numeric>

#include <gtest/gtest.h>

#include "hetfx/common.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/simlab.hpp"

namespace hetfx::crossfit {
namespace {

using learners::LearnerSpec;

Dataset randomized(Index n, std::uint64_t seed, bool y_equals_a) {
  Rng rng = make_rng(seed, 0);
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd a(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = standard_normal(rng);
    x(i, 1) = standard_normal(rng);
    a(i) = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    y(i) = y_equals_a ? a(i) : x(i, 0) + a(i) * x(i, 1) + standard_normal(rng);
  }
  return Dataset({"x1", "x2"}, x, a, y);
}

TEST(Nuisances, SeparableMeansAreRecovered) {
  const Dataset d = randomized(400, 1, true);
  const NuisanceFit nf = fit_nuisances(d, assign_folds(d, 2, 1), LearnerSpec::logistic(),
                                       LearnerSpec::linear_ridge());
  EXPECT_LT((nf.mu1_hat.array() - 1.0).abs().maxCoeff(), 1e-8);
  EXPECT_LT(nf.mu0_hat.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Nuisances, MissingArmNamesTheFold) {
  Dataset d = randomized(100, 2, false);
  const Dataset treated({"x1", "x2"}, d.x(), Eigen::VectorXd::Ones(100), d.y());
  try {
    fit_nuisances(treated, assign_folds(treated, 2, 1), LearnerSpec::logistic(),
                  LearnerSpec::linear_ridge());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("fold"), std::string::npos) << e.what();
  }
}

TEST(Nuisances, ConstantPropensityAndClipping) {
  const Dataset d = randomized(2000, 3, false);
  const NuisanceFit nf = fit_nuisances(d, assign_folds(d, 5, 3), LearnerSpec::logistic(),
                                       LearnerSpec::linear_ridge());
  EXPECT_GE(nf.pi_hat.mean(), 0.45);
  EXPECT_LE(nf.pi_hat.mean(), 0.55);
  EXPECT_GE(nf.pi_hat.minCoeff(), 0.01);
  EXPECT_LE(nf.pi_hat.maxCoeff(), 0.99);
  EXPECT_TRUE(nf.mu0_hat.allFinite() && nf.mu1_hat.allFinite());
}

TEST(Nuisances, PredictionsDependOnlyOnOtherFolds) {
  const Dataset d = randomized(300, 4, false);
  const FoldAssignment folds = assign_folds(d, 3, 4);
  const NuisanceFit base = fit_nuisances(d, folds, LearnerSpec::logistic(),
                                         LearnerSpec::regression_tree(3, 5));
  // Permuting the outcomes inside fold 0 must leave fold 0's predictions alone.
  Eigen::VectorXd y = d.y();
  const auto rows = folds.rows_in(0);
  for (std::size_t i = 0; i < rows.size(); ++i) y(rows[i]) = d.y()(rows[(i + 7) % rows.size()]);
  const Dataset perturbed({"x1", "x2"}, d.x(), d.a(), y);
  const NuisanceFit again = fit_nuisances(perturbed, folds, LearnerSpec::logistic(),
                                          LearnerSpec::regression_tree(3, 5));
  for (Index r : rows) {
    EXPECT_EQ(base.mu0_hat(r), again.mu0_hat(r));
    EXPECT_EQ(base.mu1_hat(r), again.mu1_hat(r));
    EXPECT_EQ(base.pi_hat(r), again.pi_hat(r));
  }
}

TEST(Ate, IdentityCase) {
  const Dataset d = randomized(200, 5, true);
  const FoldAssignment folds = assign_folds(d, 2, 5);
  const NuisanceFit nf = fixed_nuisances(Eigen::VectorXd::Constant(200, 0.5),
                                         Eigen::VectorXd::Zero(200),
                                         Eigen::VectorXd::Ones(200), folds);
  const AteResult r = estimate_ate(d, nf, 0.05);
  EXPECT_DOUBLE_EQ(r.ate, 1.0);
  EXPECT_LE(r.lo, r.ate);
  EXPECT_GE(r.hi, r.ate);
}

TEST(Ate, ConstantOutcomeDegeneratesToAPoint) {
  const Dataset base = randomized(200, 6, false);
  const Dataset d({"x1", "x2"}, base.x(), base.a(), Eigen::VectorXd::Constant(200, 2.0));
  const NuisanceFit nf = fit_nuisances(d, assign_folds(d, 2, 6), LearnerSpec::logistic(),
                                       LearnerSpec::linear_ridge());
  const AteResult r = estimate_ate(d, nf, 0.05);
  EXPECT_NEAR(r.ate, 0.0, 1e-12);
  EXPECT_NEAR(r.sigma_hat, 0.0, 1e-12);
  EXPECT_NEAR(r.hi - r.lo, 0.0, 1e-10);
}

TEST(Ate, MeanOfPseudoOutcomesMatchesFoldAverage) {
  // With equal fold sizes the fold average equals the pooled mean of phi.
  const Dataset d = randomized(600, 7, false);
  const NuisanceFit nf = fit_nuisances(d, assign_folds(d, 3, 7), LearnerSpec::logistic(),
                                       LearnerSpec::linear_ridge());
  const AteResult r = estimate_ate(d, nf, 0.05);
  EXPECT_NEAR(pseudo_cate(d, nf).phi.mean(), r.ate, 1e-12);
}

TEST(Ate, OracleNuisancesCoverZero) {
  int inside = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto s = simlab::simulate({5000, 0.2, derive_seed(11, r), false});
    const FoldAssignment folds = assign_folds(s.data, 2, r);
    const AteResult a = estimate_ate(s.data, simlab::oracle_nuisances(s, folds), 0.05);
    if (std::abs(a.ate) < 3 * a.sigma_hat / std::sqrt(5000.0)) ++inside;
  }
  EXPECT_GE(inside, 180);
}

TEST(Ate, DoublyRobustUnderEitherCorruption) {
  for (auto c : {simlab::Corruption::kOutcome, simlab::Corruption::kTreatmentDensity}) {
    double total = 0.0;
    for (int r = 0; r < 100; ++r) {
      const auto s = simlab::simulate({5000, 0.2, derive_seed(12, r), false});
      const FoldAssignment folds = assign_folds(s.data, 2, r);
      total += estimate_ate(s.data, simlab::oracle_nuisances(s, folds, c), 0.05).ate;
    }
    EXPECT_LT(std::abs(total / 100), 0.05) << static_cast<int>(c);
  }
}

NuisanceFit toy_fit(const FoldAssignment& folds, Index n) {
  return fixed_nuisances(Eigen::VectorXd::Constant(n, 0.5), Eigen::VectorXd::Zero(n),
                         Eigen::VectorXd::Ones(n), folds);
}

TEST(PseudoOutcome, HandEvaluatedCases) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  Eigen::VectorXd a(4), y(4);
  a << 1, 1, 0, 0;
  y << 1, 2, 0, 0.5;
  const Dataset d({"x"}, x, a, y);
  const PseudoOutcomes po = pseudo_cate(d, toy_fit(assign_folds(4, 2, 1), 4));
  EXPECT_DOUBLE_EQ(po.phi(0), 1.0);
  EXPECT_DOUBLE_EQ(po.phi(1), 3.0);
  EXPECT_DOUBLE_EQ(po.phi(2), 1.0);
  // A = 0, Y - mu0 = 0.5: 1 + (-0.5)(0.5)/0.25 = 0.
  EXPECT_DOUBLE_EQ(po.phi(3), 0.0);
  EXPECT_EQ(po.kind, PseudoKind::kCate);
}

TEST(Subgroups, ConstantGroupReproducesPooledMean) {
  const Dataset d = randomized(500, 8, false);
  const NuisanceFit nf = fit_nuisances(d, assign_folds(d, 2, 8), LearnerSpec::logistic(),
                                       LearnerSpec::linear_ridge());
  const PseudoOutcomes po = pseudo_cate(d, nf);
  const auto eff = subgroup_effects(po, Eigen::VectorXd::Ones(500), 0.05);
  ASSERT_EQ(eff.size(), 1u);
  EXPECT_DOUBLE_EQ(eff[0].level, 1.0);
  EXPECT_NEAR(eff[0].estimate, po.phi.mean(), 1e-12);
}

TEST(Subgroups, ConstantValuesGiveZeroWidth) {
  PseudoOutcomes po;
  po.phi.resize(6);
  po.phi << 2, 2, 2, -1, -1, -1;
  Eigen::VectorXd g(6);
  g << 0, 0, 0, 1, 1, 1;
  const auto eff = subgroup_effects(po, g, 0.05);
  ASSERT_EQ(eff.size(), 2u);
  EXPECT_DOUBLE_EQ(eff[0].estimate, 2.0);
  EXPECT_DOUBLE_EQ(eff[1].estimate, -1.0);
  EXPECT_DOUBLE_EQ(eff[0].hi - eff[0].lo, 0.0);
  EXPECT_DOUBLE_EQ(eff[1].hi - eff[1].lo, 0.0);
  Eigen::VectorXd bad = g;
  bad(0) = 2;
  EXPECT_THROW(subgroup_effects(po, bad, 0.05), DataError);
}

TEST(Subgroups, TruncatedGaussianMean) {
  // E[V1 + V2 | V1 > 0] = (1 + rho) sqrt(2/pi) for standard normals with
  // correlation rho.
  const double rho = 0.2;
  const auto s = simlab::simulate({20000, rho, 13, false});
  const FoldAssignment folds = assign_folds(s.data, 2, 13);
  const PseudoOutcomes po = pseudo_cate(s.data, simlab::oracle_nuisances(s, folds));
  const Eigen::VectorXd g = (s.data.column("V1").array() > 0.0).cast<double>();
  const auto eff = subgroup_effects(po, g, 0.05);
  ASSERT_EQ(eff.size(), 2u);
  const double truth = (1 + rho) * std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(eff[1].estimate, truth, 3 * eff[1].se);
}

}  // namespace
}  // namespace hetfx::crossfit
