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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "hetfx/bands.hpp"
#include "hetfx/common.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/simlab.hpp"

namespace hetfx::bands {
namespace {

using localpoly::KernelFamily;
using localpoly::make_kernel;
using localpoly::Mode;

struct Xy {
  Eigen::VectorXd v, phi;
};

Xy noisy(Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  Xy d{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    d.v(i) = standard_normal(rng);
    d.phi(i) = std::sin(d.v(i)) + standard_normal(rng);
  }
  return d;
}

EifValues independent_columns(Index n, Index g, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  EifValues e{Eigen::MatrixXd(n, g), std::vector<bool>(g, true)};
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < g; ++c) e.values(i, c) = standard_normal(rng);
  return e;
}

TEST(Eif, ColumnsAreCentred) {
  const Xy d = noisy(800, 1);
  const std::vector<double> grid = linspace(-1.5, 1.5, 13);
  for (auto fam : {KernelFamily::kUniform, KernelFamily::kGaussian}) {
    for (Mode mode : {Mode::kPlain, Mode::kDebiased}) {
      const EifValues e = eif_cate(d.v, d.phi, grid, 0.5, 0.7, make_kernel(fam), mode);
      for (Index c = 0; c < e.values.cols(); ++c) {
        ASSERT_TRUE(e.valid[c]);
        EXPECT_NEAR(e.values.col(c).mean(), 0.0, 1e-8);
        EXPECT_TRUE(e.values.col(c).allFinite());
      }
    }
  }
}

TEST(Eif, NoiselessLinearHasNoVariance) {
  const Xy d = noisy(500, 2);
  const Eigen::VectorXd phi = (3.0 * d.v).array() - 1.0;
  const EifValues e = eif_cate(d.v, phi, {-1.0, 0.0, 1.0}, 0.6, 0.6,
                               make_kernel(KernelFamily::kUniform), Mode::kDebiased);
  EXPECT_LT(e.values.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Eif, SurfaceThatIgnoresOtherModifiersAddsNothing) {
  // A slice that is constant across rows equals its own row average, so the
  // integral term vanishes and eif_pd coincides with eif_cate.
  const Xy d = noisy(600, 3);
  const localpoly::KernelSpec k = make_kernel(KernelFamily::kUniform);
  const localpoly::CurveFit fit =
      localpoly::curve(d.v, d.phi, {-1.0, 0.0, 1.0}, 0.5, 0.5, k, Mode::kDebiased);
  const Index n = d.v.size();
  const SurfaceSlice slice = [n](double vbar) {
    return Eigen::VectorXd::Constant(n, std::sin(vbar));
  };
  const EifValues pd = eif_pd(fit, d.v, d.phi, slice);
  const EifValues cate = eif_cate(fit, d.v, d.phi);
  EXPECT_LT((pd.values - cate.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Eif, PartialDependenceColumnsAreCentred) {
  Rng rng = make_rng(4, 0);
  const Index n = 700;
  Eigen::VectorXd v(n), w(n), phi(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = standard_normal(rng);
    w(i) = standard_normal(rng);
    phi(i) = v(i) + w(i) + standard_normal(rng);
  }
  const localpoly::CurveFit fit = localpoly::curve(
      v, phi, linspace(-1, 1, 9), 0.5, 0.5, make_kernel(KernelFamily::kUniform), Mode::kDebiased);
  const SurfaceSlice slice = [w](double vbar) -> Eigen::VectorXd {
    return (w.array() + vbar).matrix();
  };
  const EifValues e = eif_pd(fit, v, phi, slice);
  for (Index c = 0; c < e.values.cols(); ++c) EXPECT_NEAR(e.values.col(c).mean(), 0.0, 1e-8);
}

TEST(Binning, WeightsAreAProbabilityVectorWithTheDataMean) {
  const Xy d = noisy(300, 5);
  const auto nodes = linspace(d.v.minCoeff(), d.v.maxCoeff(), 41);
  const Eigen::VectorXd w = linear_binning(d.v, nodes);
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  EXPECT_GE(w.minCoeff(), 0.0);
  // Linear binning preserves the first moment exactly.
  double m = 0.0;
  for (std::size_t q = 0; q < nodes.size(); ++q) m += w(q) * nodes[q];
  EXPECT_NEAR(m, d.v.mean(), 1e-12);
}

TEST(Critical, SinglePointMatchesNormalQuantile) {
  const EifValues e = independent_columns(400, 1, 6);
  const CurveEstimate ce = uniform_band(e, {0.0}, {0.0}, 1.0, 1.0, {0.05, 5000, 6});
  EXPECT_NEAR(ce.crit, 1.959964, 0.05);
}

TEST(Critical, DuplicatedPointBehavesLikeOne) {
  EifValues one = independent_columns(400, 1, 7);
  EifValues two{Eigen::MatrixXd(400, 2), {true, true}};
  two.values << one.values, one.values;
  const double c1 = uniform_band(one, {0.0}, {0.0}, 1.0, 1.0, {0.05, 5000, 7}).crit;
  const double c2 = uniform_band(two, {0.0, 0.0}, {0.0, 0.0}, 1.0, 1.0, {0.05, 5000, 7}).crit;
  EXPECT_NEAR(c1, c2, 0.05);
}

TEST(Critical, TwentyFiveIndependentPoints) {
  const EifValues e = independent_columns(5000, 25, 8);
  const std::vector<double> grid = linspace(0, 1, 25), est(25, 0.0);
  const double crit = uniform_band(e, grid, est, 1.0, 1.0, {0.05, 2000, 8}).crit;
  // Direct oracle: P(max of 25 |N(0,1)| <= c) = (2 Phi(c) - 1)^25.
  const double exact = normal_quantile(0.5 + 0.5 * std::pow(0.95, 1.0 / 25));
  EXPECT_GE(crit, 2.8);
  EXPECT_LE(crit, 3.4);
  EXPECT_NEAR(crit, exact, 0.15);
}

TEST(Critical, MonotoneInNestedGrids) {
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(10, 10);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j) corr(i, j) = std::exp(-std::abs(double(i - j)) / 3.0);
  const Eigen::MatrixXd z = simulate_gaussian(corr, 3000, 9);
  double prev = 0.0;
  for (Index k = 1; k <= 10; ++k) {
    std::vector<Index> cols(k);
    for (Index c = 0; c < k; ++c) cols[c] = c;
    const double q = max_abs_quantile(z, 0.05, cols);
    EXPECT_GE(q, prev);
    prev = q;
  }
}

TEST(Critical, SimulatedDrawsHaveTheRequestedCorrelation) {
  Eigen::MatrixXd corr(2, 2);
  corr << 1, 0.7, 0.7, 1;
  const Eigen::MatrixXd z = simulate_gaussian(corr, 50000, 10);
  const double r = (z.col(0).array() * z.col(1).array()).mean();
  EXPECT_NEAR(r, 0.7, 0.02);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(simulate_gaussian(bad, 10, 1), NumericError);
}

TEST(Bands, NestingSymmetryAndReproducibility) {
  const Xy d = noisy(1000, 11);
  CurveOptions opt;
  opt.grid = linspace(-1.5, 1.5, 21);
  opt.band.seed = 3;
  const CurveEstimate a = cate_curve(d.v, d.phi, opt);
  const CurveEstimate b = cate_curve(d.v, d.phi, opt);
  EXPECT_GE(a.crit, normal_quantile(0.975));
  for (std::size_t c = 0; c < a.grid.size(); ++c) {
    EXPECT_LE(a.unif_lo[c], a.pw_lo[c]);
    EXPECT_GE(a.unif_hi[c], a.pw_hi[c]);
    EXPECT_NEAR(a.estimate[c] - a.unif_lo[c], a.unif_hi[c] - a.estimate[c], 1e-12);
    EXPECT_GE(a.sigma[c], 0.0);
    EXPECT_EQ(a.unif_lo[c], b.unif_lo[c]);
    EXPECT_EQ(a.estimate[c], b.estimate[c]);
  }
  EXPECT_EQ(a.target, "debiased");
  EXPECT_EQ(a.kind, "cate_univariate");
}

TEST(Bands, AlphaOneGivesZeroWidth) {
  const Xy d = noisy(300, 12);
  CurveOptions opt;
  opt.h = 0.8;
  opt.grid = {0.0, 0.5};
  opt.band.alpha = 1.0;
  const CurveEstimate ce = cate_curve(d.v, d.phi, opt);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(ce.unif_lo[c], ce.estimate[c]);
    EXPECT_EQ(ce.pw_hi[c], ce.estimate[c]);
  }
}

TEST(Bands, PerFoldModeAveragesFoldEstimates) {
  const Xy d = noisy(600, 13);
  std::vector<int> fold_of(600);
  for (int i = 0; i < 600; ++i) fold_of[i] = i % 2;
  CurveOptions opt;
  opt.h = 0.7;
  opt.mode = Mode::kPlain;
  opt.grid = {0.2};
  const CurveEstimate ce = cate_curve(d.v, d.phi, opt, &fold_of);
  double expect = 0.0;
  for (int f = 0; f < 2; ++f) {
    std::vector<Index> rows;
    for (Index i = 0; i < 600; ++i)
      if (fold_of[i] == f) rows.push_back(i);
    expect += 0.5 * localpoly::local_poly_fit(d.v(rows), d.phi(rows), 0.2, 0.7, 1, opt.kernel)
                        .estimate();
  }
  EXPECT_NEAR(ce.estimate[0], expect, 1e-12);
}

TEST(Bands, StandardErrorMatchesMonteCarloSpread) {
  // Oracle pseudo-outcomes on the simulation design; debiased estimate at 0.
  const double h = 0.6;
  const Index n = 2000;
  std::vector<double> est, se;
  for (int r = 0; r < 200; ++r) {
    const auto s = simlab::simulate({n, 0.2, derive_seed(14, r), false});
    const FoldAssignment folds = assign_folds(s.data, 2, r);
    const Eigen::VectorXd phi =
        crossfit::pseudo_cate(s.data, simlab::oracle_nuisances(s, folds)).phi;
    const Eigen::VectorXd v = s.data.column("V1");
    const EifValues e =
        eif_cate(v, phi, {0.0}, h, h, make_kernel(KernelFamily::kUniform), Mode::kDebiased);
    est.push_back(localpoly::debiased_estimate(v, phi, 0.0, h, h,
                                               make_kernel(KernelFamily::kUniform))
                      .estimate);
    se.push_back(std::sqrt(e.values.col(0).squaredNorm() / n) / std::sqrt(double(n)));
  }
  const double mc_sd = std::sqrt(variance(est) * 200.0 / 199.0);
  EXPECT_NEAR(mean(se) / mc_sd, 1.0, 0.15);
}

}  // namespace
}  // namespace hetfx::bands
