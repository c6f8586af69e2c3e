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

#ifndef HETFX_BANDS_HPP_
#define HETFX_BANDS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"
#include "hetfx/localpoly.hpp"

namespace hetfx::bands {

// A fitted curve with pointwise and uniform bands. Skipped grid points carry
// NaN in every per-point field and a diagnostic.
struct CurveEstimate {
  std::vector<double> grid;
  std::vector<double> estimate;
  std::vector<double> pw_lo, pw_hi;
  std::vector<double> unif_lo, unif_hi;
  std::vector<double> sigma;  // sigma_hat(v0); bands use sigma / sqrt(n h)
  double h = 0.0, b = 0.0;
  double alpha = 0.05;
  double crit = 0.0;  // uniform critical value
  Index n = 0;
  std::string target;  // "smoothed", "debiased" or "centered"
  std::string kind;    // "cate_univariate", "pd" or "additive"
  std::vector<std::string> diagnostics;
};

// Estimated influence function values, one column per grid point.
struct EifValues {
  Eigen::MatrixXd values;  // n x |grid|
  std::vector<bool> valid;
};

// Influence values of the local-linear (plain) or debiased estimator:
//   Gamma_lin(V)(phi - g_h(V)'beta_h) - Gamma_corr(V)(phi - g_b(V)'beta_b).
// The inner expectations use phi itself, which centres every column exactly.
// When `tau_hat` is non-null the inner regressions are instead computed from
// tau_hat (a sensitivity option; columns are then only approximately centred).
EifValues eif_cate(const localpoly::CurveFit& fit, const Eigen::VectorXd& v,
                   const Eigen::VectorXd& phi,
                   const Eigen::VectorXd* tau_hat = nullptr);

EifValues eif_cate(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                   const std::vector<double>& grid, double h, double b,
                   const localpoly::KernelSpec& kernel, localpoly::Mode mode,
                   const Eigen::VectorXd* tau_hat = nullptr);

// For each quadrature value vbar, returns per-row values tau_v(vbar, V_{-j,i})
// from the model that row i is held out of.
using SurfaceSlice = std::function<Eigen::VectorXd(double vbar)>;

// Partial-dependence influence values: the eif_cate terms plus
//   sum_q w_q Gamma(vbar_q) [tau_v(vbar_q, V_{-j,i}) - theta(vbar_q)],
// where the vbar_q are `nodes` equispaced points spanning v, w_q is the
// empirical distribution of v linearly binned onto them and theta is the row
// average of the slice, so the term has mean zero.
EifValues eif_pd(const localpoly::CurveFit& fit, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& phi_pd, const SurfaceSlice& tauv_slice,
                 int nodes = 401);

// Linear binning of the empirical distribution of v onto equispaced nodes.
Eigen::VectorXd linear_binning(const Eigen::VectorXd& v,
                               const std::vector<double>& nodes);

struct BandOptions {
  double alpha = 0.05;
  int draws = 2000;
  std::uint64_t seed = 0;
};

// Draws x |columns| matrix of N(0, corr) vectors; draw d uses its own stream.
// Eigenvalues are floored at 1e-10; NumericError if corr is far from PSD.
Eigen::MatrixXd simulate_gaussian(const Eigen::MatrixXd& corr, int draws,
                                  std::uint64_t seed);

// (1 - alpha) quantile of max_c |z(d, c)| over the given columns (all if
// `columns` is empty).
double max_abs_quantile(const Eigen::MatrixXd& z, double alpha,
                        const std::vector<Index>& columns = {});

// Bands from influence values. sigma(v0) = sqrt(h Pn[eif^2]); the uniform
// critical value is the simulated max-|Z| quantile, raised to the pointwise
// normal quantile if smaller so that the uniform band always contains the
// pointwise one. alpha >= 1 gives zero-width bands.
CurveEstimate uniform_band(const EifValues& eif, const std::vector<double>& grid,
                           const std::vector<double>& estimates, double h,
                           double b, const BandOptions& options);

// End-to-end DR-learner curve: optional LOOCV bandwidth, plain or debiased
// second stage, influence-function bands.
struct CurveOptions {
  localpoly::KernelSpec kernel;
  localpoly::Mode mode = localpoly::Mode::kDebiased;
  double h = 0.0;  // <= 0 selects h by LOOCV on the plain fit
  double b = 0.0;  // <= 0 uses b = h
  std::vector<double> grid;  // empty: 50 points over the 5%-95% quantiles
  bool bands = true;
  BandOptions band;
};

std::vector<double> default_grid(const Eigen::VectorXd& v, int points = 50);

// Resolves the bandwidths of `options` against the data (LOOCV when h <= 0).
std::pair<double, double> resolve_bandwidths(const Eigen::VectorXd& v,
                                             const Eigen::VectorXd& phi,
                                             const CurveOptions& options);

// When `fold_of` is given the second stage is run separately on each fold's
// pseudo-outcomes and the point estimates averaged; bands still use the
// pooled influence values.
CurveEstimate cate_curve(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                         const CurveOptions& options,
                         const std::vector<int>* fold_of = nullptr);

// Same pipeline for partial-dependence pseudo-outcomes: bands come from
// eif_pd with the given surface slice.
CurveEstimate pd_smooth(const Eigen::VectorXd& v, const Eigen::VectorXd& phi_pd,
                        const SurfaceSlice& tauv_slice,
                        const CurveOptions& options,
                        const std::vector<int>* fold_of = nullptr);

}  // namespace hetfx::bands

#endif  // HETFX_BANDS_HPP_
