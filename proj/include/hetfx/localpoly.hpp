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

#ifndef HETFX_LOCALPOLY_HPP_
#define HETFX_LOCALPOLY_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"

namespace hetfx::localpoly {

enum class KernelFamily { kUniform, kEpanechnikov, kGaussian };

struct KernelSpec {
  KernelFamily family = KernelFamily::kUniform;

  double operator()(double u) const;
  // Second moment: integral of u^2 K(u) du.
  double c2() const;
  // Half-width of the support in units of u (infinity for the Gaussian).
  double support() const;
  bool compact() const { return family != KernelFamily::kGaussian; }
};

KernelSpec make_kernel(KernelFamily family);
KernelSpec kernel_from_string(const std::string& name);
std::string to_string(KernelFamily family);

// Weighted least-squares fit of phi on g(v) = (1, u, ..., u^j), u = (v-v0)/h,
// with weights K_h(v) = K(u)/h. D = Pn[g g' K_h].
struct LocalFit {
  int order = 1;
  double h = 0.0;
  double v0 = 0.0;
  Eigen::MatrixXd d;     // moment matrix
  Eigen::VectorXd beta;  // coefficients in the scaled basis
  Index support = 0;     // rows with positive kernel weight
  double estimate() const { return beta(0); }
};

// NumericError when fewer than j+2 points carry weight or D is singular.
LocalFit local_poly_fit(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                        double v0, double h, int order, const KernelSpec& kernel);

// 2 b^-2 times the u^2 coefficient of a local cubic fit with bandwidth b.
double second_derivative(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                         double v0, double b, const KernelSpec& kernel);

// Per-row weights of the debiased estimator at one point:
//   linear_i     = e1' D_h^-1 g_h(v_i) K_h(v_i)
//   correction_i = c2 h^2 b^-2 e3' D_b^-1 g_b(v_i) K_b(v_i)
// so that Pn[(linear - correction) phi] is the debiased estimate.
struct GammaWeights {
  Eigen::VectorXd linear;
  Eigen::VectorXd correction;  // empty in plain mode
  double h = 0.0, b = 0.0, c2 = 0.0;

  Eigen::VectorXd total() const;
};

struct DebiasedEstimate {
  double estimate = 0.0;
  double plain = 0.0;
  double second_derivative = 0.0;
  GammaWeights gamma;
};

DebiasedEstimate debiased_estimate(const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& phi, double v0,
                                   double h, double b, const KernelSpec& kernel);

// 20 log-spaced candidates from range/50 to range.
std::vector<double> default_bandwidth_grid(const Eigen::VectorXd& v);

struct BandwidthSelection {
  double h = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;  // NaN where the candidate was rejected
};

// Leave-one-out choice of h minimising mean(((phi_i - fit_i)/(1 - H_ii))^2);
// ties go to the larger bandwidth. A candidate is rejected if fewer than 95%
// of the points admit a nonsingular local fit.
BandwidthSelection loocv_bandwidth(const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& phi, int order,
                                   const KernelSpec& kernel,
                                   const std::vector<double>& candidates);

enum class Mode { kPlain, kDebiased };
std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);
// Target of a curve: the smoothed curve for plain fits, the curve itself for
// debiased fits.
inline std::string target_name(Mode mode) {
  return mode == Mode::kPlain ? "smoothed" : "debiased";
}

struct PointFit {
  double v0 = 0.0;
  bool ok = false;
  std::string diagnostic;
  double estimate = 0.0;  // according to the curve's mode
  double plain = 0.0;
  double second_derivative = 0.0;
  Eigen::VectorXd beta_h;  // local linear coefficients (order 1, bandwidth h)
  Eigen::VectorXd beta_b;  // local cubic coefficients (debiased mode only)
  Eigen::VectorXd w_linear;      // D_h^-1 e1
  Eigen::VectorXd w_correction;  // c2 h^2 b^-2 D_b^-1 e3 (debiased mode only)
  GammaWeights gamma;
};

// Gamma weight of a fitted point evaluated at an arbitrary modifier value.
double gamma_at(const PointFit& point, const KernelSpec& kernel, double v);

struct CurveFit {
  std::vector<double> grid;
  std::vector<PointFit> points;
  double h = 0.0, b = 0.0;
  KernelSpec kernel;
  Mode mode = Mode::kPlain;

  std::vector<double> estimates() const;  // NaN at skipped points
};

// Pointwise fits over `grid`. Points whose local design is singular are
// skipped with a diagnostic instead of failing the whole curve.
CurveFit curve(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
               const std::vector<double>& grid, double h, double b,
               const KernelSpec& kernel, Mode mode);

}  // namespace hetfx::localpoly

#endif  // HETFX_LOCALPOLY_HPP_
