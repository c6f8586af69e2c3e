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

#ifndef HETFX_SPLINES_HPP_
#define HETFX_SPLINES_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"

namespace hetfx::splines {

// Cubic B-spline basis of dimension m on [lo, hi] with m-3 interior knots at
// equispaced sample quantiles. The clamped B-spline family has m+1 members;
// the first is dropped because the full family sums to one and would be
// collinear with a model intercept. Inputs outside the domain are clamped.
struct SplineBasis {
  std::string name;
  std::vector<double> knots;  // interior knots, strictly increasing
  int m = 0;
  double lo = 0.0, hi = 0.0;

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& v) const;
  Eigen::RowVectorXd evaluate(double v) const;
};

SplineBasis make_spline_basis(const Eigen::VectorXd& v, int m,
                              std::string name = {});

// Ordinary least squares with leave-one-out diagnostics from the hat diagonal.
struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  Eigen::VectorXd hat;  // leverages H_ii
  double loocv = 0.0;   // mean((r_i / (1 - H_ii))^2); +inf if some H_ii ~ 1
};

// Throws NumericError when the design is rank deficient.
OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

struct UnivariateSmooth {
  SplineBasis basis;
  OlsFit fit;
  std::vector<double> loocv_scores;  // aligned with the sorted candidates
};

// Spline regression of y on v with the basis dimension chosen by LOOCV among
// `m_grid` (ties go to the smaller m). Candidates whose design would have
// more columns than rows are skipped; DataError if none remain.
UnivariateSmooth smooth_spline(const Eigen::VectorXd& v, const Eigen::VectorXd& y,
                               const std::vector<int>& m_grid);

inline const std::vector<int>& default_m_grid() {
  static const std::vector<int> grid{4, 6, 8, 12};
  return grid;
}

}  // namespace hetfx::splines

#endif  // HETFX_SPLINES_HPP_
