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

#ifndef HETFX_ADDITIVE_HPP_
#define HETFX_ADDITIVE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/bands.hpp"
#include "hetfx/common.hpp"
#include "hetfx/splines.hpp"

namespace hetfx::additive {

struct AdditiveTerm {
  std::string name;
  bool binary = false;         // binary modifiers enter as one indicator column
  splines::SplineBasis basis;  // unused for binary terms
  Index offset = 0;            // first design column of the term
  Index width = 0;
  Eigen::RowVectorXd basis_mean;  // sample mean of the term's columns
};

// Least-squares additive fit phi ~ alpha + sum_j b_j(v_j)' beta_j with every
// component centred to have zero sample mean.
struct AdditiveFit {
  double intercept = 0.0;  // alpha + sum_j mean(b_j)' beta_j
  std::vector<AdditiveTerm> terms;
  Eigen::VectorXd coef;       // OLS coefficients, intercept first
  Eigen::MatrixXd design;     // n x (1 + sum widths)
  Eigen::MatrixXd gram_inv;   // (design' design / n)^-1
  Eigen::VectorXd residuals;
  Eigen::VectorXd modifier_means;
  int m = 0;                  // selected basis dimension
  std::vector<int> m_candidates;
  std::vector<double> loocv_scores;

  Index n() const { return design.rows(); }
  // Centred component h_j at the given values.
  Eigen::VectorXd component(int j, const Eigen::VectorXd& v) const;
  // Rows of a_j(v): the linear functional mapping coef to h_j(v).
  Eigen::MatrixXd component_design(int j, const Eigen::VectorXd& v) const;
  // Intercept plus all components at rows of `modifiers`.
  Eigen::VectorXd predict(const Eigen::MatrixXd& modifiers) const;
};

// `binary[j]` marks indicator modifiers. The shared basis dimension is chosen
// by LOOCV over `m_grid` (ties to the smaller m). ConfigError unless
// max(m_grid) * d + 1 <= n / 2.
AdditiveFit fit_additive(const Eigen::VectorXd& phi,
                         const Eigen::MatrixXd& modifiers,
                         const std::vector<std::string>& names,
                         const std::vector<bool>& binary,
                         const std::vector<int>& m_grid = splines::default_m_grid());

struct ComponentBandOptions {
  double alpha = 0.05;
  int draws = 2000;
  std::uint64_t seed = 0;
  // Adds the sampling variability of the centring constant to the
  // influence terms.
  bool centering_term = false;
};

// Multiplier-bootstrap band for component j over `grid`: influence terms
// psi_i(v) = a_j(v)' G^-1 x_i r_i, studentised sup statistic.
bands::CurveEstimate component_band(const AdditiveFit& fit, int j,
                                    const std::vector<double>& grid,
                                    const ComponentBandOptions& options);

}  // namespace hetfx::additive

#endif  // HETFX_ADDITIVE_HPP_
