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

#ifndef HETFX_PDCURVE_HPP_
#define HETFX_PDCURVE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/bands.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/dataset.hpp"
#include "hetfx/learners.hpp"

namespace hetfx::pdcurve {

struct PdSpecs {
  learners::LearnerSpec density_mean = learners::LearnerSpec::linear_ridge(0.0);
  learners::LearnerSpec density_var = learners::LearnerSpec::linear_ridge(0.0);
  learners::ResidualDensity residual = learners::ResidualDensity::kKde;
  // Regression of tau_x on the modifiers; a stack of trees by default so the
  // surface can carry interactions.
  learners::LearnerSpec tauv = learners::LearnerSpec::stack(
      {learners::LearnerSpec::regression_tree(3, 20),
       learners::LearnerSpec::regression_tree(5, 10),
       learners::LearnerSpec::linear_ridge(0.0)});
  int table_points = 401;  // nodes used to tabulate theta_j and f_j
};

// Per-row nuisance values for the partial-dependence pseudo-outcome of
// modifier j. Row i's values come from models trained without its fold; the
// plug-in averages theta_j and f_j run over all rows.
struct PdNuisance {
  int j = 0;
  Eigen::MatrixXd modifiers;        // n x d
  Eigen::VectorXd dr_resid;         // (A - pi)(Y - mu_A) / (pi (1 - pi))
  Eigen::VectorXd tau_x;            // mu1 - mu0 at X_i
  Eigen::VectorXd tau_v;            // E[tau_x | V] at V_i
  Eigen::VectorXd cond_density;     // f_{j|-j}(V_ij | V_{i,-j})
  Eigen::VectorXd marginal_density; // f_j(V_ij)
  Eigen::VectorXd theta;            // theta_j(V_ij)
  bands::SurfaceSlice tauv_slice;   // vbar -> tau_v(vbar, V_{i,-j}) per row
  std::vector<int> fold_of;
  std::vector<std::string> warnings;
};

// Fits the conditional density and tau_v per fold of nf.folds (nf must carry
// fold models, i.e. come from crossfit::fit_nuisances).
PdNuisance build_pd_nuisance(const Dataset& data, const crossfit::NuisanceFit& nf,
                             const std::vector<std::string>& modifiers, int j,
                             const PdSpecs& specs, std::uint64_t seed = 0);

struct PdPseudoOutcomes {
  Eigen::VectorXd phi_pd;
  Eigen::VectorXd weighted_residual;  // bracket term times the density ratio
  Eigen::VectorXd theta_term;         // theta_j(V_ij)
  int j = 0;
  Index floored_rows = 0;
  std::vector<std::string> warnings;
};

// phi = [resid + tau_x - tau_v] * f_j / max(f_{j|-j}, floor * f_j) + theta_j.
PdPseudoOutcomes pseudo_pd(const PdNuisance& pdn, double ratio_floor = 1e-3);

// Local-linear (plain or debiased) smoothing of phi_pd on V_j with bands
// from the partial-dependence influence function.
bands::CurveEstimate pd_curve(const PdNuisance& pdn,
                              const bands::CurveOptions& options,
                              const std::vector<int>* fold_of = nullptr);

}  // namespace hetfx::pdcurve

#endif  // HETFX_PDCURVE_HPP_
