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

#ifndef HETFX_VIMP_HPP_
#define HETFX_VIMP_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/crossfit.hpp"
#include "hetfx/dataset.hpp"
#include "hetfx/learners.hpp"

namespace hetfx::vimp {

// A named group of covariates whose joint importance is assessed.
struct VimpSubset {
  std::string name;
  std::vector<std::string> columns;
};

struct VimpResult {
  std::string name;
  double theta_hat = 0.0;  // variance of tau_x explained by the subset
  double psi_hat = 0.0;    // theta_hat / theta_x_hat (shared denominator)
  double se_theta = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  Index n_eval = 0;
  bool negative = false;   // theta_hat < 0 from sampling noise
};

struct VimpOptions {
  learners::LearnerSpec tau_spec = learners::LearnerSpec::linear_ridge(0.0);
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct VimpReport {
  double theta_x = 0.0;  // total heterogeneity explained by all covariates
  double se_theta_x = 0.0;
  std::vector<VimpResult> results;  // sorted by psi_hat, largest first
};

// Importance from cross-fitted pseudo-outcomes phi. For every fold, tau_x is
// the regression of phi on X and tau_{x\v} the regression on X without the
// subset, both trained on the other folds and evaluated on the fold:
//   theta_v = Pn[(phi - tau_{x\v})^2 - (phi - tau_x)^2].
// An empty X\V uses the training mean of phi, so the full covariate set has
// psi = 1 exactly. NumericError when theta_x is not positive.
VimpReport vimp_from_phi(const Dataset& data, const FoldAssignment& folds,
                         const Eigen::VectorXd& phi,
                         const std::vector<VimpSubset>& subsets,
                         const VimpOptions& options);

// Cross-fits the nuisances, builds phi and runs vimp_from_phi.
VimpReport vimp(const Dataset& data, const FoldAssignment& folds,
                const std::vector<VimpSubset>& subsets,
                const learners::LearnerSpec& pi_spec,
                const learners::LearnerSpec& mu_spec, const VimpOptions& options);

}  // namespace hetfx::vimp

#endif  // HETFX_VIMP_HPP_
