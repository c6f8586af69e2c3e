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

#ifndef HETFX_CROSSFIT_HPP_
#define HETFX_CROSSFIT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"
#include "hetfx/dataset.hpp"
#include "hetfx/learners.hpp"

namespace hetfx::crossfit {

// Out-of-fold nuisance predictions. The fold models are kept so that
// downstream stages can evaluate them on their own training rows.
struct NuisanceFit {
  Eigen::VectorXd pi_hat, mu0_hat, mu1_hat;
  FoldAssignment folds;
  learners::LearnerSpec pi_spec, mu_spec;
  std::vector<learners::FittedModel> pi_models, mu0_models, mu1_models;

  // tau_x(X_i) = mu1_hat - mu0_hat, out of fold.
  Eigen::VectorXd tau_x() const { return mu1_hat - mu0_hat; }
};

// Nuisances use every covariate of `data` as features.
NuisanceFit fit_nuisances(const Dataset& data, const FoldAssignment& folds,
                          const learners::LearnerSpec& pi_spec,
                          const learners::LearnerSpec& mu_spec,
                          std::uint64_t seed = 0);

// Wraps externally supplied (e.g. true) nuisance values. Propensities are
// clipped like learner output.
NuisanceFit fixed_nuisances(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu0,
                            const Eigen::VectorXd& mu1, const FoldAssignment& folds);

struct AteResult {
  double psi1 = 0.0, psi0 = 0.0, ate = 0.0;
  double sigma_hat = 0.0;  // sqrt(Pn[(phi - ate)^2]); se = sigma_hat / sqrt(n)
  double lo = 0.0, hi = 0.0;
  double alpha = 0.05;
  Index n = 0;
  std::vector<double> fold_ate;
};

// Fold-averaged DR estimates of E[Y^1], E[Y^0] and their difference with a
// Wald interval from the pooled influence values.
AteResult estimate_ate(const Dataset& data, const NuisanceFit& nf, double alpha);

enum class PseudoKind { kCate, kPd };

struct PseudoOutcomes {
  Eigen::VectorXd phi;
  PseudoKind kind = PseudoKind::kCate;
  int modifier = -1;         // column index for partial-dependence outcomes
  std::vector<int> fold_of;  // fold whose models produced each row
};

// (A - pi)(Y - mu_A) / (pi (1 - pi)) per row.
Eigen::VectorXd dr_residual(const Dataset& data, const NuisanceFit& nf);

PseudoOutcomes pseudo_cate(const Dataset& data, const NuisanceFit& nf);

struct SubgroupEffect {
  double level = 0.0;
  Index n = 0;
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0, hi = 0.0;
};

// Within-level means of phi with Wald intervals; one entry per observed
// level (0 before 1).
std::vector<SubgroupEffect> subgroup_effects(const PseudoOutcomes& po,
                                             const Eigen::VectorXd& group,
                                             double alpha);

}  // namespace hetfx::crossfit

#endif  // HETFX_CROSSFIT_HPP_
