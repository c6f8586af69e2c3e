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

#ifndef HETFX_SIMLAB_HPP_
#define HETFX_SIMLAB_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/bands.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/dataset.hpp"
#include "hetfx/pdcurve.hpp"

namespace hetfx::simlab {

// Simulation design:
//   W ~ N(0,1) independent of (V1, V2) ~ N(0, [[1, rho], [rho, 1]]),
//   pi = expit(0.4 W - 0.2 V1 - 0.2 V2),
//   mu1 = W + 1.5 V1 - 0.5 V2,  mu0 = 0.5 W + 0.5 V1 - 1.5 V2,
//   Y = A mu1 + (1 - A) mu0 + N(0,1).
// With `oracle` set, generate() also appends the true nuisance values as
// columns pi_true, mu0_true and mu1_true.
struct DgpConfig {
  Index n = 1000;
  double rho = 0.2;
  std::uint64_t seed = 0;
  bool oracle = false;
};

void validate(const DgpConfig& cfg);

// A draw with its true nuisance values; data covariates are W, V1, V2.
struct SimSample {
  Dataset data;
  Eigen::VectorXd pi, mu0, mu1;
  double rho = 0.0;
};

SimSample simulate(const DgpConfig& cfg);
Dataset generate(const DgpConfig& cfg);

enum class Target { kTau1, kTheta1, kTauV, kTauX, kAte };
std::string to_string(Target t);
Target target_from_string(const std::string& name);

// Closed-form truths. `point` holds v1 (tau1, theta1), (v1, v2) (tau_v),
// (w, v1, v2) (tau_x) or nothing (ate).
double true_value(const DgpConfig& cfg, Target target,
                  std::span<const double> point = {});

// Deliberate misspecification used to exercise double robustness.
enum class Corruption {
  kNone,
  kOutcome,           // mu0 = mu1 = 0
  kTreatmentDensity,  // pi with sign-flipped coefficients; f_{1|2} replaced
                      // by the N(0,1) marginal
};

// True (optionally corrupted) nuisances wrapped as a NuisanceFit.
crossfit::NuisanceFit oracle_nuisances(const SimSample& s,
                                       const FoldAssignment& folds,
                                       Corruption c = Corruption::kNone);
// Partial-dependence nuisances for V1 from the same closed forms.
pdcurve::PdNuisance oracle_pd_nuisance(const SimSample& s,
                                       const FoldAssignment& folds,
                                       Corruption c = Corruption::kNone);

// Correctly specified parametric learners: logistic propensity, linear
// outcome regressions, Gaussian conditional density of V1 given V2 with
// linear mean and variance, linear regression of tau_x on (V1, V2).
crossfit::NuisanceFit feasible_nuisances(const SimSample& s,
                                         const FoldAssignment& folds,
                                         std::uint64_t seed);
pdcurve::PdSpecs feasible_pd_specs();

enum class Method { kUnivariatePlain, kUnivariateDebiased, kGam, kPdPlain, kPdDebiased };
enum class Nuisance { kFeasible, kOracle };
std::string to_string(Method m);
std::string to_string(Nuisance k);
Method method_from_string(const std::string& name);
std::vector<Method> all_methods();
// tau1 for the univariate methods, theta1 otherwise.
Target method_target(Method m);

struct ReplicateOptions {
  std::vector<double> grid;  // evaluation points (RMSE grid)
  std::vector<Method> methods = all_methods();
  int folds = 2;
  bool bands = true;  // uniform band for the univariate debiased curve
  bands::BandOptions band;
};

struct MethodEstimate {
  Method method = Method::kUnivariatePlain;
  Nuisance nuisance = Nuisance::kFeasible;
  bool ok = false;
  std::string error;
  std::vector<double> curve;  // on ReplicateOptions::grid
};

struct ReplicateResult {
  std::vector<MethodEstimate> estimates;
  // Indexed by Nuisance.
  double ate[2] = {0.0, 0.0};
  bool ate_ok[2] = {false, false};
  bool ate_covers[2] = {false, false};
  bool band_ok[2] = {false, false};
  bool band_covers[2] = {false, false};
  double band_width[2] = {0.0, 0.0};  // median uniform band width
};

// One simulated data set run through every requested method with feasible
// and oracle nuisances.
ReplicateResult run_replicate(const DgpConfig& cfg, const ReplicateOptions& options);

enum class ScenarioKind { kVaryN, kVaryRho };
std::string to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& name);

struct ScenarioOptions {
  int reps = 200;
  std::uint64_t seed = 0;
  std::vector<Method> methods = all_methods();
  int grid_points = 41;  // equispaced on [-2, 2]
  std::vector<double> settings;  // empty: the default n or rho values
  bool bands = true;
};

struct MethodSummary {
  Method method = Method::kUnivariatePlain;
  Nuisance nuisance = Nuisance::kFeasible;
  double setting = 0.0;
  Index n = 0;
  double rho = 0.0;
  // sum_g w_g sqrt(mean_m err_mg^2), weights proportional to the N(0,1)
  // density on the grid; mc_se by the delta method.
  double rmse = 0.0;
  double mc_se = 0.0;
  double median_rmse = 0.0;  // median of per-replicate weighted RMSE
  int reps_ok = 0;
  int failures = 0;
  std::vector<double> mean_curve;  // per grid point, over successful reps
  std::vector<double> se_curve;    // MC standard error of mean_curve
  // Per-replicate delta-method terms of rmse (NaN where the replicate
  // failed); paired comparisons use their differences.
  std::vector<double> influence;
};

// MC standard error of rmse(a) - rmse(b) from replicates where both succeeded.
double paired_mc_se(const MethodSummary& a, const MethodSummary& b);

struct SettingSummary {
  double setting = 0.0;
  Index n = 0;
  double rho = 0.0;
  // Indexed by Nuisance.
  double ate_mean[2] = {0.0, 0.0};
  double ate_mc_se[2] = {0.0, 0.0};
  double ate_coverage[2] = {0.0, 0.0};
  double band_coverage[2] = {0.0, 0.0};
  int ate_reps[2] = {0, 0};
  int band_reps[2] = {0, 0};
};

struct ScenarioResult {
  ScenarioKind kind = ScenarioKind::kVaryN;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::vector<MethodSummary> rows;
  std::vector<SettingSummary> settings;
  std::vector<std::string> diagnostics;

  // ConfigError when absent.
  const MethodSummary& find(Method m, Nuisance k, double setting) const;
  const SettingSummary& find_setting(double setting) const;
};

std::vector<double> default_settings(ScenarioKind kind);
std::vector<double> rmse_weights(const std::vector<double>& grid);

// Replicates run in parallel with seeds derived from (seed, setting, rep), so
// results do not depend on the thread count. NumericError when more than 5%
// of the replicates of any method fail.
ScenarioResult run_scenario(ScenarioKind kind, const ScenarioOptions& options);

// Long format: kind,method,nuisance,setting,n,rho,rmse,mc_se,median_rmse,
// reps_ok,failures.
std::string scenario_csv(const ScenarioResult& r);

struct CoverageConfig {
  Method method = Method::kUnivariateDebiased;  // univariate or GAM
  Nuisance nuisance = Nuisance::kFeasible;
  int grid_points = 41;
  double grid_lo = -2.0, grid_hi = 2.0;
  int draws = 2000;
};

struct CoverageReport {
  double coverage = 0.0;
  double median_width = 0.0;
  int reps = 0;
  int failures = 0;
};

// Fraction of replicates whose uniform band covers the true curve at every
// grid point.
CoverageReport gaussian_coverage_check(const DgpConfig& dgp,
                                       const CoverageConfig& config, int reps,
                                       double alpha, std::uint64_t seed);

}  // namespace hetfx::simlab

#endif  // HETFX_SIMLAB_HPP_
