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

#ifndef HETFX_LEARNERS_HPP_
#define HETFX_LEARNERS_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"

namespace hetfx::learners {

enum class LearnerKind { kLinearRidge, kLogistic, kKnn, kRegressionTree, kStack };
enum class Task { kRegression, kProbability };

// Probability-task predictions are clipped to [kPropensityClip, 1 - kPropensityClip].
inline constexpr double kPropensityClip = 0.01;

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kLinearRidge;
  double lambda = 0.0;    // ridge penalty (linear_ridge, logistic)
  int k = 10;             // neighbours (knn)
  int max_depth = 4;      // regression_tree
  int min_leaf = 10;      // regression_tree
  int stack_folds = 5;    // CV folds used to weight stack members
  std::vector<LearnerSpec> members;

  static LearnerSpec linear_ridge(double lambda = 0.0);
  static LearnerSpec logistic(double lambda = 0.0);
  static LearnerSpec knn(int k);
  static LearnerSpec regression_tree(int max_depth, int min_leaf);
  static LearnerSpec stack(std::vector<LearnerSpec> members, int folds = 5);

  // Throws ConfigError when hyperparameters are out of range.
  void validate() const;
  std::string describe() const;
};

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

// Fitted state of one learner. Implementations are immutable after fitting.
class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
};

class FittedModel {
 public:
  FittedModel() = default;
  FittedModel(LearnerSpec spec, Task task, Index features,
              std::shared_ptr<const Model> impl,
              std::vector<double> stack_weights = {});

  // Predictions for rows of `x`; probability tasks are clipped.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  const LearnerSpec& spec() const { return spec_; }
  Task task() const { return task_; }
  Index feature_count() const { return features_; }
  bool fitted() const { return impl_ != nullptr; }
  // Simplex weights of the members when this is a stack.
  const std::vector<double>& stack_weights() const { return stack_weights_; }
  std::vector<std::string> feature_names;

 private:
  LearnerSpec spec_;
  Task task_ = Task::kRegression;
  Index features_ = 0;
  std::shared_ptr<const Model> impl_;
  std::vector<double> stack_weights_;
};

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                const Eigen::VectorXd& y, Task task, std::uint64_t seed = 0);

FittedModel fit_stack(const std::vector<LearnerSpec>& members,
                      const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      Task task, int folds, std::uint64_t seed);

// Ridge coefficients with an unpenalised intercept: returns (b0, b1..bp).
Eigen::VectorXd ridge_coefficients(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda);

struct LogisticFit {
  Eigen::VectorXd coefficients;  // intercept first
  int iterations = 0;
  bool converged = false;
};

// Logistic regression by IRLS. Working probabilities are clipped to
// [clip, 1-clip] so that separated data yields large but finite coefficients.
LogisticFit logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          double lambda = 0.0, int max_iterations = 100,
                          double clip = 1e-6);

// Non-negative least squares (Lawson-Hanson): argmin ||a w - b|| s.t. w >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     int max_iterations = 500);

// ---------------------------------------------------------------------------
// Semiparametric conditional density of one modifier given the others:
// f(v | v_rest) = k((v - mean(v_rest)) / sd(v_rest)) / sd(v_rest).

enum class ResidualDensity { kKde, kGaussian };

class ConditionalDensity {
 public:
  // Density of modifier j at value `v` given the remaining modifiers `rest`
  // (a row with the j-th column removed).
  double evaluate(double v, const Eigen::RowVectorXd& rest) const;
  // Vectorised over rows: densities of values(i) given rest.row(i).
  Eigen::VectorXd evaluate(const Eigen::VectorXd& values,
                           const Eigen::MatrixXd& rest) const;
  // Location/scale at the given rows of the conditioning variables.
  Eigen::VectorXd conditional_mean(const Eigen::MatrixXd& rest) const;
  Eigen::VectorXd conditional_sd(const Eigen::MatrixXd& rest) const;
  // Density of the standardized residual.
  double residual_density(double t) const;

  FittedModel mean_model;
  FittedModel var_model;
  ResidualDensity residual_kind = ResidualDensity::kKde;
  double variance_floor = 0.0;
  double bandwidth = 0.0;
  std::vector<double> residuals;  // standardized, sorted
  Index floored_rows = 0;         // training rows where the floor engaged
  std::vector<std::string> warnings;

 private:
  friend ConditionalDensity fit_conditional_density(const Eigen::MatrixXd&, int,
                                                    const LearnerSpec&,
                                                    const LearnerSpec&,
                                                    ResidualDensity);
  double kde_exact(double t) const;
  double table_lo_ = 0.0, table_step_ = 0.0;
  std::vector<double> table_;
};

// `modifiers` is the n x d matrix of effect modifiers; j indexes the column
// whose conditional density is modelled.
ConditionalDensity fit_conditional_density(
    const Eigen::MatrixXd& modifiers, int j, const LearnerSpec& mean_spec,
    const LearnerSpec& var_spec,
    ResidualDensity residual = ResidualDensity::kKde);

// n^-1 sum_i f(v | rest_i): marginal density by averaging the conditional
// density over the observed conditioning rows.
double marginal_density(const ConditionalDensity& cd,
                        const Eigen::MatrixXd& rest, double v);

// Removes column j.
Eigen::MatrixXd drop_column(const Eigen::MatrixXd& m, int j);

}  // namespace hetfx::learners

#endif  // HETFX_LEARNERS_HPP_
