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

#ifndef HETFX_DATASET_HPP_
#define HETFX_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfx/common.hpp"
#include "hetfx/learners.hpp"
#include "hetfx/splines.hpp"

namespace hetfx {

// Column roles for ingestion. An empty covariate list means "every column
// that is neither the treatment nor the outcome".
struct Schema {
  std::string treatment = "A";
  std::string outcome = "Y";
  std::vector<std::string> covariates;
};

// Covariates X (n x p), binary treatment A and outcome Y. Immutable; the
// mutating helpers return new datasets.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> covariate_names, Eigen::MatrixXd x,
          Eigen::VectorXd a, Eigen::VectorXd y, std::string treatment_name = "A",
          std::string outcome_name = "Y");

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& a() const { return a_; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::string& treatment_name() const { return treatment_name_; }
  const std::string& outcome_name() const { return outcome_name_; }

  bool has_covariate(const std::string& name) const;
  // ConfigError when the column is unknown.
  Index covariate_index(const std::string& name) const;
  // Any column by name, including the treatment and outcome.
  Eigen::VectorXd column(const std::string& name) const;
  Eigen::MatrixXd columns(const std::vector<std::string>& names) const;

  Dataset with_covariate(const std::string& name,
                         const Eigen::VectorXd& values) const;
  Dataset select_rows(const std::vector<Index>& rows) const;

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd a_, y_;
  std::string treatment_name_, outcome_name_;
};

Dataset load_csv(const std::string& path, const Schema& schema);
// Parses CSV text already in memory; `source` labels error messages.
Dataset parse_csv(const std::string& text, const Schema& schema,
                  const std::string& source = "<memory>");
// Writes covariates, treatment and outcome with 17 significant digits, so a
// reload reproduces every value bit for bit.
void write_csv(const std::string& path, const Dataset& data);
std::string to_csv(const Dataset& data);

struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;

  Index n() const { return static_cast<Index>(fold_of.size()); }
  std::vector<Index> rows_in(int fold) const;
  std::vector<Index> rows_out(int fold) const;
};

FoldAssignment assign_folds(Index n, int k, std::uint64_t seed);
inline FoldAssignment assign_folds(const Dataset& data, int k,
                                   std::uint64_t seed) {
  return assign_folds(data.n(), k, seed);
}

enum class ModifierKind { kContinuous, kBinary };

struct ModifierSpec {
  std::vector<std::string> names;
  std::vector<ModifierKind> kinds;
};

// Kinds are inferred: a column whose values are all 0 or 1 is binary.
ModifierSpec make_modifier_spec(const Dataset& data,
                                const std::vector<std::string>& names);

struct RiskScoreResult {
  Dataset data;                  // remaining rows, with the risk column
  std::vector<Index> discarded;  // original indices of the subsample
  learners::LogisticFit model;
};

// Fits a main-effects logistic model of the (binary) outcome on the
// covariates using a simple random subsample of size round(frac * n), then
// scores the remaining rows and drops the subsample.
RiskScoreResult derive_risk_score(const Dataset& data, double frac,
                                  std::uint64_t seed,
                                  const std::string& column = "risk");

// Within each level of the binary column `by`, smooths `target` on
// `smooth_on` with a cubic spline (dimension by LOOCV) and appends
// `<target>_resid` = target - fitted.
Dataset residualize(const Dataset& data, const std::string& target,
                    const std::string& smooth_on, const std::string& by,
                    const std::vector<int>& m_grid = splines::default_m_grid());

}  // namespace hetfx

#endif  // HETFX_DATASET_HPP_
