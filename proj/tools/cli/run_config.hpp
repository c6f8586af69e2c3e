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

#ifndef HETFX_TOOLS_RUN_CONFIG_HPP_
#define HETFX_TOOLS_RUN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetfx/additive.hpp"
#include "hetfx/dataset.hpp"
#include "hetfx/learners.hpp"
#include "hetfx/localpoly.hpp"
#include "hetfx/pdcurve.hpp"
#include "hetfx/simlab.hpp"
#include "hetfx/vimp.hpp"

namespace hetfx::cli {

using json = nlohmann::json;

struct BandwidthPolicy {
  bool loocv = true;
  double h = 0.0;
  double b = 0.0;  // 0: b = h
};

// quantile: `points` values over the 5%-95% quantiles of the modifier;
// range: `points` values on [lo, hi]; values: the listed values.
struct GridPolicy {
  std::string kind = "quantile";
  int points = 50;
  double lo = 0.0, hi = 0.0;
  std::vector<double> values;
};

struct OracleColumns {
  std::string pi = "pi_true", mu0 = "mu0_true", mu1 = "mu1_true";
};

struct RunConfig {
  std::string input;
  std::string out = ".";
  Schema columns;
  std::vector<std::string> modifiers;
  int folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  int draws = 2000;

  learners::LearnerSpec propensity;
  learners::LearnerSpec outcome;
  pdcurve::PdSpecs pd;
  double ratio_floor = 1e-3;

  localpoly::KernelFamily kernel = localpoly::KernelFamily::kUniform;
  localpoly::Mode mode = localpoly::Mode::kDebiased;
  bool per_fold = false;  // second stage per fold instead of pooled
  BandwidthPolicy bandwidth;
  GridPolicy grid;

  bool oracle = false;  // use known nuisance columns instead of learners
  OracleColumns oracle_columns;

  std::vector<int> m_grid = splines::default_m_grid();
  bool centering_term = false;

  std::vector<vimp::VimpSubset> vimp_subsets;  // empty: one per covariate
  learners::LearnerSpec vimp_learner = learners::LearnerSpec::linear_ridge(0.0);

  // simulate
  std::string scenario = "vary_n";
  int reps = 200;
  std::vector<double> settings;
  int grid_points = 41;
  std::vector<simlab::Method> methods = simlab::all_methods();

  // generate
  Index n = 1000;
  double rho = 0.2;

  std::string subgroup;  // binary column for the subgroup command

  // Not part of the resolved configuration: results do not depend on it.
  int threads = 0;

  RunConfig();
};

learners::LearnerSpec learner_from_json(const json& j);
json learner_to_json(const learners::LearnerSpec& spec);

// Parses a configuration document; unknown keys and ill-typed values raise
// ConfigError naming the offending key.
RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);

// Cross-field checks run after flags are applied.
void validate(const RunConfig& cfg);

// Fully resolved configuration (threads excluded).
json to_json(const RunConfig& cfg);

}  // namespace hetfx::cli

#endif  // HETFX_TOOLS_RUN_CONFIG_HPP_
