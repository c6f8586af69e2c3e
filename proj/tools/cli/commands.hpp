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

#ifndef HETFX_TOOLS_COMMANDS_HPP_
#define HETFX_TOOLS_COMMANDS_HPP_

#include <string>
#include <vector>

#include "hetfx/bands.hpp"
#include "run_config.hpp"

namespace hetfx::cli {

// Each command writes its artifacts into cfg.out and returns their paths.
std::vector<std::string> cmd_ate(const RunConfig& cfg);
std::vector<std::string> cmd_cate(const RunConfig& cfg);
std::vector<std::string> cmd_pd(const RunConfig& cfg);
std::vector<std::string> cmd_additive(const RunConfig& cfg);
std::vector<std::string> cmd_vimp(const RunConfig& cfg);
std::vector<std::string> cmd_subgroup(const RunConfig& cfg);
std::vector<std::string> cmd_simulate(const RunConfig& cfg);
std::vector<std::string> cmd_generate(const RunConfig& cfg);

// Curve artifact: grid, estimate, bands, sigma, bandwidths, target and the
// provenance block (config, seed, version). NaN is written as null.
json curve_to_json(const bands::CurveEstimate& ce, const RunConfig& cfg,
                   const std::string& modifier);

std::vector<double> make_grid(const GridPolicy& policy, const Eigen::VectorXd& v);

}  // namespace hetfx::cli

#endif  // HETFX_TOOLS_COMMANDS_HPP_
