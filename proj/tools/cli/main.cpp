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

// hetfx command-line frontend.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
// error, 4 unexpected internal error.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hetfx/common.hpp"
#include "run_config.hpp"

namespace {

using hetfx::cli::RunConfig;

struct Flags {
  std::optional<std::string> input, config, out, mode, scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, folds, reps;
  std::optional<double> alpha, rho;
  std::optional<long long> n;
  std::vector<std::string> modifiers;
  bool oracle = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Top-level random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (default: HETFX_THREADS or all cores)");
}

void add_data(CLI::App* cmd, Flags& f) {
  cmd->add_option("--input", f.input, "Input CSV file");
  cmd->add_option("--folds", f.folds, "Cross-fitting folds");
  cmd->add_option("--alpha", f.alpha, "Significance level");
  cmd->add_flag("--oracle", f.oracle, "Use known nuisance columns (pi_true, mu0_true, mu1_true)");
}

void add_curve(CLI::App* cmd, Flags& f) {
  cmd->add_option("--modifier", f.modifiers, "Effect modifier column (repeatable)");
  cmd->add_option("--mode", f.mode, "plain or debiased");
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config ? hetfx::cli::load_config(*f.config) : RunConfig{};
  if (f.input) c.input = *f.input;
  if (f.out) c.out = *f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.folds) c.folds = *f.folds;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.mode) c.mode = hetfx::localpoly::mode_from_string(*f.mode);
  if (!f.modifiers.empty()) c.modifiers = f.modifiers;
  if (f.oracle) c.oracle = true;
  if (f.scenario) c.scenario = *f.scenario;
  if (f.reps) c.reps = *f.reps;
  if (f.n) c.n = static_cast<hetfx::Index>(*f.n);
  if (f.rho) c.rho = *f.rho;
  if (f.threads) {
    c.threads = *f.threads;
  } else if (const char* env = std::getenv("HETFX_THREADS")) {
    try {
      c.threads = std::stoi(env);
    } catch (const std::exception&) {
      throw hetfx::ConfigError(std::string("HETFX_THREADS is not an integer: ") + env);
    }
  }
  if (c.threads < 0) throw hetfx::ConfigError("--threads must be >= 0");
  hetfx::cli::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetfx: doubly robust estimation of treatment-effect heterogeneity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hetfx::kVersion));
  Flags f;

  using Command = std::function<std::vector<std::string>(const RunConfig&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add = [&](const char* name, const char* help, Command fn, bool data, bool curve) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, f);
    if (data) add_data(cmd, f);
    if (curve) add_curve(cmd, f);
    commands.emplace_back(cmd, std::move(fn));
    return cmd;
  };
  add("ate", "Cross-fitted doubly robust average treatment effect", hetfx::cli::cmd_ate,
      true, false);
  add("cate", "Univariate CATE curves with uniform bands", hetfx::cli::cmd_cate, true, true);
  add("pd", "Partial-dependence curves with uniform bands", hetfx::cli::cmd_pd, true, true);
  add("additive", "Additive spline model of the CATE with component bands",
      hetfx::cli::cmd_additive, true, true);
  add("vimp", "Treatment-effect variable importance", hetfx::cli::cmd_vimp, true, false);
  add("subgroup", "Effects within the levels of a binary column", hetfx::cli::cmd_subgroup,
      true, true);
  CLI::App* sim = add("simulate", "Run a simulation scenario (vary_n or vary_rho)",
                      hetfx::cli::cmd_simulate, false, false);
  sim->add_option("--scenario", f.scenario, "vary_n or vary_rho");
  sim->add_option("--reps", f.reps, "Replicates per setting");
  CLI::App* gen = add("generate", "Write a simulated data set", hetfx::cli::cmd_generate,
                      false, false);
  gen->add_option("--n", f.n, "Rows");
  gen->add_option("--rho", f.rho, "Correlation of V1 and V2");
  gen->add_flag("--oracle", f.oracle, "Append the true nuisance columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = resolve(f);
    hetfx::set_thread_count(cfg.threads);
    for (auto& [cmd, fn] : commands) {
      if (!cmd->parsed()) continue;
      for (const auto& path : fn(cfg)) std::cout << "wrote " << path << "\n";
    }
  } catch (const hetfx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const hetfx::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const hetfx::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
