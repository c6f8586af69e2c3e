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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "hetfx/additive.hpp"
#include "hetfx/common.hpp"
#include "hetfx/crossfit.hpp"
#include "hetfx/pdcurve.hpp"
#include "hetfx/simlab.hpp"
#include "hetfx/vimp.hpp"

namespace hetfx::cli {
namespace {

// Seed streams; every stochastic step derives from the top-level seed.
enum Stream : std::uint64_t {
  kFoldStream = 1,
  kNuisanceStream = 2,
  kPdStream = 3,
  kBandStream = 4,
  kVimpStream = 5,
};

struct Inputs {
  Dataset data;
  Eigen::VectorXd pi, mu0, mu1;  // oracle columns when requested
};

Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("no input file (use --input or \"input\")");
  Schema all = cfg.columns;
  all.covariates.clear();
  const Dataset raw = load_csv(cfg.input, all);
  const std::set<std::string> oracle_cols = {cfg.oracle_columns.pi, cfg.oracle_columns.mu0,
                                             cfg.oracle_columns.mu1};
  std::vector<std::string> cov = cfg.columns.covariates;
  if (cov.empty()) {
    for (const auto& name : raw.covariate_names()) {
      if (!oracle_cols.count(name)) cov.push_back(name);
    }
  }
  if (cov.empty()) throw ConfigError("the input has no covariate columns");
  Inputs in;
  in.data = Dataset(cov, raw.columns(cov), raw.a(), raw.y(), raw.treatment_name(),
                    raw.outcome_name());
  if (cfg.oracle) {
    for (const auto& c : oracle_cols) {
      if (!raw.has_covariate(c)) {
        throw ConfigError("oracle mode needs column '" + c + "' in the input");
      }
    }
    in.pi = raw.column(cfg.oracle_columns.pi);
    in.mu0 = raw.column(cfg.oracle_columns.mu0);
    in.mu1 = raw.column(cfg.oracle_columns.mu1);
  }
  return in;
}

FoldAssignment folds_for(const RunConfig& cfg, const Dataset& data) {
  if (cfg.folds > data.n()) throw ConfigError("more folds than rows");
  return assign_folds(data.n(), cfg.folds, derive_seed(cfg.seed, kFoldStream));
}

crossfit::NuisanceFit nuisances_for(const RunConfig& cfg, const Inputs& in,
                                    const FoldAssignment& folds) {
  if (cfg.oracle) return crossfit::fixed_nuisances(in.pi, in.mu0, in.mu1, folds);
  return crossfit::fit_nuisances(in.data, folds, cfg.propensity, cfg.outcome,
                                 derive_seed(cfg.seed, kNuisanceStream));
}

std::vector<std::string> require_modifiers(const RunConfig& cfg, const Dataset& data,
                                           std::size_t at_least) {
  if (cfg.modifiers.size() < at_least) {
    throw ConfigError(at_least == 1 ? "no modifier given (use --modifier or \"modifiers\")"
                                    : "this command needs at least " +
                                          std::to_string(at_least) + " modifiers");
  }
  for (const auto& m : cfg.modifiers) data.covariate_index(m);
  return cfg.modifiers;
}

json provenance(const RunConfig& cfg) {
  return {{"config", to_json(cfg)}, {"seed", cfg.seed}, {"version", kVersion}};
}

std::string write_file(const RunConfig& cfg, const std::string& name,
                       const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out + "'");
  const std::string path = (std::filesystem::path(cfg.out) / name).string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << content;
  return path;
}

std::string write_json(const RunConfig& cfg, const std::string& name, const json& j) {
  return write_file(cfg, name, j.dump(2) + "\n");
}

// CSV artifacts carry their provenance in a leading comment line.
std::string csv_header(const RunConfig& cfg) {
  return "# hetfx " + std::string(kVersion) + " seed=" + std::to_string(cfg.seed) +
         " config=" + to_json(cfg).dump() + "\n";
}

std::string num(double x) {
  if (!std::isfinite(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bands::CurveOptions curve_options(const RunConfig& cfg, const Eigen::VectorXd& v,
                                  std::uint64_t stream) {
  bands::CurveOptions co;
  co.kernel = localpoly::make_kernel(cfg.kernel);
  co.mode = cfg.mode;
  co.h = cfg.bandwidth.loocv ? 0.0 : cfg.bandwidth.h;
  co.b = cfg.bandwidth.loocv ? 0.0 : cfg.bandwidth.b;
  co.grid = make_grid(cfg.grid, v);
  co.band.alpha = cfg.alpha;
  co.band.draws = cfg.draws;
  co.band.seed = derive_seed(cfg.seed, kBandStream, stream);
  return co;
}

void require_continuous(const Dataset& data, const std::string& name,
                        const std::string& what) {
  const ModifierSpec ms = make_modifier_spec(data, {name});
  if (ms.kinds[0] != ModifierKind::kContinuous) {
    throw ConfigError(what + " needs a continuous modifier; '" + name +
                      "' is binary (use the subgroup command)");
  }
}

}  // namespace

std::vector<double> make_grid(const GridPolicy& policy, const Eigen::VectorXd& v) {
  if (policy.kind == "quantile") return bands::default_grid(v, policy.points);
  if (policy.kind == "range") return linspace(policy.lo, policy.hi, policy.points);
  if (policy.kind == "values") return policy.values;
  throw ConfigError("unknown grid policy '" + policy.kind + "'");
}

json curve_to_json(const bands::CurveEstimate& ce, const RunConfig& cfg,
                   const std::string& modifier) {
  json j;
  j["modifier"] = modifier;
  j["kind"] = ce.kind;
  j["target"] = ce.target;
  j["grid"] = ce.grid;
  j["estimate"] = ce.estimate;
  j["pw_lo"] = ce.pw_lo;
  j["pw_hi"] = ce.pw_hi;
  j["unif_lo"] = ce.unif_lo;
  j["unif_hi"] = ce.unif_hi;
  j["sigma"] = ce.sigma;
  j["h"] = ce.h;
  j["b"] = ce.b;
  j["alpha"] = ce.alpha;
  j["crit"] = ce.crit;
  j["n"] = ce.n;
  j["diagnostics"] = ce.diagnostics;
  j.update(provenance(cfg));
  return j;
}

std::vector<std::string> cmd_ate(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  const crossfit::AteResult r = crossfit::estimate_ate(in.data, nf, cfg.alpha);
  json j;
  j["kind"] = "ate";
  j["ate"] = r.ate;
  j["psi1"] = r.psi1;
  j["psi0"] = r.psi0;
  j["sigma_hat"] = r.sigma_hat;
  j["se"] = r.sigma_hat / std::sqrt(static_cast<double>(r.n));
  j["lo"] = r.lo;
  j["hi"] = r.hi;
  j["alpha"] = r.alpha;
  j["n"] = r.n;
  j["fold_ate"] = r.fold_ate;
  j.update(provenance(cfg));
  return {write_json(cfg, "ate.json", j)};
}

std::vector<std::string> cmd_cate(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const auto mods = require_modifiers(cfg, in.data, 1);
  for (const auto& m : mods) require_continuous(in.data, m, "cate");
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  const crossfit::PseudoOutcomes po = crossfit::pseudo_cate(in.data, nf);
  std::vector<std::string> out;
  for (std::size_t k = 0; k < mods.size(); ++k) {
    const Eigen::VectorXd v = in.data.column(mods[k]);
    const bands::CurveEstimate ce =
        bands::cate_curve(v, po.phi, curve_options(cfg, v, k),
                          cfg.per_fold ? &folds.fold_of : nullptr);
    out.push_back(write_json(cfg, "curve_" + mods[k] + ".json",
                             curve_to_json(ce, cfg, mods[k])));
  }
  return out;
}

std::vector<std::string> cmd_pd(const RunConfig& cfg) {
  if (cfg.oracle) {
    throw ConfigError("pd needs fitted outcome models; oracle mode is not supported");
  }
  const Inputs in = load_inputs(cfg);
  const auto mods = require_modifiers(cfg, in.data, 2);
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  std::vector<std::string> out;
  const ModifierSpec ms = make_modifier_spec(in.data, mods);
  for (std::size_t k = 0; k < mods.size(); ++k) {
    if (ms.kinds[k] != ModifierKind::kContinuous) continue;
    const pdcurve::PdNuisance pdn = pdcurve::build_pd_nuisance(
        in.data, nf, mods, static_cast<int>(k), cfg.pd,
        derive_seed(cfg.seed, kPdStream, k));
    const pdcurve::PdPseudoOutcomes po = pdcurve::pseudo_pd(pdn, cfg.ratio_floor);
    const Eigen::VectorXd v = pdn.modifiers.col(static_cast<Index>(k));
    bands::CurveEstimate ce =
        bands::pd_smooth(v, po.phi_pd, pdn.tauv_slice, curve_options(cfg, v, k),
                         cfg.per_fold ? &folds.fold_of : nullptr);
    ce.diagnostics.insert(ce.diagnostics.end(), pdn.warnings.begin(), pdn.warnings.end());
    ce.diagnostics.insert(ce.diagnostics.end(), po.warnings.begin(), po.warnings.end());
    json j = curve_to_json(ce, cfg, mods[k]);
    j["floored_rows"] = po.floored_rows;
    out.push_back(write_json(cfg, "curve_pd_" + mods[k] + ".json", j));
  }
  if (out.empty()) throw ConfigError("pd: none of the modifiers is continuous");
  return out;
}

std::vector<std::string> cmd_additive(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const auto mods = require_modifiers(cfg, in.data, 1);
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  const crossfit::PseudoOutcomes po = crossfit::pseudo_cate(in.data, nf);
  const ModifierSpec ms = make_modifier_spec(in.data, mods);
  std::vector<bool> binary(mods.size());
  for (std::size_t k = 0; k < mods.size(); ++k) {
    binary[k] = ms.kinds[k] == ModifierKind::kBinary;
  }
  const additive::AdditiveFit fit =
      additive::fit_additive(po.phi, in.data.columns(mods), mods, binary, cfg.m_grid);
  std::vector<std::string> out;
  for (std::size_t k = 0; k < mods.size(); ++k) {
    const Eigen::VectorXd v = in.data.column(mods[k]);
    const std::vector<double> grid =
        binary[k] ? std::vector<double>{0.0, 1.0} : make_grid(cfg.grid, v);
    additive::ComponentBandOptions bo;
    bo.alpha = cfg.alpha;
    bo.draws = cfg.draws;
    bo.seed = derive_seed(cfg.seed, kBandStream, k);
    bo.centering_term = cfg.centering_term;
    const bands::CurveEstimate ce =
        additive::component_band(fit, static_cast<int>(k), grid, bo);
    json j = curve_to_json(ce, cfg, mods[k]);
    j["intercept"] = fit.intercept;
    j["m"] = fit.m;
    j["m_candidates"] = fit.m_candidates;
    j["loocv_scores"] = fit.loocv_scores;
    out.push_back(write_json(cfg, "curve_additive_" + mods[k] + ".json", j));
  }
  return out;
}

std::vector<std::string> cmd_vimp(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  const crossfit::PseudoOutcomes po = crossfit::pseudo_cate(in.data, nf);
  std::vector<vimp::VimpSubset> subsets = cfg.vimp_subsets;
  if (subsets.empty()) {
    for (const auto& c : in.data.covariate_names()) subsets.push_back({c, {c}});
  }
  vimp::VimpOptions vo;
  vo.tau_spec = cfg.vimp_learner;
  vo.alpha = cfg.alpha;
  vo.seed = derive_seed(cfg.seed, kVimpStream);
  const vimp::VimpReport rep = vimp::vimp_from_phi(in.data, folds, po.phi, subsets, vo);

  std::string csv = csv_header(cfg);
  csv += "name,theta_hat,psi_hat,se_theta,ci_lo,ci_hi,n_eval,negative\n";
  json rows = json::array();
  for (const auto& r : rep.results) {
    csv += r.name + "," + num(r.theta_hat) + "," + num(r.psi_hat) + "," +
           num(r.se_theta) + "," + num(r.ci_lo) + "," + num(r.ci_hi) + "," +
           std::to_string(r.n_eval) + "," + (r.negative ? "true" : "false") + "\n";
    rows.push_back({{"name", r.name}, {"theta_hat", r.theta_hat}, {"psi_hat", r.psi_hat},
                    {"se_theta", r.se_theta}, {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi},
                    {"n_eval", r.n_eval}, {"negative", r.negative}});
  }
  json j;
  j["kind"] = "vimp";
  j["theta_x"] = rep.theta_x;
  j["se_theta_x"] = rep.se_theta_x;
  j["results"] = rows;
  j.update(provenance(cfg));
  return {write_file(cfg, "vimp.csv", csv), write_json(cfg, "vimp.json", j)};
}

std::vector<std::string> cmd_subgroup(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  std::string col = cfg.subgroup;
  if (col.empty() && cfg.modifiers.size() == 1) col = cfg.modifiers[0];
  if (col.empty()) throw ConfigError("subgroup: no column given (use --modifier)");
  const Eigen::VectorXd g = in.data.x().col(in.data.covariate_index(col));
  const FoldAssignment folds = folds_for(cfg, in.data);
  const crossfit::NuisanceFit nf = nuisances_for(cfg, in, folds);
  const crossfit::PseudoOutcomes po = crossfit::pseudo_cate(in.data, nf);
  const auto effects = crossfit::subgroup_effects(po, g, cfg.alpha);
  json rows = json::array();
  for (const auto& e : effects) {
    rows.push_back({{"level", e.level}, {"n", e.n}, {"estimate", e.estimate},
                    {"se", e.se}, {"lo", e.lo}, {"hi", e.hi}});
  }
  json j;
  j["kind"] = "subgroup";
  j["column"] = col;
  j["alpha"] = cfg.alpha;
  j["effects"] = rows;
  j.update(provenance(cfg));
  return {write_json(cfg, "subgroup_" + col + ".json", j)};
}

std::vector<std::string> cmd_simulate(const RunConfig& cfg) {
  simlab::ScenarioOptions so;
  so.reps = cfg.reps;
  so.seed = cfg.seed;
  so.methods = cfg.methods;
  so.grid_points = cfg.grid_points;
  so.settings = cfg.settings;
  const simlab::ScenarioKind kind = simlab::scenario_from_string(cfg.scenario);
  const simlab::ScenarioResult res = simlab::run_scenario(kind, so);

  json rows = json::array();
  for (const auto& r : res.rows) {
    rows.push_back({{"method", simlab::to_string(r.method)},
                    {"nuisance", simlab::to_string(r.nuisance)},
                    {"setting", r.setting}, {"n", r.n}, {"rho", r.rho},
                    {"rmse", r.rmse}, {"mc_se", r.mc_se},
                    {"median_rmse", r.median_rmse}, {"reps_ok", r.reps_ok},
                    {"failures", r.failures}, {"mean_curve", r.mean_curve},
                    {"se_curve", r.se_curve}});
  }
  json settings = json::array();
  for (const auto& s : res.settings) {
    json per;
    for (int k = 0; k < 2; ++k) {
      per[k == 0 ? "feasible" : "oracle"] = {
          {"ate_mean", s.ate_mean[k]}, {"ate_mc_se", s.ate_mc_se[k]},
          {"ate_coverage", s.ate_coverage[k]}, {"ate_reps", s.ate_reps[k]},
          {"band_coverage", s.band_coverage[k]}, {"band_reps", s.band_reps[k]}};
    }
    settings.push_back({{"setting", s.setting}, {"n", s.n}, {"rho", s.rho}, {"ate", per}});
  }

  // Expected direction: error falls with n and grows with rho.
  json trend = json::array();
  for (auto nk : {simlab::Nuisance::kFeasible, simlab::Nuisance::kOracle}) {
    for (auto m : cfg.methods) {
      std::vector<double> med;
      const std::vector<double> values =
          cfg.settings.empty() ? simlab::default_settings(kind) : cfg.settings;
      for (double s : values) med.push_back(res.find(m, nk, s).median_rmse);
      bool monotone = true;
      for (std::size_t i = 1; i < med.size(); ++i) {
        monotone = monotone && (kind == simlab::ScenarioKind::kVaryN ? med[i] < med[i - 1]
                                                                     : med[i] > med[i - 1]);
      }
      const bool endpoints = kind == simlab::ScenarioKind::kVaryN
                                 ? med.back() < med.front()
                                 : med.back() > med.front();
      trend.push_back({{"method", simlab::to_string(m)},
                       {"nuisance", simlab::to_string(nk)},
                       {"median_rmse", med},
                       {"monotone", monotone},
                       {"endpoints", endpoints}});
      std::cout << "trend " << simlab::to_string(m) << "/" << simlab::to_string(nk)
                << ": " << (monotone ? "monotone" : "not monotone") << ", endpoints "
                << (endpoints ? "ok" : "reversed") << "\n";
    }
  }

  json j;
  j["kind"] = simlab::to_string(kind);
  j["reps"] = res.reps;
  j["grid"] = res.grid;
  j["rows"] = rows;
  j["settings"] = settings;
  j["trend"] = trend;
  j["diagnostics"] = res.diagnostics;
  j.update(provenance(cfg));
  const std::string stem = "scenario_" + simlab::to_string(kind);
  return {write_file(cfg, stem + ".csv", csv_header(cfg) + simlab::scenario_csv(res)),
          write_json(cfg, stem + ".json", j)};
}

std::vector<std::string> cmd_generate(const RunConfig& cfg) {
  simlab::DgpConfig dc;
  dc.n = cfg.n;
  dc.rho = cfg.rho;
  dc.seed = cfg.seed;
  dc.oracle = cfg.oracle;
  return {write_file(cfg, "simulated.csv", to_csv(simlab::generate(dc)))};
}

}  // namespace hetfx::cli
