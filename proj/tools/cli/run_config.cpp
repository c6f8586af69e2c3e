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

#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hetfx/common.hpp"

namespace hetfx::cli {
namespace {

using learners::LearnerKind;
using learners::LearnerSpec;

void only_keys(const json& obj, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string path_of(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

const json& sub(const json& obj, const char* key) {
  static const json empty = json::object();
  return obj.contains(key) ? obj.at(key) : empty;
}

LearnerSpec learner_at(const json& obj, const char* key, const std::string& where,
                       const LearnerSpec& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return learner_from_json(obj.at(key));
  } catch (const ConfigError& e) {
    throw ConfigError(path_of(where, key) + ": " + e.what());
  }
}

learners::ResidualDensity residual_from_string(const std::string& s) {
  if (s == "kde") return learners::ResidualDensity::kKde;
  if (s == "gaussian") return learners::ResidualDensity::kGaussian;
  throw ConfigError("learners.density_residual: expected kde or gaussian, got '" + s + "'");
}

}  // namespace

RunConfig::RunConfig()
    : propensity(LearnerSpec::stack({LearnerSpec::logistic(0.0),
                                     LearnerSpec::regression_tree(3, 20),
                                     LearnerSpec::knn(25)})),
      outcome(LearnerSpec::stack({LearnerSpec::linear_ridge(0.0),
                                  LearnerSpec::regression_tree(4, 10),
                                  LearnerSpec::knn(25)})) {}

LearnerSpec learner_from_json(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    switch (learners::learner_kind_from_string(name)) {
      case LearnerKind::kLinearRidge: return LearnerSpec::linear_ridge(0.0);
      case LearnerKind::kLogistic: return LearnerSpec::logistic(0.0);
      case LearnerKind::kKnn: return LearnerSpec::knn(10);
      case LearnerKind::kRegressionTree: return LearnerSpec::regression_tree(4, 10);
      case LearnerKind::kStack:
        throw ConfigError("a stack needs an object with 'members'");
    }
  }
  only_keys(j, "learner", {"kind", "lambda", "k", "max_depth", "min_leaf", "members", "folds"});
  if (!j.contains("kind")) throw ConfigError("learner: missing 'kind'");
  const std::string kind = get<std::string>(j, "kind", "learner", "");
  LearnerSpec s;
  switch (learners::learner_kind_from_string(kind)) {
    case LearnerKind::kLinearRidge:
      s = LearnerSpec::linear_ridge(get<double>(j, "lambda", "learner", 0.0));
      break;
    case LearnerKind::kLogistic:
      s = LearnerSpec::logistic(get<double>(j, "lambda", "learner", 0.0));
      break;
    case LearnerKind::kKnn:
      s = LearnerSpec::knn(get<int>(j, "k", "learner", 10));
      break;
    case LearnerKind::kRegressionTree:
      s = LearnerSpec::regression_tree(get<int>(j, "max_depth", "learner", 4),
                                       get<int>(j, "min_leaf", "learner", 10));
      break;
    case LearnerKind::kStack: {
      if (!j.contains("members") || !j.at("members").is_array()) {
        throw ConfigError("learner: a stack needs a 'members' array");
      }
      std::vector<LearnerSpec> members;
      for (const auto& m : j.at("members")) members.push_back(learner_from_json(m));
      s = LearnerSpec::stack(std::move(members), get<int>(j, "folds", "learner", 5));
      break;
    }
  }
  s.validate();
  return s;
}

json learner_to_json(const LearnerSpec& s) {
  json j;
  j["kind"] = learners::to_string(s.kind);
  switch (s.kind) {
    case LearnerKind::kLinearRidge:
    case LearnerKind::kLogistic:
      j["lambda"] = s.lambda;
      break;
    case LearnerKind::kKnn:
      j["k"] = s.k;
      break;
    case LearnerKind::kRegressionTree:
      j["max_depth"] = s.max_depth;
      j["min_leaf"] = s.min_leaf;
      break;
    case LearnerKind::kStack: {
      j["folds"] = s.stack_folds;
      json members = json::array();
      for (const auto& m : s.members) members.push_back(learner_to_json(m));
      j["members"] = members;
      break;
    }
  }
  return j;
}

RunConfig parse_config(const json& doc) {
  only_keys(doc, "config",
            {"input", "out", "seed", "folds", "alpha", "draws", "columns", "modifiers",
             "learners", "ratio_floor", "kernel", "mode", "second_stage", "bandwidth",
             "grid", "oracle", "oracle_columns", "additive", "vimp", "simulate",
             "generate", "subgroup"});
  RunConfig c;
  c.input = get<std::string>(doc, "input", "config", c.input);
  c.out = get<std::string>(doc, "out", "config", c.out);
  c.seed = get<std::uint64_t>(doc, "seed", "config", c.seed);
  c.folds = get<int>(doc, "folds", "config", c.folds);
  c.alpha = get<double>(doc, "alpha", "config", c.alpha);
  c.draws = get<int>(doc, "draws", "config", c.draws);
  c.modifiers = get<std::vector<std::string>>(doc, "modifiers", "config", c.modifiers);
  c.ratio_floor = get<double>(doc, "ratio_floor", "config", c.ratio_floor);
  c.oracle = get<bool>(doc, "oracle", "config", c.oracle);
  if (doc.contains("kernel")) {
    c.kernel = localpoly::kernel_from_string(get<std::string>(doc, "kernel", "config", "")).family;
  }
  if (doc.contains("mode")) {
    c.mode = localpoly::mode_from_string(get<std::string>(doc, "mode", "config", ""));
  }
  if (doc.contains("second_stage")) {
    const auto s = get<std::string>(doc, "second_stage", "config", "");
    if (s != "pooled" && s != "per_fold") {
      throw ConfigError("second_stage: expected pooled or per_fold, got '" + s + "'");
    }
    c.per_fold = s == "per_fold";
  }

  const json& cols = sub(doc, "columns");
  only_keys(cols, "columns", {"treatment", "outcome", "covariates"});
  c.columns.treatment = get<std::string>(cols, "treatment", "columns", c.columns.treatment);
  c.columns.outcome = get<std::string>(cols, "outcome", "columns", c.columns.outcome);
  c.columns.covariates =
      get<std::vector<std::string>>(cols, "covariates", "columns", c.columns.covariates);

  const json& lr = sub(doc, "learners");
  only_keys(lr, "learners",
            {"propensity", "outcome", "tau_v", "density_mean", "density_variance",
             "density_residual"});
  c.propensity = learner_at(lr, "propensity", "learners", c.propensity);
  c.outcome = learner_at(lr, "outcome", "learners", c.outcome);
  c.pd.tauv = learner_at(lr, "tau_v", "learners", c.pd.tauv);
  c.pd.density_mean = learner_at(lr, "density_mean", "learners", c.pd.density_mean);
  c.pd.density_var = learner_at(lr, "density_variance", "learners", c.pd.density_var);
  if (lr.contains("density_residual")) {
    c.pd.residual = residual_from_string(
        get<std::string>(lr, "density_residual", "learners", "kde"));
  }

  const json& bw = sub(doc, "bandwidth");
  only_keys(bw, "bandwidth", {"policy", "h", "b"});
  const auto policy = get<std::string>(bw, "policy", "bandwidth", "loocv");
  if (policy != "loocv" && policy != "fixed") {
    throw ConfigError("bandwidth.policy: expected loocv or fixed, got '" + policy + "'");
  }
  c.bandwidth.loocv = policy == "loocv";
  c.bandwidth.h = get<double>(bw, "h", "bandwidth", 0.0);
  c.bandwidth.b = get<double>(bw, "b", "bandwidth", 0.0);

  const json& gr = sub(doc, "grid");
  only_keys(gr, "grid", {"policy", "points", "lo", "hi", "values"});
  c.grid.kind = get<std::string>(gr, "policy", "grid", c.grid.kind);
  c.grid.points = get<int>(gr, "points", "grid", c.grid.points);
  c.grid.lo = get<double>(gr, "lo", "grid", c.grid.lo);
  c.grid.hi = get<double>(gr, "hi", "grid", c.grid.hi);
  c.grid.values = get<std::vector<double>>(gr, "values", "grid", c.grid.values);

  const json& oc = sub(doc, "oracle_columns");
  only_keys(oc, "oracle_columns", {"pi", "mu0", "mu1"});
  c.oracle_columns.pi = get<std::string>(oc, "pi", "oracle_columns", c.oracle_columns.pi);
  c.oracle_columns.mu0 = get<std::string>(oc, "mu0", "oracle_columns", c.oracle_columns.mu0);
  c.oracle_columns.mu1 = get<std::string>(oc, "mu1", "oracle_columns", c.oracle_columns.mu1);

  const json& ad = sub(doc, "additive");
  only_keys(ad, "additive", {"m_grid", "centering_term"});
  c.m_grid = get<std::vector<int>>(ad, "m_grid", "additive", c.m_grid);
  c.centering_term = get<bool>(ad, "centering_term", "additive", c.centering_term);

  const json& vi = sub(doc, "vimp");
  only_keys(vi, "vimp", {"subsets", "learner"});
  c.vimp_learner = learner_at(vi, "learner", "vimp", c.vimp_learner);
  if (vi.contains("subsets")) {
    if (!vi.at("subsets").is_array()) throw ConfigError("vimp.subsets: expected an array");
    for (const auto& s : vi.at("subsets")) {
      only_keys(s, "vimp.subsets[]", {"name", "columns"});
      vimp::VimpSubset vs;
      vs.columns = get<std::vector<std::string>>(s, "columns", "vimp.subsets[]", {});
      std::string joined;
      for (const auto& col : vs.columns) joined += (joined.empty() ? "" : "+") + col;
      vs.name = get<std::string>(s, "name", "vimp.subsets[]", joined);
      c.vimp_subsets.push_back(std::move(vs));
    }
  }

  const json& si = sub(doc, "simulate");
  only_keys(si, "simulate", {"scenario", "reps", "settings", "grid_points", "methods"});
  c.scenario = get<std::string>(si, "scenario", "simulate", c.scenario);
  c.reps = get<int>(si, "reps", "simulate", c.reps);
  c.settings = get<std::vector<double>>(si, "settings", "simulate", c.settings);
  c.grid_points = get<int>(si, "grid_points", "simulate", c.grid_points);
  if (si.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get<std::vector<std::string>>(si, "methods", "simulate", {})) {
      c.methods.push_back(simlab::method_from_string(m));
    }
  }

  const json& ge = sub(doc, "generate");
  only_keys(ge, "generate", {"n", "rho"});
  c.n = get<Index>(ge, "n", "generate", c.n);
  c.rho = get<double>(ge, "rho", "generate", c.rho);

  const json& sg = sub(doc, "subgroup");
  only_keys(sg, "subgroup", {"column"});
  c.subgroup = get<std::string>(sg, "column", "subgroup", c.subgroup);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

void validate(const RunConfig& c) {
  if (c.folds < 2) throw ConfigError("folds must be >= 2");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (c.draws < 100) throw ConfigError("draws must be >= 100");
  if (!(c.ratio_floor >= 0.0)) throw ConfigError("ratio_floor must be >= 0");
  if (!c.bandwidth.loocv && !(c.bandwidth.h > 0.0)) {
    throw ConfigError("bandwidth.policy fixed needs h > 0");
  }
  if (c.bandwidth.b < 0.0) throw ConfigError("bandwidth.b must be >= 0");
  if (c.grid.kind == "quantile" || c.grid.kind == "range") {
    if (c.grid.points < 1) throw ConfigError("grid.points must be >= 1");
    if (c.grid.kind == "range" && !(c.grid.lo <= c.grid.hi)) {
      throw ConfigError("grid: lo must not exceed hi");
    }
  } else if (c.grid.kind == "values") {
    if (c.grid.values.empty()) throw ConfigError("grid.values is empty");
  } else {
    throw ConfigError("grid.policy: expected quantile, range or values, got '" +
                      c.grid.kind + "'");
  }
  if (c.m_grid.empty()) throw ConfigError("additive.m_grid is empty");
  for (int m : c.m_grid) {
    if (m < 3) throw ConfigError("additive.m_grid entries must be >= 3");
  }
  c.propensity.validate();
  c.outcome.validate();
  c.pd.tauv.validate();
  c.vimp_learner.validate();
  simlab::scenario_from_string(c.scenario);
  if (c.reps < 20) throw ConfigError("simulate.reps must be >= 20");
  if (c.grid_points < 2) throw ConfigError("simulate.grid_points must be >= 2");
  if (c.methods.empty()) throw ConfigError("simulate.methods is empty");
  if (c.n < 10) throw ConfigError("generate.n must be >= 10");
  if (!(std::abs(c.rho) < 1.0)) throw ConfigError("generate.rho must lie in (-1, 1)");
}

json to_json(const RunConfig& c) {
  json j;
  j["input"] = c.input;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["folds"] = c.folds;
  j["alpha"] = c.alpha;
  j["draws"] = c.draws;
  j["columns"] = {{"treatment", c.columns.treatment},
                  {"outcome", c.columns.outcome},
                  {"covariates", c.columns.covariates}};
  j["modifiers"] = c.modifiers;
  j["learners"] = {
      {"propensity", learner_to_json(c.propensity)},
      {"outcome", learner_to_json(c.outcome)},
      {"tau_v", learner_to_json(c.pd.tauv)},
      {"density_mean", learner_to_json(c.pd.density_mean)},
      {"density_variance", learner_to_json(c.pd.density_var)},
      {"density_residual",
       c.pd.residual == learners::ResidualDensity::kKde ? "kde" : "gaussian"}};
  j["ratio_floor"] = c.ratio_floor;
  j["kernel"] = localpoly::to_string(c.kernel);
  j["mode"] = localpoly::to_string(c.mode);
  j["second_stage"] = c.per_fold ? "per_fold" : "pooled";
  j["bandwidth"] = {{"policy", c.bandwidth.loocv ? "loocv" : "fixed"},
                    {"h", c.bandwidth.h},
                    {"b", c.bandwidth.b}};
  j["grid"] = {{"policy", c.grid.kind},
               {"points", c.grid.points},
               {"lo", c.grid.lo},
               {"hi", c.grid.hi},
               {"values", c.grid.values}};
  j["oracle"] = c.oracle;
  j["oracle_columns"] = {{"pi", c.oracle_columns.pi},
                         {"mu0", c.oracle_columns.mu0},
                         {"mu1", c.oracle_columns.mu1}};
  j["additive"] = {{"m_grid", c.m_grid}, {"centering_term", c.centering_term}};
  json subsets = json::array();
  for (const auto& s : c.vimp_subsets) {
    subsets.push_back({{"name", s.name}, {"columns", s.columns}});
  }
  j["vimp"] = {{"subsets", subsets}, {"learner", learner_to_json(c.vimp_learner)}};
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.push_back(simlab::to_string(m));
  j["simulate"] = {{"scenario", c.scenario},
                   {"reps", c.reps},
                   {"settings", c.settings},
                   {"grid_points", c.grid_points},
                   {"methods", methods}};
  j["generate"] = {{"n", c.n}, {"rho", c.rho}};
  j["subgroup"] = {{"column", c.subgroup}};
  return j;
}

}  // namespace hetfx::cli
