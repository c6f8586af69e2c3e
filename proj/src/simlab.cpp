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

#include "hetfx/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "hetfx/additive.hpp"
#include "hetfx/localpoly.hpp"

namespace hetfx::simlab {
namespace {

constexpr int kFeasible = 0;
constexpr int kOracle = 1;

double gauss_pdf(double x, double mean, double var) {
  return normal_pdf((x - mean) / std::sqrt(var)) / std::sqrt(var);
}

bool all_finite(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> truth_on(const DgpConfig& cfg, Target t,
                             const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double p[1] = {grid[g]};
    out[g] = true_value(cfg, t, p);
  }
  return out;
}

double median_of(std::vector<double> x) {
  if (x.empty()) return std::nan("");
  return quantile(std::move(x), 0.5);
}

}  // namespace

void validate(const DgpConfig& cfg) {
  if (cfg.n < 10) throw ConfigError("simulation: n must be at least 10");
  if (!(std::abs(cfg.rho) < 1.0)) {
    throw ConfigError("simulation: rho must lie strictly inside (-1, 1)");
  }
}

SimSample simulate(const DgpConfig& cfg) {
  validate(cfg);
  const Index n = cfg.n;
  const double r = cfg.rho;
  const double s = std::sqrt(1.0 - r * r);
  Rng rng = make_rng(cfg.seed, 0);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd a(n), y(n);
  SimSample out;
  out.rho = r;
  out.pi.resize(n);
  out.mu0.resize(n);
  out.mu1.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double w = standard_normal(rng);
    const double z1 = standard_normal(rng);
    const double z2 = standard_normal(rng);
    const double v1 = z1;
    const double v2 = r * z1 + s * z2;
    x(i, 0) = w;
    x(i, 1) = v1;
    x(i, 2) = v2;
    out.pi(i) = expit(0.4 * w - 0.2 * v1 - 0.2 * v2);
    out.mu1(i) = w + 1.5 * v1 - 0.5 * v2;
    out.mu0(i) = 0.5 * w + 0.5 * v1 - 1.5 * v2;
    a(i) = uniform01(rng) < out.pi(i) ? 1.0 : 0.0;
    const double eps = standard_normal(rng);
    y(i) = (a(i) > 0.5 ? out.mu1(i) : out.mu0(i)) + eps;
  }
  out.data = Dataset({"W", "V1", "V2"}, std::move(x), std::move(a), std::move(y));
  return out;
}

Dataset generate(const DgpConfig& cfg) {
  SimSample s = simulate(cfg);
  if (!cfg.oracle) return s.data;
  return s.data.with_covariate("pi_true", s.pi)
      .with_covariate("mu0_true", s.mu0)
      .with_covariate("mu1_true", s.mu1);
}

std::string to_string(Target t) {
  switch (t) {
    case Target::kTau1: return "tau1";
    case Target::kTheta1: return "theta1";
    case Target::kTauV: return "tau_v";
    case Target::kTauX: return "tau_x";
    case Target::kAte: return "ate";
  }
  return "?";
}

Target target_from_string(const std::string& name) {
  for (Target t : {Target::kTau1, Target::kTheta1, Target::kTauV, Target::kTauX,
                   Target::kAte}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown simulation target '" + name + "'");
}

double true_value(const DgpConfig& cfg, Target target,
                  std::span<const double> point) {
  validate(cfg);
  auto need = [&](std::size_t k) {
    if (point.size() != k) {
      throw ConfigError("true_value(" + to_string(target) + ") takes " +
                        std::to_string(k) + " coordinate(s)");
    }
  };
  switch (target) {
    case Target::kTau1:
      need(1);
      return (1.0 + cfg.rho) * point[0];
    case Target::kTheta1:
      need(1);
      return point[0];
    case Target::kTauV:
      need(2);
      return point[0] + point[1];
    case Target::kTauX:
      need(3);
      return 0.5 * point[0] + point[1] + point[2];
    case Target::kAte:
      need(0);
      return 0.0;
  }
  return 0.0;
}

crossfit::NuisanceFit oracle_nuisances(const SimSample& s,
                                       const FoldAssignment& folds,
                                       Corruption c) {
  Eigen::VectorXd pi = s.pi, mu0 = s.mu0, mu1 = s.mu1;
  if (c == Corruption::kOutcome) {
    mu0.setZero();
    mu1.setZero();
  } else if (c == Corruption::kTreatmentDensity) {
    const Eigen::MatrixXd& x = s.data.x();
    for (Index i = 0; i < pi.size(); ++i) {
      pi(i) = expit(-0.4 * x(i, 0) + 0.2 * x(i, 1) + 0.2 * x(i, 2));
    }
  }
  return crossfit::fixed_nuisances(pi, mu0, mu1, folds);
}

pdcurve::PdNuisance oracle_pd_nuisance(const SimSample& s,
                                       const FoldAssignment& folds,
                                       Corruption c) {
  const Index n = s.data.n();
  const double r = s.rho;
  const crossfit::NuisanceFit nf = oracle_nuisances(s, folds, c);
  pdcurve::PdNuisance out;
  out.j = 0;
  out.modifiers = s.data.columns({"V1", "V2"});
  out.fold_of = folds.fold_of;
  out.dr_resid = crossfit::dr_residual(s.data, nf);
  out.tau_x = nf.tau_x();
  out.tau_v.resize(n);
  out.cond_density.resize(n);
  out.marginal_density.resize(n);
  out.theta.resize(n);
  const bool zero = c == Corruption::kOutcome;
  for (Index i = 0; i < n; ++i) {
    const double v1 = out.modifiers(i, 0), v2 = out.modifiers(i, 1);
    out.tau_v(i) = zero ? 0.0 : v1 + v2;
    out.theta(i) = zero ? 0.0 : v1;
    out.marginal_density(i) = normal_pdf(v1);
    out.cond_density(i) = c == Corruption::kTreatmentDensity
                              ? normal_pdf(v1)
                              : gauss_pdf(v1, r * v2, 1.0 - r * r);
  }
  const Eigen::VectorXd v2 = out.modifiers.col(1);
  out.tauv_slice = [v2, zero](double vbar) {
    if (zero) return Eigen::VectorXd(Eigen::VectorXd::Zero(v2.size()));
    return Eigen::VectorXd(v2.array() + vbar);
  };
  return out;
}

crossfit::NuisanceFit feasible_nuisances(const SimSample& s,
                                         const FoldAssignment& folds,
                                         std::uint64_t seed) {
  return crossfit::fit_nuisances(s.data, folds, learners::LearnerSpec::logistic(),
                                 learners::LearnerSpec::linear_ridge(0.0), seed);
}

pdcurve::PdSpecs feasible_pd_specs() {
  pdcurve::PdSpecs specs;
  specs.residual = learners::ResidualDensity::kGaussian;
  specs.tauv = learners::LearnerSpec::linear_ridge(0.0);
  return specs;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kUnivariatePlain: return "univariate_plain";
    case Method::kUnivariateDebiased: return "univariate_debiased";
    case Method::kGam: return "gam";
    case Method::kPdPlain: return "pd_plain";
    case Method::kPdDebiased: return "pd_debiased";
  }
  return "?";
}

std::string to_string(Nuisance k) {
  return k == Nuisance::kOracle ? "oracle" : "feasible";
}

Method method_from_string(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown simulation method '" + name + "'");
}

std::vector<Method> all_methods() {
  return {Method::kUnivariatePlain, Method::kUnivariateDebiased, Method::kGam,
          Method::kPdPlain, Method::kPdDebiased};
}

Target method_target(Method m) {
  return m == Method::kUnivariatePlain || m == Method::kUnivariateDebiased
             ? Target::kTau1
             : Target::kTheta1;
}

ReplicateResult run_replicate(const DgpConfig& cfg, const ReplicateOptions& options) {
  if (options.grid.empty()) throw ConfigError("simulation: empty evaluation grid");
  const SimSample s = simulate(cfg);
  const FoldAssignment folds =
      assign_folds(s.data.n(), options.folds, derive_seed(cfg.seed, 1));
  const Eigen::VectorXd v1 = s.data.x().col(1);
  const std::vector<double> tau1 = truth_on(cfg, Target::kTau1, options.grid);
  auto wants = [&](Method m) {
    return std::find(options.methods.begin(), options.methods.end(), m) !=
           options.methods.end();
  };

  ReplicateResult out;
  for (int k : {kFeasible, kOracle}) {
    const Nuisance nk = k == kOracle ? Nuisance::kOracle : Nuisance::kFeasible;
    auto record = [&](Method m, auto&& body) {
      if (!wants(m)) return;
      MethodEstimate e;
      e.method = m;
      e.nuisance = nk;
      try {
        e.curve = body();
        e.ok = all_finite(e.curve);
        if (!e.ok) e.error = "curve has skipped grid points";
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
      out.estimates.push_back(std::move(e));
    };

    crossfit::NuisanceFit nf;
    try {
      nf = k == kOracle ? oracle_nuisances(s, folds)
                        : feasible_nuisances(s, folds, derive_seed(cfg.seed, 2));
    } catch (const std::exception& ex) {
      for (Method m : options.methods) {
        MethodEstimate e;
        e.method = m;
        e.nuisance = nk;
        e.error = ex.what();
        out.estimates.push_back(std::move(e));
      }
      continue;
    }

    try {
      const crossfit::AteResult ate = crossfit::estimate_ate(s.data, nf, 0.05);
      out.ate[k] = ate.ate;
      out.ate_ok[k] = std::isfinite(ate.ate);
      out.ate_covers[k] = ate.lo <= 0.0 && 0.0 <= ate.hi;
    } catch (const std::exception&) {
      out.ate_ok[k] = false;
    }

    const Eigen::VectorXd phi = crossfit::pseudo_cate(s.data, nf).phi;

    // Univariate curves share one LOOCV bandwidth.
    if (wants(Method::kUnivariatePlain) || wants(Method::kUnivariateDebiased)) {
      bands::CurveOptions co;
      co.grid = options.grid;
      double h = 0.0;
      std::string herr;
      try {
        h = bands::resolve_bandwidths(v1, phi, co).first;
      } catch (const std::exception& ex) {
        herr = ex.what();
      }
      co.h = h;
      record(Method::kUnivariatePlain, [&] {
        if (!herr.empty()) throw NumericError(herr);
        bands::CurveOptions plain = co;
        plain.mode = localpoly::Mode::kPlain;
        plain.bands = false;
        return bands::cate_curve(v1, phi, plain).estimate;
      });
      record(Method::kUnivariateDebiased, [&] {
        if (!herr.empty()) throw NumericError(herr);
        bands::CurveOptions deb = co;
        deb.mode = localpoly::Mode::kDebiased;
        deb.bands = options.bands;
        deb.band = options.band;
        const bands::CurveEstimate ce = bands::cate_curve(v1, phi, deb);
        if (options.bands && all_finite(ce.unif_lo) && all_finite(ce.unif_hi)) {
          out.band_ok[k] = true;
          bool covers = true;
          std::vector<double> widths(tau1.size());
          for (std::size_t g = 0; g < tau1.size(); ++g) {
            covers = covers && ce.unif_lo[g] <= tau1[g] && tau1[g] <= ce.unif_hi[g];
            widths[g] = ce.unif_hi[g] - ce.unif_lo[g];
          }
          out.band_covers[k] = covers;
          out.band_width[k] = median_of(widths);
        }
        return ce.estimate;
      });
    }

    record(Method::kGam, [&] {
      const additive::AdditiveFit fit = additive::fit_additive(
          phi, s.data.columns({"V1", "V2"}), {"V1", "V2"}, {false, false});
      const Eigen::VectorXd h1 = fit.component(0, as_vector(options.grid));
      return std::vector<double>(h1.data(), h1.data() + h1.size());
    });

    if (wants(Method::kPdPlain) || wants(Method::kPdDebiased)) {
      pdcurve::PdNuisance pdn;
      std::string perr;
      double h = 0.0;
      try {
        pdn = k == kOracle
                  ? oracle_pd_nuisance(s, folds)
                  : pdcurve::build_pd_nuisance(s.data, nf, {"V1", "V2"}, 0,
                                               feasible_pd_specs(),
                                               derive_seed(cfg.seed, 3));
        const Eigen::VectorXd phi_pd = pdcurve::pseudo_pd(pdn).phi_pd;
        bands::CurveOptions co;
        h = bands::resolve_bandwidths(v1, phi_pd, co).first;
      } catch (const std::exception& ex) {
        perr = ex.what();
      }
      for (Method m : {Method::kPdPlain, Method::kPdDebiased}) {
        record(m, [&] {
          if (!perr.empty()) throw NumericError(perr);
          bands::CurveOptions co;
          co.grid = options.grid;
          co.h = h;
          co.bands = false;
          co.mode = m == Method::kPdPlain ? localpoly::Mode::kPlain
                                          : localpoly::Mode::kDebiased;
          return pdcurve::pd_curve(pdn, co).estimate;
        });
      }
    }
  }
  return out;
}

std::string to_string(ScenarioKind k) {
  return k == ScenarioKind::kVaryN ? "vary_n" : "vary_rho";
}

ScenarioKind scenario_from_string(const std::string& name) {
  if (name == "vary_n") return ScenarioKind::kVaryN;
  if (name == "vary_rho") return ScenarioKind::kVaryRho;
  throw ConfigError("unknown scenario '" + name + "' (vary_n or vary_rho)");
}

std::vector<double> default_settings(ScenarioKind kind) {
  if (kind == ScenarioKind::kVaryN) return {500, 1000, 1500, 2000};
  return {0.0, 0.2, 0.4, 0.6};
}

std::vector<double> rmse_weights(const std::vector<double>& grid) {
  std::vector<double> w(grid.size());
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    w[g] = normal_pdf(grid[g]);
    total += w[g];
  }
  for (double& x : w) x /= total;
  return w;
}

const MethodSummary& ScenarioResult::find(Method m, Nuisance k,
                                          double setting) const {
  for (const auto& r : rows) {
    if (r.method == m && r.nuisance == k && r.setting == setting) return r;
  }
  throw ConfigError("scenario has no row for " + to_string(m) + "/" +
                    to_string(k) + " at " + std::to_string(setting));
}

const SettingSummary& ScenarioResult::find_setting(double setting) const {
  for (const auto& s : settings) {
    if (s.setting == setting) return s;
  }
  throw ConfigError("scenario has no setting " + std::to_string(setting));
}

ScenarioResult run_scenario(ScenarioKind kind, const ScenarioOptions& options) {
  if (options.reps < 20) throw ConfigError("simulation: reps must be >= 20");
  if (options.grid_points < 2) throw ConfigError("simulation: grid_points must be >= 2");
  if (options.methods.empty()) throw ConfigError("simulation: no methods selected");

  ScenarioResult res;
  res.kind = kind;
  res.reps = options.reps;
  res.seed = options.seed;
  res.grid = linspace(-2.0, 2.0, options.grid_points);
  const std::vector<double> weights = rmse_weights(res.grid);
  const std::vector<double> settings =
      options.settings.empty() ? default_settings(kind) : options.settings;
  const auto G = res.grid.size();

  ReplicateOptions ro;
  ro.grid = res.grid;
  ro.methods = options.methods;
  ro.bands = options.bands;

  for (std::size_t si = 0; si < settings.size(); ++si) {
    DgpConfig base;
    if (kind == ScenarioKind::kVaryN) {
      base.n = static_cast<Index>(settings[si]);
      base.rho = 0.2;
    } else {
      base.n = 1000;
      base.rho = settings[si];
    }
    validate(base);

    std::vector<ReplicateResult> reps(static_cast<std::size_t>(options.reps));
    parallel_for(reps.size(), [&](std::size_t r) {
      DgpConfig cfg = base;
      cfg.seed = derive_seed(options.seed, si, r);
      ReplicateOptions rop = ro;
      rop.band.seed = derive_seed(cfg.seed, 4);
      reps[r] = run_replicate(cfg, rop);
    });

    SettingSummary ss;
    ss.setting = settings[si];
    ss.n = base.n;
    ss.rho = base.rho;
    for (int k : {kFeasible, kOracle}) {
      std::vector<double> ates;
      int covered = 0, banded = 0, band_cov = 0;
      for (const auto& rr : reps) {
        if (rr.ate_ok[k]) {
          ates.push_back(rr.ate[k]);
          covered += rr.ate_covers[k] ? 1 : 0;
        }
        if (rr.band_ok[k]) {
          ++banded;
          band_cov += rr.band_covers[k] ? 1 : 0;
        }
      }
      ss.ate_reps[k] = static_cast<int>(ates.size());
      if (!ates.empty()) {
        ss.ate_mean[k] = mean(ates);
        ss.ate_mc_se[k] = std::sqrt(variance(ates) / static_cast<double>(ates.size()));
        ss.ate_coverage[k] = covered / static_cast<double>(ates.size());
      }
      ss.band_reps[k] = banded;
      if (banded > 0) ss.band_coverage[k] = band_cov / static_cast<double>(banded);
    }
    res.settings.push_back(ss);

    for (Nuisance nk : {Nuisance::kFeasible, Nuisance::kOracle}) {
      for (Method m : options.methods) {
        const std::vector<double> truth = truth_on(base, method_target(m), res.grid);
        MethodSummary ms;
        ms.method = m;
        ms.nuisance = nk;
        ms.setting = settings[si];
        ms.n = base.n;
        ms.rho = base.rho;
        std::vector<std::vector<double>> err;
        std::vector<std::vector<double>> curves;
        std::vector<std::size_t> rep_of;
        for (std::size_t ri = 0; ri < reps.size(); ++ri) {
          for (const auto& e : reps[ri].estimates) {
            if (e.method != m || e.nuisance != nk) continue;
            if (!e.ok) {
              ++ms.failures;
              if (res.diagnostics.size() < 50) {
                res.diagnostics.push_back(to_string(m) + "/" + to_string(nk) +
                                          " at " + std::to_string(settings[si]) +
                                          ": " + e.error);
              }
              continue;
            }
            std::vector<double> d(G);
            for (std::size_t g = 0; g < G; ++g) d[g] = e.curve[g] - truth[g];
            err.push_back(std::move(d));
            curves.push_back(e.curve);
            rep_of.push_back(ri);
          }
        }
        ms.reps_ok = static_cast<int>(err.size());
        if (ms.failures > 0.05 * options.reps) {
          throw NumericError("simulation: " + to_string(m) + "/" + to_string(nk) +
                             " failed in " + std::to_string(ms.failures) + " of " +
                             std::to_string(options.reps) + " replicates");
        }
        const double M = static_cast<double>(ms.reps_ok);
        std::vector<double> rmse_g(G, 0.0);
        ms.mean_curve.assign(G, 0.0);
        ms.se_curve.assign(G, 0.0);
        for (std::size_t g = 0; g < G; ++g) {
          std::vector<double> col(err.size()), cv(err.size());
          double sq = 0.0;
          for (std::size_t r = 0; r < err.size(); ++r) {
            sq += err[r][g] * err[r][g];
            cv[r] = curves[r][g];
          }
          rmse_g[g] = std::sqrt(sq / M);
          ms.mean_curve[g] = mean(cv);
          ms.se_curve[g] = std::sqrt(variance(cv) / M);
          ms.rmse += weights[g] * rmse_g[g];
        }
        std::vector<double> u(err.size()), per_rep(err.size());
        for (std::size_t r = 0; r < err.size(); ++r) {
          double ur = 0.0, pr = 0.0;
          for (std::size_t g = 0; g < G; ++g) {
            const double e2 = err[r][g] * err[r][g];
            if (rmse_g[g] > 0.0) ur += weights[g] * e2 / (2.0 * rmse_g[g]);
            pr += weights[g] * e2;
          }
          u[r] = ur;
          per_rep[r] = std::sqrt(pr);
        }
        ms.influence.assign(reps.size(), std::nan(""));
        for (std::size_t r = 0; r < err.size(); ++r) ms.influence[rep_of[r]] = u[r];
        ms.mc_se = std::sqrt(variance(u) / M);
        ms.median_rmse = median_of(per_rep);
        res.rows.push_back(std::move(ms));
      }
    }
  }
  return res;
}

double paired_mc_se(const MethodSummary& a, const MethodSummary& b) {
  std::vector<double> d;
  const std::size_t m = std::min(a.influence.size(), b.influence.size());
  for (std::size_t r = 0; r < m; ++r) {
    if (std::isfinite(a.influence[r]) && std::isfinite(b.influence[r])) {
      d.push_back(a.influence[r] - b.influence[r]);
    }
  }
  if (d.size() < 2) return std::nan("");
  return std::sqrt(variance(d) / static_cast<double>(d.size()));
}

std::string scenario_csv(const ScenarioResult& r) {
  std::string out =
      "kind,method,nuisance,setting,n,rho,rmse,mc_se,median_rmse,reps_ok,failures\n";
  char buf[512];
  for (const auto& m : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.17g,%lld,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  to_string(r.kind).c_str(), to_string(m.method).c_str(),
                  to_string(m.nuisance).c_str(), m.setting,
                  static_cast<long long>(m.n), m.rho, m.rmse, m.mc_se,
                  m.median_rmse, m.reps_ok, m.failures);
    out += buf;
  }
  return out;
}

CoverageReport gaussian_coverage_check(const DgpConfig& dgp,
                                       const CoverageConfig& config, int reps,
                                       double alpha, std::uint64_t seed) {
  validate(dgp);
  if (reps < 1) throw ConfigError("coverage check: reps must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("coverage check: alpha must be > 0");
  const bool gam = config.method == Method::kGam;
  if (!gam && config.method != Method::kUnivariatePlain &&
      config.method != Method::kUnivariateDebiased) {
    throw ConfigError("coverage check supports the univariate and GAM methods");
  }
  const std::vector<double> grid =
      linspace(config.grid_lo, config.grid_hi, config.grid_points);

  struct Rep {
    bool ok = false, covers = false;
    double width = 0.0;
  };
  std::vector<Rep> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), [&](std::size_t r) {
    DgpConfig cfg = dgp;
    cfg.seed = derive_seed(seed, r);
    try {
      const SimSample s = simulate(cfg);
      const FoldAssignment folds = assign_folds(s.data.n(), 2, derive_seed(cfg.seed, 1));
      const crossfit::NuisanceFit nf =
          config.nuisance == Nuisance::kOracle
              ? oracle_nuisances(s, folds)
              : feasible_nuisances(s, folds, derive_seed(cfg.seed, 2));
      const Eigen::VectorXd phi = crossfit::pseudo_cate(s.data, nf).phi;
      const Eigen::VectorXd v1 = s.data.x().col(1);
      bands::CurveEstimate ce;
      std::vector<double> truth(grid.size());
      if (gam) {
        const additive::AdditiveFit fit = additive::fit_additive(
            phi, s.data.columns({"V1", "V2"}), {"V1", "V2"}, {false, false});
        additive::ComponentBandOptions bo;
        bo.alpha = std::min(alpha, 1.0);
        bo.draws = config.draws;
        bo.seed = derive_seed(cfg.seed, 4);
        ce = additive::component_band(fit, 0, grid, bo);
        // The component is centred at the sample mean of V1.
        const double vbar = v1.mean();
        for (std::size_t g = 0; g < grid.size(); ++g) truth[g] = grid[g] - vbar;
      } else {
        bands::CurveOptions co;
        co.grid = grid;
        co.mode = config.method == Method::kUnivariatePlain
                      ? localpoly::Mode::kPlain
                      : localpoly::Mode::kDebiased;
        co.band.alpha = alpha;
        co.band.draws = config.draws;
        co.band.seed = derive_seed(cfg.seed, 4);
        ce = bands::cate_curve(v1, phi, co);
        truth = truth_on(cfg, Target::kTau1, grid);
      }
      if (!all_finite(ce.unif_lo) || !all_finite(ce.unif_hi)) return;
      Rep& rep = out[r];
      rep.ok = true;
      rep.covers = true;
      std::vector<double> widths(grid.size());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        rep.covers = rep.covers && ce.unif_lo[g] <= truth[g] && truth[g] <= ce.unif_hi[g];
        widths[g] = ce.unif_hi[g] - ce.unif_lo[g];
      }
      rep.width = median_of(widths);
    } catch (const std::exception&) {
      out[r].ok = false;
    }
  });

  CoverageReport rep;
  std::vector<double> widths;
  int covered = 0;
  for (const auto& r : out) {
    if (!r.ok) {
      ++rep.failures;
      continue;
    }
    ++rep.reps;
    covered += r.covers ? 1 : 0;
    widths.push_back(r.width);
  }
  if (rep.reps > 0) rep.coverage = covered / static_cast<double>(rep.reps);
  rep.median_width = median_of(widths);
  return rep;
}

}  // namespace hetfx::simlab
