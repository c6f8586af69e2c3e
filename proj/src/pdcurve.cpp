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

#include "hetfx/pdcurve.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hetfx::pdcurve {
namespace {

// Linear interpolation on an equispaced table, clamped at the ends.
double interp(const std::vector<double>& nodes, const Eigen::VectorXd& values,
              double x) {
  const auto q = static_cast<Index>(nodes.size());
  if (q == 1) return values(0);
  const double step = (nodes.back() - nodes.front()) / static_cast<double>(q - 1);
  const double pos = std::clamp((x - nodes.front()) / step, 0.0,
                                static_cast<double>(q - 1));
  const auto k = std::min<Index>(static_cast<Index>(pos), q - 2);
  const double frac = pos - static_cast<double>(k);
  return values(k) + frac * (values(k + 1) - values(k));
}

}  // namespace

PdNuisance build_pd_nuisance(const Dataset& data, const crossfit::NuisanceFit& nf,
                             const std::vector<std::string>& modifiers, int j,
                             const PdSpecs& specs, std::uint64_t seed) {
  const Index n = data.n();
  const auto d = static_cast<int>(modifiers.size());
  if (j < 0 || j >= d) throw ConfigError("pd: modifier index out of range");
  if (d < 2) {
    throw ConfigError("pd: partial dependence needs at least two modifiers; "
                      "with one modifier use the univariate curve");
  }
  const int k = nf.folds.k;
  if (static_cast<int>(nf.mu1_models.size()) != k ||
      static_cast<int>(nf.mu0_models.size()) != k) {
    throw ConfigError("pd: the nuisance fit carries no fold models");
  }
  if (specs.table_points < 2) throw ConfigError("pd: table_points must be >= 2");
  const ModifierSpec ms = make_modifier_spec(data, modifiers);
  if (ms.kinds[j] != ModifierKind::kContinuous) {
    throw ConfigError("pd: modifier '" + modifiers[j] + "' must be continuous");
  }

  PdNuisance out;
  out.j = j;
  out.modifiers = data.columns(modifiers);
  out.fold_of = nf.folds.fold_of;
  out.dr_resid = crossfit::dr_residual(data, nf);
  out.tau_x = nf.tau_x();
  out.tau_v.resize(n);
  out.cond_density.resize(n);
  out.marginal_density.resize(n);
  out.theta.resize(n);

  const Eigen::MatrixXd& v = out.modifiers;
  const Eigen::VectorXd vj = v.col(j);
  const Eigen::MatrixXd rest_all = learners::drop_column(v, j);
  const std::vector<double> nodes =
      linspace(vj.minCoeff(), vj.maxCoeff(), specs.table_points);

  auto tauv_models = std::make_shared<std::vector<learners::FittedModel>>(k);
  std::vector<learners::ConditionalDensity> cds(k);
  std::vector<std::vector<std::string>> fold_warnings(k);
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t fs) {
    const int f = static_cast<int>(fs);
    const std::vector<Index> train = nf.folds.rows_out(f);
    const Eigen::MatrixXd vt = v(train, Eigen::all);
    cds[f] = learners::fit_conditional_density(vt, j, specs.density_mean,
                                               specs.density_var, specs.residual);
    for (const auto& w : cds[f].warnings) {
      fold_warnings[f].push_back("fold " + std::to_string(f) + ": " + w);
    }
    const Eigen::MatrixXd xt = data.x()(train, Eigen::all);
    const Eigen::VectorXd tx =
        nf.mu1_models[f].predict(xt) - nf.mu0_models[f].predict(xt);
    (*tauv_models)[f] = learners::fit(specs.tauv, vt, tx,
                                      learners::Task::kRegression,
                                      derive_seed(seed, 0x7076ULL, f));
  });
  for (const auto& w : fold_warnings) {
    out.warnings.insert(out.warnings.end(), w.begin(), w.end());
  }

  // Tabulate theta_j and f_j per fold over the nodes, averaging over every
  // observed V_{-j}.
  for (int f = 0; f < k; ++f) {
    const learners::FittedModel& tv = (*tauv_models)[f];
    const learners::ConditionalDensity& cd = cds[f];
    const Eigen::VectorXd mu = cd.conditional_mean(rest_all);
    const Eigen::VectorXd sd = cd.conditional_sd(rest_all);
    Eigen::VectorXd theta_tab(specs.table_points), f_tab(specs.table_points);
    parallel_for(nodes.size(), [&](std::size_t q) {
      Eigen::MatrixXd probe = v;
      probe.col(j).setConstant(nodes[q]);
      theta_tab(static_cast<Index>(q)) = tv.predict(probe).mean();
      double s = 0.0;
      for (Index l = 0; l < n; ++l) {
        s += cd.residual_density((nodes[q] - mu(l)) / sd(l)) / sd(l);
      }
      f_tab(static_cast<Index>(q)) = s / static_cast<double>(n);
    });
    const std::vector<Index> rows = nf.folds.rows_in(f);
    if (rows.empty()) continue;
    const Eigen::MatrixXd vf = v(rows, Eigen::all);
    out.tau_v(rows) = tv.predict(vf);
    out.cond_density(rows) =
        cd.evaluate(vf.col(j), learners::drop_column(vf, j));
    for (Index r : rows) {
      out.theta(r) = interp(nodes, theta_tab, vj(r));
      out.marginal_density(r) = interp(nodes, f_tab, vj(r));
    }
  }

  const std::vector<int> fold_of = nf.folds.fold_of;
  const Eigen::MatrixXd vcopy = v;
  out.tauv_slice = [tauv_models, fold_of, vcopy, j, k](double vbar) {
    Eigen::VectorXd res(vcopy.rows());
    for (int f = 0; f < k; ++f) {
      std::vector<Index> rows;
      for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == f) rows.push_back(static_cast<Index>(i));
      }
      if (rows.empty()) continue;
      Eigen::MatrixXd probe = vcopy(rows, Eigen::all);
      probe.col(j).setConstant(vbar);
      res(rows) = (*tauv_models)[f].predict(probe);
    }
    return res;
  };
  return out;
}

PdPseudoOutcomes pseudo_pd(const PdNuisance& pdn, double ratio_floor) {
  if (!(ratio_floor >= 0.0)) throw ConfigError("pd: ratio floor must be >= 0");
  const Index n = pdn.dr_resid.size();
  for (const Eigen::VectorXd* col :
       {&pdn.tau_x, &pdn.tau_v, &pdn.cond_density, &pdn.marginal_density,
        &pdn.theta}) {
    if (col->size() != n) throw DataError("pd: nuisance components differ in length");
  }
  PdPseudoOutcomes out;
  out.j = pdn.j;
  out.phi_pd.resize(n);
  out.weighted_residual.resize(n);
  out.theta_term = pdn.theta;
  for (Index i = 0; i < n; ++i) {
    const double fj = pdn.marginal_density(i);
    double fc = pdn.cond_density(i);
    const double floor = ratio_floor * fj;
    if (fc < floor) {
      fc = floor;
      ++out.floored_rows;
    }
    const double ratio = fc > 0.0 ? fj / fc : 0.0;
    const double bracket = pdn.dr_resid(i) + pdn.tau_x(i) - pdn.tau_v(i);
    out.weighted_residual(i) = bracket * ratio;
    out.phi_pd(i) = out.weighted_residual(i) + pdn.theta(i);
  }
  if (!out.phi_pd.allFinite()) {
    throw NumericError("pd: pseudo-outcomes are not finite (zero density?)");
  }
  if (static_cast<double>(out.floored_rows) > 0.05 * static_cast<double>(n)) {
    out.warnings.push_back("density-ratio floor engaged on " +
                           std::to_string(out.floored_rows) + " of " +
                           std::to_string(n) + " rows");
  }
  return out;
}

bands::CurveEstimate pd_curve(const PdNuisance& pdn,
                              const bands::CurveOptions& options,
                              const std::vector<int>* fold_of) {
  const PdPseudoOutcomes po = pseudo_pd(pdn);
  const Eigen::VectorXd v = pdn.modifiers.col(pdn.j);
  bands::CurveEstimate ce =
      bands::pd_smooth(v, po.phi_pd, pdn.tauv_slice, options, fold_of);
  ce.diagnostics.insert(ce.diagnostics.end(), pdn.warnings.begin(),
                        pdn.warnings.end());
  ce.diagnostics.insert(ce.diagnostics.end(), po.warnings.begin(),
                        po.warnings.end());
  return ce;
}

}  // namespace hetfx::pdcurve
