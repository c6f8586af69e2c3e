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

#include "hetfx/additive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetfx::additive {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd term_columns(const AdditiveTerm& t, const Eigen::VectorXd& v) {
  if (t.binary) return v;
  return t.basis.evaluate(v);
}

}  // namespace

Eigen::MatrixXd AdditiveFit::component_design(int j, const Eigen::VectorXd& v) const {
  if (j < 0 || j >= static_cast<int>(terms.size())) {
    throw ConfigError("additive: component index out of range");
  }
  const AdditiveTerm& t = terms[j];
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(v.size(), coef.size());
  a.middleCols(t.offset, t.width) =
      term_columns(t, v).rowwise() - t.basis_mean;
  return a;
}

Eigen::VectorXd AdditiveFit::component(int j, const Eigen::VectorXd& v) const {
  return component_design(j, v) * coef;
}

Eigen::VectorXd AdditiveFit::predict(const Eigen::MatrixXd& modifiers) const {
  if (modifiers.cols() != static_cast<Index>(terms.size())) {
    throw DataError("additive predict: wrong number of modifier columns");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(modifiers.rows(), intercept);
  for (int j = 0; j < static_cast<int>(terms.size()); ++j) {
    out += component(j, modifiers.col(j));
  }
  return out;
}

AdditiveFit fit_additive(const Eigen::VectorXd& phi,
                         const Eigen::MatrixXd& modifiers,
                         const std::vector<std::string>& names,
                         const std::vector<bool>& binary,
                         const std::vector<int>& m_grid) {
  const Index n = modifiers.rows();
  const auto d = static_cast<Index>(modifiers.cols());
  if (d == 0) throw ConfigError("additive: at least one modifier is required");
  if (static_cast<Index>(names.size()) != d ||
      static_cast<Index>(binary.size()) != d) {
    throw ConfigError("additive: names/kinds do not match modifier columns");
  }
  if (phi.size() != n) throw DataError("additive: phi length differs from rows");
  if (m_grid.empty()) throw ConfigError("additive: empty basis grid");
  std::vector<int> grid = m_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 3) {
    throw ConfigError("additive: basis dimensions must be >= 3");
  }
  if (static_cast<double>(grid.back() * d + 1) > static_cast<double>(n) / 2.0) {
    throw ConfigError("additive: max(m) * d + 1 = " +
                      std::to_string(grid.back() * d + 1) +
                      " exceeds n/2 = " + std::to_string(n / 2) +
                      "; use smaller basis dimensions");
  }

  AdditiveFit best;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  std::string last_error;
  for (int m : grid) {
    std::vector<AdditiveTerm> terms;
    Index cols = 1;
    for (Index j = 0; j < d; ++j) {
      AdditiveTerm t;
      t.name = names[j];
      t.binary = binary[j];
      t.offset = cols;
      if (!t.binary) t.basis = splines::make_spline_basis(modifiers.col(j), m, t.name);
      t.width = t.binary ? 1 : m;
      cols += t.width;
      terms.push_back(std::move(t));
    }
    Eigen::MatrixXd x(n, cols);
    x.col(0).setOnes();
    for (auto& t : terms) {
      x.middleCols(t.offset, t.width) = term_columns(t, modifiers.col(&t - &terms[0]));
      t.basis_mean = x.middleCols(t.offset, t.width).colwise().mean();
    }
    splines::OlsFit fit;
    try {
      fit = splines::ols(x, phi);
    } catch (const NumericError& e) {
      last_error = e.what();
      best.m_candidates.push_back(m);
      best.loocv_scores.push_back(kNaN);
      continue;
    }
    best.m_candidates.push_back(m);
    best.loocv_scores.push_back(fit.loocv);
    if (!found || fit.loocv < best_score - 1e-12 * (1.0 + std::abs(best_score))) {
      found = true;
      best_score = fit.loocv;
      best.m = m;
      best.terms = std::move(terms);
      best.coef = fit.coef;
      best.design = std::move(x);
      best.residuals = fit.residuals;
    }
  }
  if (!found) {
    throw NumericError("additive: design is singular for every basis dimension (" +
                       last_error + ")");
  }
  best.intercept = best.coef(0);
  for (const auto& t : best.terms) {
    best.intercept += t.basis_mean.dot(best.coef.segment(t.offset, t.width));
  }
  const Eigen::MatrixXd gram =
      best.design.transpose() * best.design / static_cast<double>(n);
  best.gram_inv = gram.ldlt().solve(
      Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  best.modifier_means = modifiers.colwise().mean().transpose();
  return best;
}

bands::CurveEstimate component_band(const AdditiveFit& fit, int j,
                                    const std::vector<double>& grid,
                                    const ComponentBandOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (options.draws < 1) throw ConfigError("draws must be positive");
  const Index n = fit.n();
  const auto g = static_cast<Index>(grid.size());
  const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(grid.data(), g);
  const Eigen::MatrixXd a = fit.component_design(j, gv);  // g x p
  const Eigen::VectorXd est = a * fit.coef;

  // psi(i, v) = a(v)' G^-1 x_i r_i.
  const Eigen::MatrixXd lever = fit.design * fit.gram_inv;  // n x p
  Eigen::MatrixXd psi = (lever * a.transpose()).array().colwise() *
                        fit.residuals.array();  // n x g
  if (options.centering_term) {
    const AdditiveTerm& t = fit.terms[j];
    const Eigen::VectorXd own =
        (fit.design.middleCols(t.offset, t.width).rowwise() - t.basis_mean) *
        fit.coef.segment(t.offset, t.width);
    psi.colwise() -= own;
  }
  // Residuals at rounding level mean the truth lies in the span; treat them
  // as exactly zero rather than studentising noise.
  const double scale = std::max(1.0, (fit.design * fit.coef).cwiseAbs().maxCoeff());
  const bool exact = fit.residuals.cwiseAbs().maxCoeff() <= 1e-10 * scale;
  Eigen::VectorXd se(g);
  for (Index c = 0; c < g; ++c) {
    se(c) = exact ? 0.0 : psi.col(c).norm() / static_cast<double>(n);
  }

  bands::CurveEstimate ce;
  ce.grid = grid;
  ce.estimate.assign(est.data(), est.data() + g);
  ce.alpha = options.alpha;
  ce.n = n;
  ce.h = kNaN;
  ce.b = kNaN;
  ce.kind = "additive";
  ce.target = "centered";
  ce.sigma.resize(grid.size());
  for (Index c = 0; c < g; ++c) ce.sigma[c] = se(c) * std::sqrt(static_cast<double>(n));

  const bool degenerate = options.alpha >= 1.0;
  const double z = degenerate ? 0.0 : normal_quantile(1.0 - options.alpha / 2.0);
  std::vector<Index> cols;
  for (Index c = 0; c < g; ++c) {
    if (se(c) > 0.0) cols.push_back(c);
  }
  double crit = z;
  if (cols.empty()) {
    ce.diagnostics.push_back("component '" + fit.terms[j].name +
                             "': residuals are zero; band has zero width");
  } else if (!degenerate) {
    std::vector<double> sup(static_cast<std::size_t>(options.draws));
    parallel_for(sup.size(), [&](std::size_t d) {
      Rng rng = make_rng(options.seed, d);
      Eigen::RowVectorXd xi(n);
      for (Index i = 0; i < n; ++i) xi(i) = standard_normal(rng);
      double m = 0.0;
      for (Index c : cols) {
        const double t = xi.dot(psi.col(c)) / static_cast<double>(n) / se(c);
        m = std::max(m, std::abs(t));
      }
      sup[d] = m;
    });
    crit = std::max(quantile(std::move(sup), 1.0 - options.alpha), z);
  }
  ce.crit = crit;
  ce.pw_lo.resize(grid.size());
  ce.pw_hi.resize(grid.size());
  ce.unif_lo.resize(grid.size());
  ce.unif_hi.resize(grid.size());
  for (Index c = 0; c < g; ++c) {
    ce.pw_lo[c] = est(c) - z * se(c);
    ce.pw_hi[c] = est(c) + z * se(c);
    ce.unif_lo[c] = est(c) - crit * se(c);
    ce.unif_hi[c] = est(c) + crit * se(c);
  }
  return ce;
}

}  // namespace hetfx::additive
