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

#include "hetfx/vimp.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hetfx::vimp {
namespace {

// Out-of-fold predictions of phi regressed on the given covariate columns.
Eigen::VectorXd crossfit_regression(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& phi,
                                    const FoldAssignment& folds,
                                    const learners::LearnerSpec& spec,
                                    std::uint64_t seed) {
  const Index n = phi.size();
  Eigen::VectorXd out(n);
  for (int f = 0; f < folds.k; ++f) {
    const std::vector<Index> train = folds.rows_out(f);
    const std::vector<Index> test = folds.rows_in(f);
    if (test.empty()) continue;
    const Eigen::VectorXd pt = phi(train);
    if (x.cols() == 0) {
      out(test).setConstant(pt.mean());
      continue;
    }
    const auto model = learners::fit(spec, x(train, Eigen::all), pt,
                                     learners::Task::kRegression,
                                     derive_seed(seed, f));
    out(test) = model.predict(x(test, Eigen::all));
  }
  return out;
}

struct Theta {
  double value = 0.0;
  double se = 0.0;
};

Theta theta_from(const Eigen::VectorXd& phi, const Eigen::VectorXd& reduced,
                 const Eigen::VectorXd& full) {
  const Eigen::VectorXd d =
      (phi - reduced).array().square() - (phi - full).array().square();
  const double n = static_cast<double>(phi.size());
  Theta t;
  t.value = d.mean();
  t.se = std::sqrt((d.array() - t.value).square().sum() / n) / std::sqrt(n);
  return t;
}

}  // namespace

VimpReport vimp_from_phi(const Dataset& data, const FoldAssignment& folds,
                         const Eigen::VectorXd& phi,
                         const std::vector<VimpSubset>& subsets,
                         const VimpOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0,1)");
  }
  if (phi.size() != data.n() || folds.n() != data.n()) {
    throw DataError("vimp: phi, folds and data disagree in length");
  }
  if (subsets.empty()) throw ConfigError("vimp: no covariate subsets given");
  for (const auto& s : subsets) {
    if (s.columns.empty()) {
      throw ConfigError("vimp: subset '" + s.name + "' is empty");
    }
    for (const auto& c : s.columns) data.covariate_index(c);
  }

  const Eigen::VectorXd tau_x =
      crossfit_regression(data.x(), phi, folds, options.tau_spec, options.seed);
  const Eigen::VectorXd tau_none =
      crossfit_regression(Eigen::MatrixXd(data.n(), 0), phi, folds,
                          options.tau_spec, options.seed);
  const Theta tx = theta_from(phi, tau_none, tau_x);
  const double scale = std::max(1.0, phi.squaredNorm() / static_cast<double>(phi.size()));
  if (!(tx.value > 1e-12 * scale)) {
    throw NumericError("vimp: no detectable effect variation (theta_x = " +
                       std::to_string(tx.value) + ")");
  }

  VimpReport report;
  report.theta_x = tx.value;
  report.se_theta_x = tx.se;
  report.results.resize(subsets.size());
  const double z = normal_quantile(1.0 - options.alpha / 2.0);
  parallel_for(subsets.size(), [&](std::size_t s) {
    const std::set<std::string> drop(subsets[s].columns.begin(),
                                     subsets[s].columns.end());
    std::vector<std::string> keep;
    for (const auto& c : data.covariate_names()) {
      if (!drop.count(c)) keep.push_back(c);
    }
    const Eigen::VectorXd reduced = crossfit_regression(
        data.columns(keep), phi, folds, options.tau_spec, options.seed);
    const Theta t = theta_from(phi, reduced, tau_x);
    VimpResult& r = report.results[s];
    r.name = subsets[s].name;
    r.theta_hat = t.value;
    r.se_theta = t.se;
    r.psi_hat = t.value / tx.value;
    r.ci_lo = t.value - z * t.se;
    r.ci_hi = t.value + z * t.se;
    r.n_eval = phi.size();
    r.negative = t.value < 0.0;
  });
  std::stable_sort(report.results.begin(), report.results.end(),
                   [](const VimpResult& a, const VimpResult& b) {
                     return a.psi_hat > b.psi_hat;
                   });
  return report;
}

VimpReport vimp(const Dataset& data, const FoldAssignment& folds,
                const std::vector<VimpSubset>& subsets,
                const learners::LearnerSpec& pi_spec,
                const learners::LearnerSpec& mu_spec, const VimpOptions& options) {
  const auto nf = crossfit::fit_nuisances(data, folds, pi_spec, mu_spec,
                                          derive_seed(options.seed, 1));
  const auto po = crossfit::pseudo_cate(data, nf);
  return vimp_from_phi(data, folds, po.phi, subsets, options);
}

}  // namespace hetfx::vimp
