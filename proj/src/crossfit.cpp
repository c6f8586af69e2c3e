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

#include "hetfx/crossfit.hpp"

#include <cmath>

namespace hetfx::crossfit {

using learners::FittedModel;
using learners::Task;

NuisanceFit fit_nuisances(const Dataset& data, const FoldAssignment& folds,
                          const learners::LearnerSpec& pi_spec,
                          const learners::LearnerSpec& mu_spec,
                          std::uint64_t seed) {
  const Index n = data.n();
  if (folds.n() != n) {
    throw ConfigError("fold assignment covers " + std::to_string(folds.n()) +
                      " rows but the data has " + std::to_string(n));
  }
  pi_spec.validate();
  mu_spec.validate();
  const int k = folds.k;
  NuisanceFit nf;
  nf.folds = folds;
  nf.pi_spec = pi_spec;
  nf.mu_spec = mu_spec;
  nf.pi_hat.resize(n);
  nf.mu0_hat.resize(n);
  nf.mu1_hat.resize(n);
  nf.pi_models.resize(k);
  nf.mu0_models.resize(k);
  nf.mu1_models.resize(k);

  // Validate arms up front so the error names the first offending fold.
  std::vector<std::vector<Index>> train(k), test(k), train1(k), train0(k);
  for (int f = 0; f < k; ++f) {
    test[f] = folds.rows_in(f);
    train[f] = folds.rows_out(f);
    for (Index i : train[f]) (data.a()(i) == 1.0 ? train1 : train0)[f].push_back(i);
    if (train1[f].empty() || train0[f].empty()) {
      throw DataError("fold " + std::to_string(f) + ": the training complement "
                      "has no " + (train1[f].empty() ? "treated" : "control") +
                      " rows");
    }
  }

  const Eigen::MatrixXd& x = data.x();
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t fs) {
    const int f = static_cast<int>(fs);
    const Eigen::MatrixXd xt = x(train[f], Eigen::all);
    const Eigen::MatrixXd xs = x(test[f], Eigen::all);
    nf.pi_models[f] = learners::fit(pi_spec, xt, data.a()(train[f]),
                                    Task::kProbability, derive_seed(seed, f, 0));
    nf.mu1_models[f] =
        learners::fit(mu_spec, x(train1[f], Eigen::all), data.y()(train1[f]),
                      Task::kRegression, derive_seed(seed, f, 1));
    nf.mu0_models[f] =
        learners::fit(mu_spec, x(train0[f], Eigen::all), data.y()(train0[f]),
                      Task::kRegression, derive_seed(seed, f, 2));
    nf.pi_hat(test[f]) = nf.pi_models[f].predict(xs);
    nf.mu1_hat(test[f]) = nf.mu1_models[f].predict(xs);
    nf.mu0_hat(test[f]) = nf.mu0_models[f].predict(xs);
  });
  if (!nf.pi_hat.allFinite() || !nf.mu0_hat.allFinite() ||
      !nf.mu1_hat.allFinite()) {
    throw NumericError("nuisance predictions are not finite");
  }
  return nf;
}

NuisanceFit fixed_nuisances(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu0,
                            const Eigen::VectorXd& mu1,
                            const FoldAssignment& folds) {
  if (pi.size() != mu0.size() || pi.size() != mu1.size() ||
      pi.size() != folds.n()) {
    throw DataError("fixed nuisances: length mismatch");
  }
  NuisanceFit nf;
  nf.pi_hat = pi.cwiseMax(learners::kPropensityClip)
                  .cwiseMin(1.0 - learners::kPropensityClip);
  nf.mu0_hat = mu0;
  nf.mu1_hat = mu1;
  nf.folds = folds;
  return nf;
}

Eigen::VectorXd dr_residual(const Dataset& data, const NuisanceFit& nf) {
  const Index n = data.n();
  if (nf.pi_hat.size() != n) throw DataError("nuisance fit does not match data");
  Eigen::VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    const double a = data.a()(i), pi = nf.pi_hat(i);
    const double mu_a = a == 1.0 ? nf.mu1_hat(i) : nf.mu0_hat(i);
    r(i) = (a - pi) * (data.y()(i) - mu_a) / (pi * (1.0 - pi));
  }
  return r;
}

PseudoOutcomes pseudo_cate(const Dataset& data, const NuisanceFit& nf) {
  PseudoOutcomes po;
  po.phi = nf.mu1_hat - nf.mu0_hat + dr_residual(data, nf);
  po.kind = PseudoKind::kCate;
  po.fold_of = nf.folds.fold_of;
  return po;
}

AteResult estimate_ate(const Dataset& data, const NuisanceFit& nf, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  const Index n = data.n();
  const Eigen::VectorXd& a = data.a();
  const Eigen::VectorXd& y = data.y();
  const int k = nf.folds.k;
  AteResult res;
  res.alpha = alpha;
  res.n = n;
  std::vector<double> s1(k, 0.0), s0(k, 0.0);
  std::vector<Index> cnt(k, 0);
  for (Index i = 0; i < n; ++i) {
    const int f = nf.folds.fold_of[i];
    const double pi = nf.pi_hat(i);
    s1[f] += a(i) / pi * (y(i) - nf.mu1_hat(i)) + nf.mu1_hat(i);
    s0[f] += (1.0 - a(i)) / (1.0 - pi) * (y(i) - nf.mu0_hat(i)) + nf.mu0_hat(i);
    ++cnt[f];
  }
  int used = 0;
  for (int f = 0; f < k; ++f) {
    if (cnt[f] == 0) continue;
    const double m1 = s1[f] / static_cast<double>(cnt[f]);
    const double m0 = s0[f] / static_cast<double>(cnt[f]);
    res.psi1 += m1;
    res.psi0 += m0;
    res.fold_ate.push_back(m1 - m0);
    ++used;
  }
  res.psi1 /= used;
  res.psi0 /= used;
  res.ate = res.psi1 - res.psi0;
  const Eigen::VectorXd phi = pseudo_cate(data, nf).phi;
  res.sigma_hat =
      std::sqrt((phi.array() - res.ate).square().sum() / static_cast<double>(n));
  const double half = normal_quantile(1.0 - alpha / 2.0) * res.sigma_hat /
                      std::sqrt(static_cast<double>(n));
  res.lo = res.ate - half;
  res.hi = res.ate + half;
  return res;
}

std::vector<SubgroupEffect> subgroup_effects(const PseudoOutcomes& po,
                                             const Eigen::VectorXd& group,
                                             double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (group.size() != po.phi.size()) {
    throw DataError("subgroup: group column length differs from phi");
  }
  if (group.size() == 0) throw DataError("subgroup: no rows");
  for (Index i = 0; i < group.size(); ++i) {
    if (group(i) != 0.0 && group(i) != 1.0) {
      throw DataError("subgroup: grouping column must be binary (row " +
                      std::to_string(i + 1) + ")");
    }
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<SubgroupEffect> out;
  for (double level : {0.0, 1.0}) {
    double s = 0.0;
    Index m = 0;
    for (Index i = 0; i < group.size(); ++i) {
      if (group(i) == level) {
        s += po.phi(i);
        ++m;
      }
    }
    if (m == 0) continue;
    SubgroupEffect e;
    e.level = level;
    e.n = m;
    e.estimate = s / static_cast<double>(m);
    double ss = 0.0;
    for (Index i = 0; i < group.size(); ++i) {
      if (group(i) == level) ss += (po.phi(i) - e.estimate) * (po.phi(i) - e.estimate);
    }
    e.se = std::sqrt(ss / static_cast<double>(m)) / std::sqrt(static_cast<double>(m));
    e.lo = e.estimate - z * e.se;
    e.hi = e.estimate + z * e.se;
    out.push_back(e);
  }
  return out;
}

}  // namespace hetfx::crossfit
