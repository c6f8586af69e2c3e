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

#include "hetfx/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace hetfx::learners {
namespace {

void check_training_shape(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) {
    throw DataError("learner fit: X has " + std::to_string(x.rows()) +
                    " rows but y has " + std::to_string(y.size()));
  }
  if (x.rows() < 2) throw DataError("learner fit: need at least 2 rows");
  if (!x.allFinite() || !y.allFinite()) {
    throw DataError("learner fit: non-finite training values");
  }
}

// --- linear ridge ----------------------------------------------------------

class LinearModel : public Model {
 public:
  explicit LinearModel(Eigen::VectorXd coef) : coef_(std::move(coef)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out =
        Eigen::VectorXd::Constant(x.rows(), coef_(0));
    if (coef_.size() > 1) out.noalias() += x * coef_.tail(coef_.size() - 1);
    return out;
  }

 private:
  Eigen::VectorXd coef_;
};

class LogisticModel : public Model {
 public:
  explicit LogisticModel(Eigen::VectorXd coef) : coef_(std::move(coef)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x.rows(), coef_(0));
    if (coef_.size() > 1) eta.noalias() += x * coef_.tail(coef_.size() - 1);
    return eta.unaryExpr([](double e) { return expit(e); });
  }

 private:
  Eigen::VectorXd coef_;
};

// --- k nearest neighbours --------------------------------------------------

class KnnModel : public Model {
 public:
  KnnModel(const Eigen::MatrixXd& x, Eigen::VectorXd y, int k)
      : y_(std::move(y)), k_(std::min<Index>(k, x.rows())) {
    scale_ = Eigen::VectorXd::Ones(x.cols());
    center_ = Eigen::VectorXd::Zero(x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
      const double m = x.col(c).mean();
      const double sd = std::sqrt((x.col(c).array() - m).square().mean());
      center_(c) = m;
      if (sd > 0) scale_(c) = sd;
    }
    x_ = standardize(x);
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    const Eigen::MatrixXd q = standardize(x);
    Eigen::VectorXd out(q.rows());
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(x_.rows()));
    for (Index r = 0; r < q.rows(); ++r) {
      for (Index i = 0; i < x_.rows(); ++i) {
        dist[i] = {(x_.row(i) - q.row(r)).squaredNorm(), i};
      }
      std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
      double s = 0.0;
      for (Index i = 0; i < k_; ++i) s += y_(dist[i].second);
      out(r) = s / static_cast<double>(k_);
    }
    return out;
  }

 private:
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - center_.transpose()).array().rowwise() /
           scale_.transpose().array();
  }
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd center_, scale_;
  Index k_;
};

// --- CART regression tree --------------------------------------------------

class TreeModel : public Model {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };

  TreeModel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_depth,
            int min_leaf)
      : max_depth_(max_depth), min_leaf_(std::max(1, min_leaf)) {
    std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    build(x, y, rows, 0);
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out(x.rows());
    for (Index r = 0; r < x.rows(); ++r) {
      int node = 0;
      while (nodes_[node].feature >= 0) {
        const Node& nd = nodes_[node];
        node = x(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      out(r) = nodes_[node].value;
    }
    return out;
  }

 private:
  int build(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
            std::vector<Index>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double total = 0.0;
    for (Index r : rows) total += y(r);
    const auto count = static_cast<double>(rows.size());
    nodes_[id].value = total / count;
    if (depth >= max_depth_ ||
        rows.size() < 2 * static_cast<std::size_t>(min_leaf_)) {
      return id;
    }

    double best_gain = 1e-12 * (1.0 + std::abs(total));
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<Index> sorted = rows;
    for (Index f = 0; f < x.cols(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](Index a, Index b) { return x(a, f) < x(b, f); });
      double left_sum = 0.0;
      const std::size_t m = sorted.size();
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += y(sorted[i]);
        const std::size_t nl = i + 1;
        const std::size_t nr = m - nl;
        if (nl < static_cast<std::size_t>(min_leaf_)) continue;
        if (nr < static_cast<std::size_t>(min_leaf_)) break;
        const double xl = x(sorted[i], f), xr = x(sorted[i + 1], f);
        if (!(xl < xr)) continue;
        const double right_sum = total - left_sum;
        // SSE reduction relative to the parent.
        const double gain = left_sum * left_sum / nl +
                            right_sum * right_sum / nr - total * total / m;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (xl + xr);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Index> left, right;
    for (Index r : rows) {
      (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
    }
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = build(x, y, left, depth + 1);
    const int r = build(x, y, right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  int max_depth_;
  int min_leaf_;
  std::vector<Node> nodes_;
};

// --- stack -----------------------------------------------------------------

class StackModel : public Model {
 public:
  StackModel(std::vector<FittedModel> members, std::vector<double> weights)
      : members_(std::move(members)), weights_(std::move(weights)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (weights_[m] == 0.0) continue;
      out += weights_[m] * members_[m].predict(x);
    }
    return out;
  }

 private:
  std::vector<FittedModel> members_;
  std::vector<double> weights_;
};

}  // namespace

// ---------------------------------------------------------------------------

LearnerSpec LearnerSpec::linear_ridge(double lambda) {
  LearnerSpec s;
  s.kind = LearnerKind::kLinearRidge;
  s.lambda = lambda;
  return s;
}
LearnerSpec LearnerSpec::logistic(double lambda) {
  LearnerSpec s;
  s.kind = LearnerKind::kLogistic;
  s.lambda = lambda;
  return s;
}
LearnerSpec LearnerSpec::knn(int k) {
  LearnerSpec s;
  s.kind = LearnerKind::kKnn;
  s.k = k;
  return s;
}
LearnerSpec LearnerSpec::regression_tree(int max_depth, int min_leaf) {
  LearnerSpec s;
  s.kind = LearnerKind::kRegressionTree;
  s.max_depth = max_depth;
  s.min_leaf = min_leaf;
  return s;
}
LearnerSpec LearnerSpec::stack(std::vector<LearnerSpec> members, int folds) {
  LearnerSpec s;
  s.kind = LearnerKind::kStack;
  s.members = std::move(members);
  s.stack_folds = folds;
  return s;
}

void LearnerSpec::validate() const {
  switch (kind) {
    case LearnerKind::kLinearRidge:
    case LearnerKind::kLogistic:
      if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("learner " + to_string(kind) +
                          ": lambda must be finite and >= 0");
      }
      break;
    case LearnerKind::kKnn:
      if (k < 1) throw ConfigError("learner knn: k must be >= 1");
      break;
    case LearnerKind::kRegressionTree:
      if (max_depth < 0) throw ConfigError("regression_tree: max_depth must be >= 0");
      if (min_leaf < 1) throw ConfigError("regression_tree: min_leaf must be >= 1");
      break;
    case LearnerKind::kStack:
      if (members.size() < 2) {
        throw ConfigError("stack: need at least 2 members");
      }
      if (stack_folds < 2) throw ConfigError("stack: folds must be >= 2");
      for (const auto& m : members) {
        if (m.kind == LearnerKind::kStack) {
          throw ConfigError("stack: members may not themselves be stacks");
        }
        m.validate();
      }
      break;
  }
}

std::string LearnerSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  switch (kind) {
    case LearnerKind::kLinearRidge:
    case LearnerKind::kLogistic:
      os << "(lambda=" << lambda << ")";
      break;
    case LearnerKind::kKnn:
      os << "(k=" << k << ")";
      break;
    case LearnerKind::kRegressionTree:
      os << "(max_depth=" << max_depth << ",min_leaf=" << min_leaf << ")";
      break;
    case LearnerKind::kStack:
      os << "[";
      for (std::size_t i = 0; i < members.size(); ++i) {
        os << (i ? "," : "") << members[i].describe();
      }
      os << "]";
      break;
  }
  return os.str();
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kLinearRidge: return "linear_ridge";
    case LearnerKind::kLogistic: return "logistic";
    case LearnerKind::kKnn: return "knn";
    case LearnerKind::kRegressionTree: return "regression_tree";
    case LearnerKind::kStack: return "stack";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "linear_ridge") return LearnerKind::kLinearRidge;
  if (name == "logistic") return LearnerKind::kLogistic;
  if (name == "knn") return LearnerKind::kKnn;
  if (name == "regression_tree") return LearnerKind::kRegressionTree;
  if (name == "stack") return LearnerKind::kStack;
  throw ConfigError("unknown learner kind '" + name + "'");
}

FittedModel::FittedModel(LearnerSpec spec, Task task, Index features,
                         std::shared_ptr<const Model> impl,
                         std::vector<double> stack_weights)
    : spec_(std::move(spec)),
      task_(task),
      features_(features),
      impl_(std::move(impl)),
      stack_weights_(std::move(stack_weights)) {}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& x) const {
  if (!impl_) throw ConfigError("predict called on an unfitted model");
  if (x.cols() != features_) {
    throw DataError("predict: model trained on " + std::to_string(features_) +
                    " features, got " + std::to_string(x.cols()));
  }
  Eigen::VectorXd out = impl_->predict(x);
  if (task_ == Task::kProbability) {
    out = out.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
  }
  return out;
}

Eigen::VectorXd ridge_coefficients(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda) {
  const Index p = x.cols();
  Eigen::VectorXd coef(p + 1);
  const double ybar = y.mean();
  if (p == 0) {
    coef(0) = ybar;
    return coef;
  }
  const Eigen::RowVectorXd xbar = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - xbar;
  const Eigen::VectorXd yc = y.array() - ybar;
  Eigen::VectorXd beta;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      throw NumericError(
          "linear_ridge: singular normal equations with lambda=0 (rank " +
          std::to_string(qr.rank()) + " < " + std::to_string(p) +
          "); use lambda > 0");
    }
    beta = qr.solve(yc);
  } else {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    beta = gram.llt().solve(xc.transpose() * yc);
  }
  coef(0) = ybar - xbar.dot(beta);
  coef.tail(p) = beta;
  return coef;
}

LogisticFit logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          double lambda, int max_iterations, double clip) {
  const Index n = x.rows(), p = x.cols() + 1;
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = x;
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, lambda);
  penalty(0) = 0.0;

  LogisticFit fit;
  // Start from the marginal log-odds.
  const double ybar = std::clamp(y.mean(), clip, 1.0 - clip);
  fit.coefficients = Eigen::VectorXd::Zero(p);
  fit.coefficients(0) = std::log(ybar / (1.0 - ybar));
  double last_dev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd eta = design * fit.coefficients;
    Eigen::VectorXd prob(n), w(n), z(n);
    double dev = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double pi = std::clamp(expit(eta(i)), clip, 1.0 - clip);
      prob(i) = pi;
      w(i) = pi * (1.0 - pi);
      z(i) = eta(i) + (y(i) - pi) / w(i);
      dev -= 2.0 * (y(i) * std::log(pi) + (1.0 - y(i)) * std::log(1.0 - pi));
    }
    Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    info.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("logistic: IRLS information matrix is singular");
    }
    const Eigen::VectorXd next =
        ldlt.solve(design.transpose() * (w.array() * z.array()).matrix());
    if (!next.allFinite()) {
      throw NumericError("logistic: IRLS diverged to non-finite coefficients");
    }
    const double step = (next - fit.coefficients).lpNorm<Eigen::Infinity>();
    fit.coefficients = next;
    if (step < 1e-10 * (1.0 + fit.coefficients.lpNorm<Eigen::Infinity>()) ||
        std::abs(last_dev - dev) < 1e-12 * (1.0 + std::abs(dev))) {
      fit.converged = true;
      break;
    }
    last_dev = dev;
  }
  return fit;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     int max_iterations) {
  const Index m = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  const double tol = 1e-12 * (1.0 + a.norm() * b.norm());

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Index> idx;
    for (Index j = 0; j < m; ++j) {
      if (passive[j]) idx.push_back(j);
    }
    z.setZero(m);
    if (idx.empty()) return;
    Eigen::MatrixXd ap(a.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) ap.col(c) = a.col(idx[c]);
    const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zp(c);
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Eigen::VectorXd grad = a.transpose() * (b - a * x);
    Index best = -1;
    double best_val = tol;
    for (Index j = 0; j < m; ++j) {
      if (!passive[j] && grad(j) > best_val) {
        best_val = grad(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[best] = true;
    Eigen::VectorXd z;
    for (int inner = 0; inner < max_iterations; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Index j = 0; j < m; ++j) {
        if (passive[j] && z(j) <= 0) feasible = false;
      }
      if (feasible) break;
      double alpha = 1.0;
      for (Index j = 0; j < m; ++j) {
        if (passive[j] && z(j) <= 0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      x += alpha * (z - x);
      for (Index j = 0; j < m; ++j) {
        if (passive[j] && x(j) <= 1e-15) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
    }
    x = z;
  }
  return x.cwiseMax(0.0);
}

FittedModel fit_stack(const std::vector<LearnerSpec>& members,
                      const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      Task task, int folds, std::uint64_t seed) {
  if (members.size() < 2) throw ConfigError("stack: need at least 2 members");
  check_training_shape(x, y);
  const Index n = x.rows();
  const auto m = static_cast<Index>(members.size());
  const int k = static_cast<int>(std::min<Index>(std::max(folds, 2), n));
  const std::vector<int> fold = shuffled_fold_ids(n, k, derive_seed(seed, 1));

  Eigen::MatrixXd cv(n, m);
  for (int f = 0; f < k; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(i);
    const Eigen::MatrixXd xt = x(train, Eigen::all);
    const Eigen::VectorXd yt = y(train);
    const Eigen::MatrixXd xs = x(test, Eigen::all);
    for (Index j = 0; j < m; ++j) {
      const FittedModel fm =
          fit(members[j], xt, yt, task, derive_seed(seed, 100 + f, j));
      cv(test, j) = fm.predict(xs);
    }
  }

  Eigen::VectorXd w = nnls(cv, y);
  const double total = w.sum();
  if (!(total > 0.0)) {
    w.setConstant(1.0 / static_cast<double>(m));
  } else {
    w /= total;
  }
  std::vector<FittedModel> fitted;
  std::vector<double> weights(w.data(), w.data() + m);
  for (Index j = 0; j < m; ++j) {
    fitted.push_back(fit(members[j], x, y, task, derive_seed(seed, 2, j)));
  }
  LearnerSpec spec = LearnerSpec::stack(members, folds);
  return FittedModel(spec, task, x.cols(),
                     std::make_shared<StackModel>(std::move(fitted), weights),
                     weights);
}

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                const Eigen::VectorXd& y, Task task, std::uint64_t seed) {
  spec.validate();
  check_training_shape(x, y);
  if (task == Task::kProbability) {
    for (Index i = 0; i < y.size(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) {
        throw DataError("probability task requires y in {0,1}; row " +
                        std::to_string(i + 1) + " has " + std::to_string(y(i)));
      }
    }
  }
  std::shared_ptr<const Model> impl;
  switch (spec.kind) {
    case LearnerKind::kLinearRidge:
      impl = std::make_shared<LinearModel>(ridge_coefficients(x, y, spec.lambda));
      break;
    case LearnerKind::kLogistic:
      if (task != Task::kProbability) {
        throw ConfigError("logistic learner requires a probability task");
      }
      impl = std::make_shared<LogisticModel>(
          logistic_irls(x, y, spec.lambda).coefficients);
      break;
    case LearnerKind::kKnn:
      impl = std::make_shared<KnnModel>(x, y, spec.k);
      break;
    case LearnerKind::kRegressionTree:
      impl = std::make_shared<TreeModel>(x, y, spec.max_depth, spec.min_leaf);
      break;
    case LearnerKind::kStack:
      return fit_stack(spec.members, x, y, task, spec.stack_folds, seed);
  }
  return FittedModel(spec, task, x.cols(), std::move(impl));
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd drop_column(const Eigen::MatrixXd& m, int j) {
  Eigen::MatrixXd out(m.rows(), m.cols() - 1);
  Index c = 0;
  for (Index k = 0; k < m.cols(); ++k) {
    if (k != j) out.col(c++) = m.col(k);
  }
  return out;
}

namespace {
constexpr int kKdeTablePoints = 4097;
constexpr double kKdeTableReach = 6.0;  // bandwidths beyond the extreme residuals
}  // namespace

double ConditionalDensity::kde_exact(double t) const {
  const double n = static_cast<double>(residuals.size());
  // Residuals are sorted, so only those within 9 bandwidths contribute.
  const auto lo = std::lower_bound(residuals.begin(), residuals.end(),
                                   t - 9.0 * bandwidth);
  const auto hi = std::upper_bound(residuals.begin(), residuals.end(),
                                   t + 9.0 * bandwidth);
  double s = 0.0;
  for (auto it = lo; it != hi; ++it) s += normal_pdf((t - *it) / bandwidth);
  return s / (n * bandwidth);
}

double ConditionalDensity::residual_density(double t) const {
  if (residual_kind == ResidualDensity::kGaussian) return normal_pdf(t);
  const double pos = (t - table_lo_) / table_step_;
  if (pos < 0.0 || pos >= static_cast<double>(table_.size() - 1)) {
    return kde_exact(t);
  }
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return table_[i] + frac * (table_[i + 1] - table_[i]);
}

Eigen::VectorXd ConditionalDensity::conditional_mean(
    const Eigen::MatrixXd& rest) const {
  return mean_model.predict(rest);
}

Eigen::VectorXd ConditionalDensity::conditional_sd(
    const Eigen::MatrixXd& rest) const {
  return var_model.predict(rest).cwiseMax(variance_floor).cwiseSqrt();
}

double ConditionalDensity::evaluate(double v,
                                    const Eigen::RowVectorXd& rest) const {
  const Eigen::MatrixXd row = rest;
  const double mu = conditional_mean(row)(0);
  const double sd = conditional_sd(row)(0);
  return residual_density((v - mu) / sd) / sd;
}

Eigen::VectorXd ConditionalDensity::evaluate(const Eigen::VectorXd& values,
                                             const Eigen::MatrixXd& rest) const {
  const Eigen::VectorXd mu = conditional_mean(rest);
  const Eigen::VectorXd sd = conditional_sd(rest);
  Eigen::VectorXd out(values.size());
  for (Index i = 0; i < values.size(); ++i) {
    out(i) = residual_density((values(i) - mu(i)) / sd(i)) / sd(i);
  }
  return out;
}

ConditionalDensity fit_conditional_density(const Eigen::MatrixXd& modifiers,
                                           int j, const LearnerSpec& mean_spec,
                                           const LearnerSpec& var_spec,
                                           ResidualDensity residual) {
  const Index n = modifiers.rows();
  if (j < 0 || j >= modifiers.cols()) {
    throw ConfigError("conditional density: modifier index out of range");
  }
  if (n < 50) {
    throw DataError("conditional density: need at least 50 rows, got " +
                    std::to_string(n));
  }
  const Eigen::VectorXd target = modifiers.col(j);
  const Eigen::MatrixXd rest = drop_column(modifiers, j);
  const double var_j = variance(as_span(target));
  if (!(var_j > 0.0)) {
    throw DataError("conditional density: modifier is constant");
  }

  ConditionalDensity cd;
  cd.residual_kind = residual;
  cd.variance_floor = 1e-4 * var_j;
  cd.mean_model = fit(mean_spec, rest, target, Task::kRegression);
  const Eigen::VectorXd mu = cd.mean_model.predict(rest);
  const Eigen::VectorXd sq = (target - mu).array().square();

  const bool deterministic = sq.mean() <= 1e-12 * var_j;
  cd.var_model = fit(var_spec, rest, sq, Task::kRegression);
  const Eigen::VectorXd raw_var = cd.var_model.predict(rest);
  if (!deterministic && (raw_var.array() <= 0.0).all()) {
    throw NumericError(
        "conditional density: all variance predictions are <= 0");
  }
  cd.floored_rows = (raw_var.array() < cd.variance_floor).count();
  if (deterministic) {
    cd.warnings.push_back(
        "conditional variance is degenerate: the modifier is a deterministic "
        "function of the others; variance floor engaged on every row");
  } else if (cd.floored_rows > 0) {
    cd.warnings.push_back("variance floor engaged on " +
                          std::to_string(cd.floored_rows) + " of " +
                          std::to_string(n) + " rows");
  }

  const Eigen::VectorXd sd = raw_var.cwiseMax(cd.variance_floor).cwiseSqrt();
  cd.residuals.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) cd.residuals[i] = (target(i) - mu(i)) / sd(i);
  std::sort(cd.residuals.begin(), cd.residuals.end());
  const double sd_e = std::sqrt(variance(cd.residuals));
  cd.bandwidth = 1.06 * std::max(sd_e, 1e-3) *
                 std::pow(static_cast<double>(n), -0.2);

  if (residual == ResidualDensity::kKde) {
    cd.table_lo_ = cd.residuals.front() - kKdeTableReach * cd.bandwidth;
    const double hi = cd.residuals.back() + kKdeTableReach * cd.bandwidth;
    cd.table_step_ = (hi - cd.table_lo_) / (kKdeTablePoints - 1);
    cd.table_.resize(kKdeTablePoints);
    for (int i = 0; i < kKdeTablePoints; ++i) {
      cd.table_[i] = cd.kde_exact(cd.table_lo_ + cd.table_step_ * i);
    }
  }
  return cd;
}

double marginal_density(const ConditionalDensity& cd,
                        const Eigen::MatrixXd& rest, double v) {
  if (rest.rows() == 0) {
    throw DataError("marginal density: no conditioning rows");
  }
  const Eigen::VectorXd values = Eigen::VectorXd::Constant(rest.rows(), v);
  return cd.evaluate(values, rest).mean();
}

}  // namespace hetfx::learners
