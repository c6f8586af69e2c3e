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

#include "hetfx/splines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetfx::splines {
namespace {

constexpr int kOrder = 4;  // cubic

// Full clamped knot vector: lo repeated 4 times, interior knots, hi x4.
std::vector<double> full_knots(const SplineBasis& b) {
  std::vector<double> t(kOrder, b.lo);
  t.insert(t.end(), b.knots.begin(), b.knots.end());
  t.insert(t.end(), kOrder, b.hi);
  return t;
}

// Values of all B-splines of order 4 at x (Cox-de Boor, triangular scheme).
void bspline_values(const std::vector<double>& t, double x, double* out,
                    int count) {
  // Locate span s with t[s] <= x < t[s+1]; the right end belongs to the last
  // non-degenerate span.
  const int nt = static_cast<int>(t.size());
  int s = kOrder - 1;
  if (x >= t[nt - kOrder]) {
    s = nt - kOrder - 1;
  } else {
    s = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    s = std::clamp(s, kOrder - 1, nt - kOrder - 1);
  }
  double n[kOrder] = {1.0, 0.0, 0.0, 0.0};
  double left[kOrder], right[kOrder];
  for (int d = 1; d < kOrder; ++d) {
    left[d] = x - t[s + 1 - d];
    right[d] = t[s + d] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double denom = right[r + 1] + left[d - r];
      const double tmp = denom > 0 ? n[r] / denom : 0.0;
      n[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    n[d] = saved;
  }
  std::fill(out, out + count, 0.0);
  for (int r = 0; r < kOrder; ++r) {
    const int idx = s - (kOrder - 1) + r;
    if (idx >= 0 && idx < count) out[idx] = n[r];
  }
}

}  // namespace

SplineBasis make_spline_basis(const Eigen::VectorXd& v, int m,
                              std::string name) {
  if (m < 3) {
    throw ConfigError("spline basis dimension must be >= 3 (got " +
                      std::to_string(m) + ")");
  }
  if (v.size() == 0) throw DataError("spline basis: empty input");
  SplineBasis b;
  b.name = std::move(name);
  b.m = m;
  b.lo = v.minCoeff();
  b.hi = v.maxCoeff();
  if (!(b.hi > b.lo)) {
    throw DataError("spline basis for '" + b.name + "': variable is constant");
  }
  std::vector<double> sorted(v.data(), v.data() + v.size());
  const int interior = m - 3;
  for (int k = 1; k <= interior; ++k) {
    const double q = quantile(sorted, static_cast<double>(k) / (interior + 1));
    if (!(q > b.lo && q < b.hi) || (!b.knots.empty() && !(q > b.knots.back()))) {
      throw DataError("spline basis for '" + b.name + "': too few distinct "
                      "values for m=" + std::to_string(m) + "; use a smaller m");
    }
    b.knots.push_back(q);
  }
  return b;
}

Eigen::MatrixXd SplineBasis::evaluate(const Eigen::VectorXd& v) const {
  const std::vector<double> t = full_knots(*this);
  const int count = m + 1;
  Eigen::MatrixXd out(v.size(), m);
  std::vector<double> row(count);
  for (Index i = 0; i < v.size(); ++i) {
    bspline_values(t, std::clamp(v(i), lo, hi), row.data(), count);
    for (int c = 0; c < m; ++c) out(i, c) = row[c + 1];
  }
  return out;
}

Eigen::RowVectorXd SplineBasis::evaluate(double v) const {
  Eigen::VectorXd one(1);
  one(0) = v;
  return evaluate(one).row(0);
}

OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  const Index n = design.rows(), p = design.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw NumericError("least squares design is rank deficient (rank " +
                       std::to_string(qr.rank()) + " < " + std::to_string(p) +
                       " columns); use a smaller basis dimension");
  }
  OlsFit f;
  f.coef = qr.solve(y);
  f.fitted = design * f.coef;
  f.residuals = y - f.fitted;
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  f.hat = q.rowwise().squaredNorm();
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double denom = 1.0 - f.hat(i);
    if (denom < 1e-10) {
      s = std::numeric_limits<double>::infinity();
      break;
    }
    const double e = f.residuals(i) / denom;
    s += e * e;
  }
  f.loocv = s / static_cast<double>(n);
  return f;
}

UnivariateSmooth smooth_spline(const Eigen::VectorXd& v, const Eigen::VectorXd& y,
                               const std::vector<int>& m_grid) {
  if (m_grid.empty()) throw ConfigError("smooth_spline: empty m grid");
  UnivariateSmooth best;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<int> grid = m_grid;
  std::sort(grid.begin(), grid.end());
  for (int m : grid) {
    if (m + 1 > v.size()) {
      best.loocv_scores.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    SplineBasis basis;
    OlsFit fit;
    try {
      basis = make_spline_basis(v, m);
      Eigen::MatrixXd design(v.size(), m + 1);
      design.col(0).setOnes();
      design.rightCols(m) = basis.evaluate(v);
      fit = ols(design, y);
    } catch (const Error&) {
      best.loocv_scores.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    best.loocv_scores.push_back(fit.loocv);
    // Strict improvement keeps ties at the smaller m; a 1e-12 relative
    // margin absorbs rounding on exact fits.
    if (!found || fit.loocv < best_score - 1e-12 * (1.0 + std::abs(best_score))) {
      found = true;
      best_score = fit.loocv;
      best.basis = basis;
      best.fit = fit;
    }
  }
  if (!found) {
    throw DataError("spline smoother: " + std::to_string(v.size()) +
                    " rows are too few for any candidate basis dimension");
  }
  return best;
}

}  // namespace hetfx::splines
