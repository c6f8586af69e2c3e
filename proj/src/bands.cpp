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

#include "hetfx/bands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetfx::bands {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Value of the local polynomial with coefficients beta (scaled basis) at v.
double poly_at(const Eigen::VectorXd& beta, double v, double v0, double h) {
  const double u = (v - v0) / h;
  double acc = 0.0, pw = 1.0;
  for (Index c = 0; c < beta.size(); ++c) {
    acc += beta(c) * pw;
    pw *= u;
  }
  return acc;
}

}  // namespace

EifValues eif_cate(const localpoly::CurveFit& fit, const Eigen::VectorXd& v,
                   const Eigen::VectorXd& phi, const Eigen::VectorXd* tau_hat) {
  const Index n = v.size();
  if (phi.size() != n) throw DataError("eif: length mismatch");
  if (tau_hat && tau_hat->size() != n) {
    throw DataError("eif: tau_hat has the wrong length");
  }
  const auto g = static_cast<Index>(fit.points.size());
  EifValues out;
  out.values = Eigen::MatrixXd::Constant(n, g, kNaN);
  out.valid.assign(static_cast<std::size_t>(g), false);
  parallel_for(static_cast<std::size_t>(g), [&](std::size_t c) {
    const localpoly::PointFit& pt = fit.points[c];
    if (!pt.ok) return;
    Eigen::VectorXd beta_h = pt.beta_h, beta_b = pt.beta_b;
    if (tau_hat) {
      try {
        beta_h = localpoly::local_poly_fit(v, *tau_hat, pt.v0, fit.h, 1,
                                           fit.kernel).beta;
        if (pt.gamma.correction.size() > 0) {
          beta_b = localpoly::local_poly_fit(v, *tau_hat, pt.v0, fit.b, 3,
                                             fit.kernel).beta;
        }
      } catch (const NumericError&) {
        return;
      }
    }
    Eigen::VectorXd col(n);
    for (Index i = 0; i < n; ++i) {
      const double lin = pt.gamma.linear(i);
      double e = 0.0;
      if (lin != 0.0) e = lin * (phi(i) - poly_at(beta_h, v(i), pt.v0, fit.h));
      if (pt.gamma.correction.size() > 0) {
        const double corr = pt.gamma.correction(i);
        if (corr != 0.0) {
          e -= corr * (phi(i) - poly_at(beta_b, v(i), pt.v0, fit.b));
        }
      }
      col(i) = e;
    }
    out.values.col(static_cast<Index>(c)) = col;
    out.valid[c] = true;
  });
  return out;
}

EifValues eif_cate(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                   const std::vector<double>& grid, double h, double b,
                   const localpoly::KernelSpec& kernel, localpoly::Mode mode,
                   const Eigen::VectorXd* tau_hat) {
  const auto fit = localpoly::curve(v, phi, grid, h, b, kernel, mode);
  return eif_cate(fit, v, phi, tau_hat);
}

Eigen::VectorXd linear_binning(const Eigen::VectorXd& v,
                               const std::vector<double>& nodes) {
  const auto q = static_cast<Index>(nodes.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(q);
  if (q == 0 || v.size() == 0) return w;
  if (q == 1) {
    w(0) = 1.0;
    return w;
  }
  const double lo = nodes.front();
  const double step = (nodes.back() - lo) / static_cast<double>(q - 1);
  const double unit = 1.0 / static_cast<double>(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double pos = std::clamp((v(i) - lo) / step, 0.0, static_cast<double>(q - 1));
    const auto k = std::min<Index>(static_cast<Index>(pos), q - 2);
    const double frac = pos - static_cast<double>(k);
    w(k) += unit * (1.0 - frac);
    w(k + 1) += unit * frac;
  }
  return w;
}

EifValues eif_pd(const localpoly::CurveFit& fit, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& phi_pd, const SurfaceSlice& tauv_slice,
                 int nodes) {
  if (!tauv_slice) {
    throw ConfigError("eif_pd: a fitted tau_v surface is required");
  }
  if (nodes < 2) throw ConfigError("eif_pd: need at least 2 quadrature nodes");
  EifValues out = eif_cate(fit, v, phi_pd);
  const Index n = v.size();
  const auto g = static_cast<Index>(fit.points.size());
  const std::vector<double> vbar = linspace(v.minCoeff(), v.maxCoeff(), nodes);
  const Eigen::VectorXd w = linear_binning(v, vbar);

  // Gamma at each (node, grid point).
  Eigen::MatrixXd gam = Eigen::MatrixXd::Zero(nodes, g);
  for (Index c = 0; c < g; ++c) {
    if (!out.valid[c]) continue;
    for (int q = 0; q < nodes; ++q) {
      gam(q, c) = localpoly::gamma_at(fit.points[c], fit.kernel, vbar[q]);
    }
  }
  std::vector<Eigen::VectorXd> slices(static_cast<std::size_t>(nodes));
  parallel_for(static_cast<std::size_t>(nodes), [&](std::size_t q) {
    if (w(static_cast<Index>(q)) == 0.0 || gam.row(static_cast<Index>(q)).isZero()) {
      return;
    }
    Eigen::VectorXd t = tauv_slice(vbar[q]);
    if (t.size() != n) throw DataError("eif_pd: surface slice has wrong length");
    t.array() -= t.mean();
    slices[q] = std::move(t);
  });
  Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(n, g);
  for (int q = 0; q < nodes; ++q) {
    if (slices[q].size() == 0) continue;
    integral.noalias() += slices[q] * (w(q) * gam.row(q));
  }
  for (Index c = 0; c < g; ++c) {
    if (out.valid[c]) out.values.col(c) += integral.col(c);
  }
  return out;
}

Eigen::MatrixXd simulate_gaussian(const Eigen::MatrixXd& corr, int draws,
                                  std::uint64_t seed) {
  const Index g = corr.rows();
  if (corr.cols() != g) throw ConfigError("correlation matrix must be square");
  if (draws < 1) throw ConfigError("draws must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  if (es.info() != Eigen::Success) {
    throw NumericError("correlation eigendecomposition failed");
  }
  Eigen::VectorXd lambda = es.eigenvalues();
  const double top = g > 0 ? std::max(lambda.maxCoeff(), 1.0) : 1.0;
  if (g > 0 && lambda.minCoeff() < -1e-6 * top) {
    throw NumericError("correlation matrix is not positive semidefinite "
                       "(smallest eigenvalue " +
                       std::to_string(lambda.minCoeff()) + ")");
  }
  lambda = lambda.cwiseMax(1e-10);
  const Eigen::MatrixXd factor =
      es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  Eigen::MatrixXd z(draws, g);
  parallel_for(static_cast<std::size_t>(draws), [&](std::size_t d) {
    Rng rng = make_rng(seed, d);
    Eigen::VectorXd xi(g);
    for (Index c = 0; c < g; ++c) xi(c) = standard_normal(rng);
    z.row(static_cast<Index>(d)) = (factor * xi).transpose();
  });
  return z;
}

double max_abs_quantile(const Eigen::MatrixXd& z, double alpha,
                        const std::vector<Index>& columns) {
  std::vector<double> maxima(static_cast<std::size_t>(z.rows()), 0.0);
  for (Index d = 0; d < z.rows(); ++d) {
    double m = 0.0;
    if (columns.empty()) {
      if (z.cols() > 0) m = z.row(d).cwiseAbs().maxCoeff();
    } else {
      for (Index c : columns) m = std::max(m, std::abs(z(d, c)));
    }
    maxima[d] = m;
  }
  return quantile(std::move(maxima), 1.0 - alpha);
}

CurveEstimate uniform_band(const EifValues& eif, const std::vector<double>& grid,
                           const std::vector<double>& estimates, double h,
                           double b, const BandOptions& options) {
  const auto g = static_cast<Index>(grid.size());
  if (eif.values.cols() != g || static_cast<Index>(estimates.size()) != g) {
    throw DataError("uniform_band: grid, estimates and eif columns disagree");
  }
  if (!(options.alpha > 0.0 && options.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (options.draws < 1) throw ConfigError("draws must be positive");
  if (!(h > 0.0)) throw ConfigError("uniform_band: h must be positive");
  const Index n = eif.values.rows();
  CurveEstimate ce;
  ce.grid = grid;
  ce.estimate = estimates;
  ce.h = h;
  ce.b = b;
  ce.alpha = options.alpha;
  ce.n = n;
  ce.sigma.assign(grid.size(), kNaN);
  ce.pw_lo = ce.pw_hi = ce.unif_lo = ce.unif_hi = ce.sigma;

  std::vector<Index> cols;  // usable columns with positive variance
  for (Index c = 0; c < g; ++c) {
    if (!eif.valid[c] || !std::isfinite(estimates[c])) continue;
    const double s2 = h * eif.values.col(c).squaredNorm() / static_cast<double>(n);
    ce.sigma[c] = std::sqrt(s2);
    if (s2 > 0.0) cols.push_back(c);
  }

  const bool degenerate = options.alpha >= 1.0;
  const double z = degenerate ? 0.0 : normal_quantile(1.0 - options.alpha / 2.0);
  double crit = z;
  if (!degenerate && !cols.empty()) {
    const auto k = static_cast<Index>(cols.size());
    Eigen::MatrixXd e(n, k);
    for (Index c = 0; c < k; ++c) e.col(c) = eif.values.col(cols[c]);
    Eigen::MatrixXd cov = e.transpose() * e / static_cast<double>(n);
    const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    const Eigen::MatrixXd draws =
        simulate_gaussian(corr, options.draws, options.seed);
    crit = std::max(max_abs_quantile(draws, options.alpha), z);
  }
  ce.crit = crit;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n) * h);
  for (Index c = 0; c < g; ++c) {
    if (!std::isfinite(ce.sigma[c])) continue;
    const double est = estimates[c];
    const double pw = z * ce.sigma[c] * scale;
    const double un = crit * ce.sigma[c] * scale;
    ce.pw_lo[c] = est - pw;
    ce.pw_hi[c] = est + pw;
    ce.unif_lo[c] = est - un;
    ce.unif_hi[c] = est + un;
  }
  return ce;
}

std::vector<double> default_grid(const Eigen::VectorXd& v, int points) {
  std::vector<double> s(v.data(), v.data() + v.size());
  return linspace(quantile(s, 0.05), quantile(s, 0.95), points);
}

std::pair<double, double> resolve_bandwidths(const Eigen::VectorXd& v,
                                             const Eigen::VectorXd& phi,
                                             const CurveOptions& options) {
  double h = options.h;
  if (!(h > 0.0)) {
    h = localpoly::loocv_bandwidth(v, phi, 1, options.kernel,
                                   localpoly::default_bandwidth_grid(v))
            .h;
  }
  const double b = options.b > 0.0 ? options.b : h;
  return {h, b};
}

namespace {

CurveEstimate smooth_curve(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                           const CurveOptions& options,
                           const std::vector<int>* fold_of,
                           const SurfaceSlice* pd_slice) {
  if (v.size() != phi.size()) throw DataError("cate_curve: length mismatch");
  const std::vector<double> grid =
      options.grid.empty() ? default_grid(v) : options.grid;
  const auto [h, b] = resolve_bandwidths(v, phi, options);
  const auto fit = localpoly::curve(v, phi, grid, h, b, options.kernel, options.mode);
  std::vector<double> est = fit.estimates();

  std::vector<std::string> diagnostics;
  if (fold_of) {
    if (static_cast<Index>(fold_of->size()) != v.size()) {
      throw DataError("cate_curve: fold map has the wrong length");
    }
    const int k = *std::max_element(fold_of->begin(), fold_of->end()) + 1;
    std::vector<double> acc(grid.size(), 0.0);
    for (int f = 0; f < k; ++f) {
      std::vector<Index> rows;
      for (std::size_t i = 0; i < fold_of->size(); ++i) {
        if ((*fold_of)[i] == f) rows.push_back(static_cast<Index>(i));
      }
      const Eigen::VectorXd vf = v(rows), pf = phi(rows);
      const auto ff = localpoly::curve(vf, pf, grid, h, b, options.kernel,
                                       options.mode);
      const auto ef = ff.estimates();
      for (std::size_t g = 0; g < grid.size(); ++g) acc[g] += ef[g];
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      est[g] = std::isfinite(est[g]) ? acc[g] / k : kNaN;
      if (!std::isfinite(acc[g]) && fit.points[g].ok) {
        diagnostics.push_back("grid point " + std::to_string(grid[g]) +
                              ": singular local fit within a fold");
      }
    }
  }

  CurveEstimate ce;
  if (options.bands) {
    const EifValues eif =
        pd_slice ? eif_pd(fit, v, phi, *pd_slice) : eif_cate(fit, v, phi);
    ce = uniform_band(eif, grid, est, h, b, options.band);
  } else {
    ce.grid = grid;
    ce.estimate = est;
    ce.h = h;
    ce.b = b;
    ce.alpha = options.band.alpha;
    ce.n = v.size();
    ce.sigma.assign(grid.size(), kNaN);
    ce.pw_lo = ce.pw_hi = ce.unif_lo = ce.unif_hi = ce.sigma;
  }
  ce.kind = pd_slice ? "pd" : "cate_univariate";
  ce.target = localpoly::target_name(options.mode);
  if (options.mode == localpoly::Mode::kPlain) ce.b = kNaN;  // unused
  for (const auto& p : fit.points) {
    if (!p.ok) ce.diagnostics.push_back(p.diagnostic);
  }
  ce.diagnostics.insert(ce.diagnostics.end(), diagnostics.begin(),
                        diagnostics.end());
  return ce;
}

}  // namespace

CurveEstimate cate_curve(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                         const CurveOptions& options,
                         const std::vector<int>* fold_of) {
  return smooth_curve(v, phi, options, fold_of, nullptr);
}

CurveEstimate pd_smooth(const Eigen::VectorXd& v, const Eigen::VectorXd& phi_pd,
                        const SurfaceSlice& tauv_slice,
                        const CurveOptions& options,
                        const std::vector<int>* fold_of) {
  return smooth_curve(v, phi_pd, options, fold_of, &tauv_slice);
}

}  // namespace hetfx::bands
