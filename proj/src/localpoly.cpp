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

#include "hetfx/localpoly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hetfx::localpoly {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Moment matrix D = Pn[g g' K_h] and, when phi is given, r = Pn[g K_h phi].
struct LocalSystem {
  Eigen::MatrixXd d;
  Eigen::VectorXd r;
  Index support = 0;
};

LocalSystem local_system(const Eigen::VectorXd& v, const Eigen::VectorXd* phi,
                         double v0, double h, int order,
                         const KernelSpec& kernel) {
  const int p = order + 1;
  LocalSystem s;
  s.d = Eigen::MatrixXd::Zero(p, p);
  s.r = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd g(p);
  const double reach = kernel.support();
  for (Index i = 0; i < v.size(); ++i) {
    const double u = (v(i) - v0) / h;
    if (std::abs(u) > reach) continue;
    const double k = kernel(u) / h;
    if (k <= 0.0) continue;
    ++s.support;
    g(0) = 1.0;
    for (int c = 1; c < p; ++c) g(c) = g(c - 1) * u;
    s.d.selfadjointView<Eigen::Lower>().rankUpdate(g, k);
    if (phi) s.r.noalias() += (k * (*phi)(i)) * g;
  }
  s.d = s.d.selfadjointView<Eigen::Lower>();
  const double n = static_cast<double>(v.size());
  s.d /= n;
  s.r /= n;
  return s;
}

// Solves D x = rhs after checking that D is numerically nonsingular.
Eigen::MatrixXd checked_solve(const LocalSystem& s, const Eigen::MatrixXd& rhs,
                              int order, double v0, double h) {
  if (s.support < order + 2) {
    throw NumericError("local fit at v0=" + fmt(v0) + " (h=" + fmt(h) +
                       ") has " + std::to_string(s.support) +
                       " weighted points; need at least " +
                       std::to_string(order + 2));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.d, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi) {
    throw NumericError("local design at v0=" + fmt(v0) + " (h=" + fmt(h) +
                       ") is singular");
  }
  return s.d.ldlt().solve(rhs);
}

Eigen::VectorXd unit(int p, int k) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
  e(k) = 1.0;
  return e;
}

// Row weights w' g(v_i) K_h(v_i) for a fixed coefficient vector w.
Eigen::VectorXd row_weights(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                            double v0, double h, const KernelSpec& kernel) {
  const int p = static_cast<int>(w.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  const double reach = kernel.support();
  for (Index i = 0; i < v.size(); ++i) {
    const double u = (v(i) - v0) / h;
    if (std::abs(u) > reach) continue;
    const double k = kernel(u) / h;
    if (k <= 0.0) continue;
    double acc = 0.0, pw = 1.0;
    for (int c = 0; c < p; ++c) {
      acc += w(c) * pw;
      pw *= u;
    }
    out(i) = acc * k;
  }
  return out;
}

// Polynomial coefficients of the kernel on its support: K(u) = sum_q a_q u^q.
std::vector<double> kernel_polynomial(const KernelSpec& kernel) {
  switch (kernel.family) {
    case KernelFamily::kUniform: return {0.5};
    case KernelFamily::kEpanechnikov: return {0.75, 0.0, -0.75};
    case KernelFamily::kGaussian: break;
  }
  return {};
}

struct LoocvPoint {
  bool ok = false;
  double loo_residual = 0.0;
};

// Leave-one-out residual at v_i from local moments M_k = sum K(u) u^k and
// T_k = sum K(u) u^k phi (sums over all points, including i).
LoocvPoint loocv_point(const std::vector<long double>& m,
                       const std::vector<long double>& t, int order,
                       Index support, double phi_i, double k0) {
  LoocvPoint out;
  if (support < order + 2) return out;
  const int p = order + 1;
  if (order == 1) {
    const double m0 = static_cast<double>(m[0]), m1 = static_cast<double>(m[1]),
                 m2 = static_cast<double>(m[2]);
    const double det = m0 * m2 - m1 * m1;
    if (!(det > 1e-12 * m0 * m2)) return out;
    const double fit =
        (m2 * static_cast<double>(t[0]) - m1 * static_cast<double>(t[1])) / det;
    const double hii = m2 / det * k0;
    if (!(1.0 - hii > 1e-8)) return out;
    out.ok = true;
    out.loo_residual = (phi_i - fit) / (1.0 - hii);
    return out;
  }
  Eigen::MatrixXd mm(p, p);
  Eigen::VectorXd tt(p);
  for (int a = 0; a < p; ++a) {
    tt(a) = static_cast<double>(t[a]);
    for (int b = 0; b < p; ++b) mm(a, b) = static_cast<double>(m[a + b]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mm, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().maxCoeff())) {
    return out;
  }
  const auto ldlt = mm.ldlt();
  const double fit = ldlt.solve(tt)(0);
  const double hii = ldlt.solve(unit(p, 0))(0) * k0;
  if (!(1.0 - hii > 1e-8)) return out;
  out.ok = true;
  out.loo_residual = (phi_i - fit) / (1.0 - hii);
  return out;
}

// LOOCV score for one candidate. Compact kernels use prefix sums of powers
// of the sorted data so each point costs O(order^2) after an O(n) sweep.
double loocv_score(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                   int order, const KernelSpec& kernel, double h) {
  const Index n = v.size();
  const int mmax = 2 * order;
  const double k0 = kernel(0.0);
  double sum = 0.0;
  Index valid = 0;

  if (!kernel.compact()) {
    std::vector<long double> m(mmax + 1), t(order + 1);
    for (Index i = 0; i < n; ++i) {
      std::fill(m.begin(), m.end(), 0.0L);
      std::fill(t.begin(), t.end(), 0.0L);
      for (Index l = 0; l < n; ++l) {
        const double u = (v(l) - v(i)) / h;
        const double k = kernel(u);
        long double pw = k;
        for (int q = 0; q <= mmax; ++q) {
          m[q] += pw;
          if (q <= order) t[q] += pw * phi(l);
          pw *= u;
        }
      }
      const auto pt = loocv_point(m, t, order, n, phi(i), k0);
      if (pt.ok) {
        ++valid;
        sum += pt.loo_residual * pt.loo_residual;
      }
    }
  } else {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return v(a) < v(b); });
    const double center = v.mean();
    const double scale = std::max(std::sqrt((v.array() - center).square().mean()),
                                  1e-300);
    const std::vector<double> poly = kernel_polynomial(kernel);
    const int qmax = mmax + static_cast<int>(poly.size()) - 1;
    const int tmax = order + static_cast<int>(poly.size()) - 1;
    // Prefix sums of z^q and z^q phi with z the standardized data.
    std::vector<std::vector<long double>> ps(qmax + 1), pt(tmax + 1);
    for (auto& s : ps) s.assign(static_cast<std::size_t>(n) + 1, 0.0L);
    for (auto& s : pt) s.assign(static_cast<std::size_t>(n) + 1, 0.0L);
    std::vector<double> zs(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
      const long double z = (v(idx[r]) - center) / scale;
      zs[r] = static_cast<double>(z);
      long double pw = 1.0L;
      for (int q = 0; q <= qmax; ++q) {
        ps[q][r + 1] = ps[q][r] + pw;
        if (q <= tmax) pt[q][r + 1] = pt[q][r] + pw * phi(idx[r]);
        pw *= z;
      }
    }
    // Binomial coefficients for shifting power sums to be centred at z_i.
    std::vector<std::vector<long double>> binom(qmax + 1);
    for (int a = 0; a <= qmax; ++a) {
      binom[a].assign(a + 1, 1.0L);
      for (int b = 1; b < a; ++b) binom[a][b] = binom[a - 1][b - 1] + binom[a - 1][b];
    }
    const long double hz = h / scale;  // bandwidth in z units
    std::vector<long double> raw(qmax + 1), rawt(tmax + 1), cen(qmax + 1),
        cent(tmax + 1), m(mmax + 1), t(order + 1);
    std::size_t lo = 0, hi = 0;
    for (Index r = 0; r < n; ++r) {
      const double zi = zs[r];
      // Window [lo, hi) of points with |z - zi| <= hz, with a small slack so
      // ties on the boundary are included consistently.
      const double lo_val = static_cast<double>(zi - hz * (1 + 1e-12L));
      const double hi_val = static_cast<double>(zi + hz * (1 + 1e-12L));
      while (lo < static_cast<std::size_t>(n) && zs[lo] < lo_val) ++lo;
      if (hi < lo) hi = lo;
      while (hi < static_cast<std::size_t>(n) && zs[hi] <= hi_val) ++hi;
      const auto support = static_cast<Index>(hi - lo);
      for (int q = 0; q <= qmax; ++q) raw[q] = ps[q][hi] - ps[q][lo];
      for (int q = 0; q <= tmax; ++q) rawt[q] = pt[q][hi] - pt[q][lo];
      // sum (z - zi)^q = sum_b C(q,b) S_b (-zi)^(q-b), then scale by hz^-q.
      for (int q = 0; q <= qmax; ++q) {
        long double acc = 0.0L, acct = 0.0L, negpow = 1.0L;
        for (int b = q; b >= 0; --b) {
          acc += binom[q][b] * raw[b] * negpow;
          if (q <= tmax) acct += binom[q][b] * rawt[b] * negpow;
          negpow *= -static_cast<long double>(zi);
        }
        const long double sc = std::pow(hz, -q);
        cen[q] = acc * sc;
        if (q <= tmax) cent[q] = acct * sc;
      }
      for (int q = 0; q <= mmax; ++q) {
        long double acc = 0.0L;
        for (std::size_t a = 0; a < poly.size(); ++a) acc += poly[a] * cen[q + a];
        m[q] = acc;
      }
      for (int q = 0; q <= order; ++q) {
        long double acc = 0.0L;
        for (std::size_t a = 0; a < poly.size(); ++a) acc += poly[a] * cent[q + a];
        t[q] = acc;
      }
      const auto res = loocv_point(m, t, order, support, phi(idx[r]), k0);
      if (res.ok) {
        ++valid;
        sum += res.loo_residual * res.loo_residual;
      }
    }
  }
  if (static_cast<double>(valid) < 0.95 * static_cast<double>(n)) return kNaN;
  return sum / static_cast<double>(valid);
}

}  // namespace

double KernelSpec::operator()(double u) const {
  switch (family) {
    case KernelFamily::kUniform: return std::abs(u) <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::kEpanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::kGaussian: return normal_pdf(u);
  }
  return 0.0;
}

double KernelSpec::c2() const {
  switch (family) {
    case KernelFamily::kUniform: return 1.0 / 3.0;
    case KernelFamily::kEpanechnikov: return 1.0 / 5.0;
    case KernelFamily::kGaussian: return 1.0;
  }
  return 0.0;
}

double KernelSpec::support() const {
  return compact() ? 1.0 : std::numeric_limits<double>::infinity();
}

KernelSpec make_kernel(KernelFamily family) {
  KernelSpec k;
  k.family = family;
  return k;
}

KernelSpec kernel_from_string(const std::string& name) {
  if (name == "uniform") return make_kernel(KernelFamily::kUniform);
  if (name == "epanechnikov") return make_kernel(KernelFamily::kEpanechnikov);
  if (name == "gaussian") return make_kernel(KernelFamily::kGaussian);
  throw ConfigError("unknown kernel '" + name +
                    "' (expected uniform, epanechnikov or gaussian)");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kUniform: return "uniform";
    case KernelFamily::kEpanechnikov: return "epanechnikov";
    case KernelFamily::kGaussian: return "gaussian";
  }
  return "unknown";
}

std::string to_string(Mode mode) {
  return mode == Mode::kPlain ? "plain" : "debiased";
}

Mode mode_from_string(const std::string& name) {
  if (name == "plain") return Mode::kPlain;
  if (name == "debiased") return Mode::kDebiased;
  throw ConfigError("unknown mode '" + name + "' (expected plain or debiased)");
}

LocalFit local_poly_fit(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                        double v0, double h, int order,
                        const KernelSpec& kernel) {
  if (!(h > 0.0)) throw ConfigError("bandwidth must be positive");
  if (order < 0) throw ConfigError("local polynomial order must be >= 0");
  if (v.size() != phi.size()) throw DataError("local fit: length mismatch");
  const LocalSystem s = local_system(v, &phi, v0, h, order, kernel);
  LocalFit fit;
  fit.order = order;
  fit.h = h;
  fit.v0 = v0;
  fit.support = s.support;
  fit.beta = checked_solve(s, s.r, order, v0, h);
  fit.d = s.d;
  return fit;
}

double second_derivative(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                         double v0, double b, const KernelSpec& kernel) {
  const LocalFit fit = local_poly_fit(v, phi, v0, b, 3, kernel);
  return 2.0 * fit.beta(2) / (b * b);
}

Eigen::VectorXd GammaWeights::total() const {
  if (correction.size() == 0) return linear;
  return linear - correction;
}

namespace {

PointFit fit_point(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
                   double v0, double h, double b, const KernelSpec& kernel,
                   Mode mode) {
  PointFit pf;
  pf.v0 = v0;
  const LocalSystem sh = local_system(v, &phi, v0, h, 1, kernel);
  Eigen::MatrixXd rhs(2, 2);
  rhs.col(0) = sh.r;
  rhs.col(1) = unit(2, 0);
  const Eigen::MatrixXd sol_h = checked_solve(sh, rhs, 1, v0, h);
  pf.beta_h = sol_h.col(0);
  pf.plain = pf.beta_h(0);
  pf.gamma.h = h;
  pf.gamma.b = b;
  pf.gamma.c2 = kernel.c2();
  pf.w_linear = sol_h.col(1);
  pf.gamma.linear = row_weights(v, pf.w_linear, v0, h, kernel);
  pf.estimate = pf.plain;
  if (mode == Mode::kDebiased) {
    const LocalSystem sb = local_system(v, &phi, v0, b, 3, kernel);
    Eigen::MatrixXd rhs_b(4, 2);
    rhs_b.col(0) = sb.r;
    rhs_b.col(1) = unit(4, 2);
    const Eigen::MatrixXd sol_b = checked_solve(sb, rhs_b, 3, v0, b);
    pf.beta_b = sol_b.col(0);
    pf.second_derivative = 2.0 * pf.beta_b(2) / (b * b);
    pf.w_correction = (kernel.c2() * h * h / (b * b)) * sol_b.col(1);
    pf.gamma.correction = row_weights(v, pf.w_correction, v0, b, kernel);
    pf.estimate = pf.plain - 0.5 * h * h * kernel.c2() * pf.second_derivative;
  }
  pf.ok = true;
  return pf;
}

}  // namespace

double gamma_at(const PointFit& point, const KernelSpec& kernel, double v) {
  if (!point.ok) return kNaN;
  Eigen::VectorXd one(1);
  one(0) = v;
  double out = row_weights(one, point.w_linear, point.v0, point.gamma.h, kernel)(0);
  if (point.w_correction.size() > 0) {
    out -= row_weights(one, point.w_correction, point.v0, point.gamma.b, kernel)(0);
  }
  return out;
}

DebiasedEstimate debiased_estimate(const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& phi, double v0,
                                   double h, double b, const KernelSpec& kernel) {
  if (!(h > 0.0) || !(b > 0.0)) throw ConfigError("bandwidths must be positive");
  if (v.size() != phi.size()) throw DataError("local fit: length mismatch");
  PointFit pf = fit_point(v, phi, v0, h, b, kernel, Mode::kDebiased);
  DebiasedEstimate out;
  out.estimate = pf.estimate;
  out.plain = pf.plain;
  out.second_derivative = pf.second_derivative;
  out.gamma = std::move(pf.gamma);
  return out;
}

std::vector<double> default_bandwidth_grid(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DataError("bandwidth grid: empty data");
  const double range = v.maxCoeff() - v.minCoeff();
  if (!(range > 0.0)) throw DataError("bandwidth grid: modifier is constant");
  std::vector<double> grid;
  const double lo = std::log(range / 50.0), hi = std::log(range);
  for (int k = 0; k < 20; ++k) grid.push_back(std::exp(lo + (hi - lo) * k / 19.0));
  grid.back() = range;
  return grid;
}

BandwidthSelection loocv_bandwidth(const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& phi, int order,
                                   const KernelSpec& kernel,
                                   const std::vector<double>& candidates) {
  if (candidates.empty()) throw ConfigError("LOOCV: empty bandwidth grid");
  if (v.size() != phi.size()) throw DataError("LOOCV: length mismatch");
  for (double h : candidates) {
    if (!(h > 0.0)) throw ConfigError("LOOCV: bandwidths must be positive");
  }
  BandwidthSelection sel;
  sel.candidates = candidates;
  sel.scores.resize(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    sel.scores[c] = loocv_score(v, phi, order, kernel, candidates[c]);
  });
  double best = std::numeric_limits<double>::infinity();
  for (double s : sel.scores) {
    if (std::isfinite(s)) best = std::min(best, s);
  }
  if (!std::isfinite(best)) {
    throw NumericError("LOOCV: every candidate bandwidth gives singular fits");
  }
  // Near-ties (relative 1e-9, or absolute relative to the scale of phi) go
  // to the larger bandwidth.
  const double scale = phi.squaredNorm() / static_cast<double>(phi.size());
  const double tol = 1e-9 * best + 1e-14 * scale;
  double chosen = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (std::isfinite(sel.scores[c]) && sel.scores[c] <= best + tol) {
      chosen = std::max(chosen, candidates[c]);
    }
  }
  sel.h = chosen;
  return sel;
}

std::vector<double> CurveFit::estimates() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.ok ? p.estimate : kNaN);
  return out;
}

CurveFit curve(const Eigen::VectorXd& v, const Eigen::VectorXd& phi,
               const std::vector<double>& grid, double h, double b,
               const KernelSpec& kernel, Mode mode) {
  if (!(h > 0.0)) throw ConfigError("bandwidth h must be positive");
  if (mode == Mode::kDebiased && !(b > 0.0)) {
    throw ConfigError("bandwidth b must be positive");
  }
  if (v.size() != phi.size()) throw DataError("curve: length mismatch");
  CurveFit out;
  out.grid = grid;
  out.h = h;
  out.b = b;
  out.kernel = kernel;
  out.mode = mode;
  out.points.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    try {
      out.points[g] = fit_point(v, phi, grid[g], h, b, kernel, mode);
    } catch (const NumericError& e) {
      out.points[g] = PointFit{};
      out.points[g].v0 = grid[g];
      out.points[g].diagnostic = e.what();
    }
  });
  return out;
}

}  // namespace hetfx::localpoly
