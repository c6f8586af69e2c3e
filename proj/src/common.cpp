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

#include "hetfx/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include <boost/math/distributions/normal.hpp>

namespace hetfx {
namespace {

std::atomic<int> g_threads{0};
thread_local bool t_inside_worker = false;

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_thread_count(int threads) { g_threads = std::max(0, threads); }

int thread_count() {
  const int t = g_threads.load();
  return t > 0 ? t : default_threads();
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(thread_count()));
  if (workers <= 1 || t_inside_worker) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    t_inside_worker = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    t_inside_worker = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  // Rethrow the lowest-index failure so error reporting is deterministic.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a,
                          std::uint64_t stream_b) {
  return derive_seed(derive_seed(seed, stream_a), stream_b);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

double uniform01(Rng& rng) {
  // 53 random bits mapped to (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("normal_quantile: probability must lie in (0,1), got " +
                      std::to_string(p));
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

std::vector<double> linspace(double lo, double hi, int points) {
  std::vector<double> out;
  if (points <= 0) return out;
  if (points == 1) return {lo};
  out.reserve(points);
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) out.push_back(lo + step * i);
  out.back() = hi;
  return out;
}

std::vector<int> shuffled_fold_ids(Index n, int k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw ConfigError("fold count must satisfy 2 <= K <= n (K=" +
                      std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, 0x666f6c6473ULL);
  // Fisher-Yates with an explicit bounded draw so the permutation does not
  // depend on the standard library's distribution implementation.
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (Index pos = 0; pos < n; ++pos) {
    fold[order[pos]] = static_cast<int>((pos * k) / n);
  }
  return fold;
}

}  // namespace hetfx
