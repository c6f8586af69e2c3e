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

#ifndef HETFX_COMMON_HPP_
#define HETFX_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hetfx {

inline constexpr const char* kVersion = "0.3.0";

using Index = Eigen::Index;

// Error categories double as CLI exit codes.
enum class ErrorKind { kConfig = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Schema, parameter and configuration problems.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

// Input data violating a contract (non-binary treatment, missing arm, ...).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

// Singular systems, degenerate fits and other numerical failures.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

// ---------------------------------------------------------------------------
// Threading. Work is split into statically indexed chunks and every result is
// written to a slot owned by its index, so outputs never depend on the number
// of workers. Calls made from inside a worker run serially.

void set_thread_count(int threads);
int thread_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Seeding. Every stochastic step derives its own stream from the top-level
// seed and a stream id, so draws are reproducible and schedule independent.

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a,
                          std::uint64_t stream_b);

using Rng = std::mt19937_64;
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

// Standard normal draw by Box-Muller on the engine's raw output, so the
// stream is identical across standard library implementations.
double standard_normal(Rng& rng);
double uniform01(Rng& rng);

// ---------------------------------------------------------------------------
// Small statistics helpers.

double normal_quantile(double p);
double normal_pdf(double x);
double normal_cdf(double x);
double expit(double x);

double mean(std::span<const double> x);
// Population variance (divides by n).
double variance(std::span<const double> x);
// Type-7 sample quantile.
double quantile(std::vector<double> x, double p);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> s) {
  return {s.data(), static_cast<Index>(s.size())};
}

std::vector<double> linspace(double lo, double hi, int points);

// Shuffle-then-chunk partition of n rows into k folds; sizes differ by at
// most one and the assignment is a pure function of (n, k, seed).
std::vector<int> shuffled_fold_ids(Index n, int k, std::uint64_t seed);

}  // namespace hetfx

#endif  // HETFX_COMMON_HPP_
