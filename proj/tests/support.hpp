// Copyright 2026 The wtal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Shared helpers for the test suites: random instances and naive reference
// implementations used as oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "wtal/numerics.hpp"

namespace wtal::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(gen);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline ConvKernel random_kernel(std::size_t k, std::size_t in, std::size_t out, std::mt19937_64& gen) {
  ConvKernel w(k, in, out);
  std::normal_distribution<double> dist(0.0, 0.5);
  for (double& v : w.data) v = dist(gen);
  return w;
}

// Central difference of a scalar function with respect to one coordinate.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Direct nested-loop convolution with explicit zero padding.
inline Matrix naive_conv1d(const Matrix& x, const ConvKernel& w, const std::vector<double>& bias) {
  const long pad = static_cast<long>(w.taps - 1) / 2;
  Matrix out(x.rows(), w.out);
  for (long t = 0; t < static_cast<long>(x.rows()); ++t) {
    for (std::size_t o = 0; o < w.out; ++o) {
      double acc = bias[o];
      for (long k = 0; k < static_cast<long>(w.taps); ++k) {
        const long src = t + k - pad;
        if (src < 0 || src >= static_cast<long>(x.rows())) continue;
        for (std::size_t i = 0; i < w.in; ++i) {
          acc += x(static_cast<std::size_t>(src), i) * w.data[(static_cast<std::size_t>(k) * w.in + i) * w.out + o];
        }
      }
      out(static_cast<std::size_t>(t), o) = acc;
    }
  }
  return out;
}

// Largest mean over all k-subsets, by enumeration.
inline double best_subset_mean(const std::vector<double>& v, std::size_t k, bool largest = true) {
  const std::size_t n = v.size();
  double best = largest ? -INFINITY : INFINITY;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) s += v[i];
    }
    s /= static_cast<double>(k);
    best = largest ? std::max(best, s) : std::min(best, s);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  // Per-process, so concurrently running test binaries never share a directory.
  const auto dir = std::filesystem::temp_directory_path() /
                   ("wtal_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace wtal::testing
