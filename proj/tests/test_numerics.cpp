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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "support.hpp"
#include "wtal/error.hpp"
#include "wtal/numerics.hpp"

namespace wtal {
namespace {

using testing::central_difference;
using testing::random_kernel;
using testing::random_matrix;
using testing::random_vector;
using testing::rel_err;

// Central differences at h = 1e-6 carry ~1e-9 absolute roundoff, so relative
// errors are taken against max(|a|, |b|, 1e-2).
constexpr double kFdTol = 1e-6;
constexpr double kFdFloor = 1e-2;
constexpr int kSeeds = 100;

double contract(const Matrix& a, const Matrix& b) {
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

ConvKernel identity_kernel(std::size_t dim) {
  ConvKernel w(1, dim, dim);
  for (std::size_t i = 0; i < dim; ++i) w.at(0, i, i) = 1.0;
  return w;
}

TEST(Conv1d, IdentityKernelIsIdentity) {
  std::mt19937_64 gen(1);
  const Matrix x = random_matrix(6, 3, gen);
  EXPECT_EQ(conv1d_forward(x, identity_kernel(3), std::vector<double>(3, 0.0)), x);
}

TEST(Conv1d, ZeroInputGivesBiasRows) {
  const Matrix x(5, 2);
  std::mt19937_64 gen(2);
  const ConvKernel w = random_kernel(3, 2, 4, gen);
  const std::vector<double> bias = {0.5, -1.0, 2.0, 0.0};
  const Matrix y = conv1d_forward(x, w, bias);
  for (std::size_t t = 0; t < y.rows(); ++t) {
    for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(y(t, o), bias[o]);
  }
}

TEST(Conv1d, MatchesNestedLoopReference) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t k = seed % 2 == 0 ? 3 : 5;
    const Matrix x = random_matrix(5, 2, gen);
    const ConvKernel w = random_kernel(k, 2, 3, gen);
    const auto bias = random_vector(3, gen);
    const Matrix got = conv1d_forward(x, w, bias);
    const Matrix want = testing::naive_conv1d(x, w, bias);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
  }
}

TEST(Conv1d, RejectsShapeMismatch) {
  const Matrix x(4, 3);
  EXPECT_THROW(conv1d_forward(x, ConvKernel(3, 2, 2), std::vector<double>(2)), ShapeError);
  EXPECT_THROW(conv1d_forward(x, ConvKernel(3, 3, 2), std::vector<double>(3)), ShapeError);
  EXPECT_THROW(conv1d_forward(x, ConvKernel(2, 3, 2), std::vector<double>(2)), ShapeError);
  EXPECT_THROW(conv1d_backward(Matrix(4, 3), x, ConvKernel(3, 3, 2)), ShapeError);
}

TEST(Conv1dBackward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 gen(3);
  const Matrix x = random_matrix(5, 2, gen);
  const ConvKernel w = random_kernel(3, 2, 3, gen);
  const auto g = conv1d_backward(Matrix(5, 3), x, w);
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.weights.data) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(Conv1dBackward, IdentityKernelPassesGradientThrough) {
  std::mt19937_64 gen(4);
  const Matrix x = random_matrix(5, 3, gen);
  const Matrix up = random_matrix(5, 3, gen);
  EXPECT_EQ(conv1d_backward(up, x, identity_kernel(3)).input, up);
}

TEST(Conv1dBackward, MatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    Matrix x = random_matrix(6, 3, gen);
    ConvKernel w = random_kernel(3, 3, 2, gen);
    auto bias = random_vector(2, gen);
    const Matrix up = random_matrix(6, 2, gen);
    const auto g = conv1d_backward(up, x, w);
    auto loss = [&] { return contract(up, conv1d_forward(x, w, bias)); };
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_LE(rel_err(g.input.data()[i], central_difference(loss, x.data()[i]), kFdFloor), kFdTol);
    }
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      ASSERT_LE(rel_err(g.weights.data[i], central_difference(loss, w.data[i]), kFdFloor), kFdTol);
    }
    for (std::size_t i = 0; i < bias.size(); ++i) {
      ASSERT_LE(rel_err(g.bias[i], central_difference(loss, bias[i]), kFdFloor), kFdTol);
    }
  }
}

TEST(Relu, ForwardExample) {
  const Matrix x(1, 3, {-1.0, 0.0, 2.0});
  EXPECT_EQ(relu_forward(x), Matrix(1, 3, {0.0, 0.0, 2.0}));
}

TEST(Relu, SubgradientAtZeroIsZero) {
  const Matrix x(1, 3, {-1.0, 0.0, 2.0});
  EXPECT_EQ(relu_backward(Matrix(1, 3, 1.0), x), Matrix(1, 3, {0.0, 0.0, 1.0}));
}

TEST(Relu, MatchesFiniteDifferencesAwayFromZero) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    Matrix x = random_matrix(4, 5, gen);
    for (double& v : x.data()) {
      if (std::abs(v) < 1e-3) v = 0.5;
    }
    const Matrix up = random_matrix(4, 5, gen);
    const Matrix g = relu_backward(up, x);
    auto loss = [&] { return contract(up, relu_forward(x)); };
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_LE(rel_err(g.data()[i], central_difference(loss, x.data()[i]), kFdFloor), kFdTol);
    }
  }
}

TEST(Linear, ZeroWeightsGiveBiasRows) {
  std::mt19937_64 gen(5);
  const Matrix x = random_matrix(3, 4, gen);
  const std::vector<double> bias = {1.0, -2.0};
  const Matrix y = linear_forward(x, Matrix(4, 2), bias);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(y(t, 0), 1.0);
    EXPECT_EQ(y(t, 1), -2.0);
  }
}

TEST(Linear, IdentityWeightsAreIdentity) {
  std::mt19937_64 gen(6);
  const Matrix x = random_matrix(3, 4, gen);
  Matrix eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  EXPECT_EQ(linear_forward(x, eye, std::vector<double>(4, 0.0)), x);
}

TEST(Linear, RejectsShapeMismatch) {
  EXPECT_THROW(linear_forward(Matrix(2, 3), Matrix(4, 2), std::vector<double>(2)), ShapeError);
  EXPECT_THROW(linear_forward(Matrix(2, 3), Matrix(3, 2), std::vector<double>(3)), ShapeError);
}

TEST(Linear, MatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    Matrix x = random_matrix(4, 3, gen);
    Matrix w = random_matrix(3, 2, gen);
    auto bias = random_vector(2, gen);
    const Matrix up = random_matrix(4, 2, gen);
    const auto g = linear_backward(up, x, w);
    auto loss = [&] { return contract(up, linear_forward(x, w, bias)); };
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_LE(rel_err(g.input.data()[i], central_difference(loss, x.data()[i]), kFdFloor), kFdTol);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      ASSERT_LE(rel_err(g.weights.data()[i], central_difference(loss, w.data()[i]), kFdFloor), kFdTol);
    }
    for (std::size_t i = 0; i < bias.size(); ++i) {
      ASSERT_LE(rel_err(g.bias[i], central_difference(loss, bias[i]), kFdFloor), kFdTol);
    }
  }
}

TEST(Softmax, EqualLogitsAreUniform) {
  for (double p : softmax(std::vector<double>(7, 3.5))) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
}

TEST(Softmax, ClosedForm) {
  const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, ShiftInvariantAndOnSimplex) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    auto x = random_vector(6, gen, 5.0);
    const auto p = softmax(x);
    for (double& v : x) v += 123.25;
    const auto q = softmax(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-12);
      EXPECT_GE(p[i], 0.0);
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, StableForLargeLogits) {
  const auto p = softmax(std::vector<double>{1000.0, 999.0, -1000.0});
  EXPECT_TRUE(std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]));
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Softmax, MonotoneInItsOwnLogit) {
  std::vector<double> x = {0.1, -0.4, 0.7};
  const double before = softmax(x)[1];
  x[1] += 0.5;
  EXPECT_GT(softmax(x)[1], before);
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    auto x = random_vector(5, gen, 2.0);
    const auto up = random_vector(5, gen);
    const auto g = softmax_backward(softmax(x), up);
    auto loss = [&] {
      const auto p = softmax(x);
      return std::inner_product(p.begin(), p.end(), up.begin(), 0.0);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_LE(rel_err(g[i], central_difference(loss, x[i]), kFdFloor), kFdTol);
    }
  }
}

TEST(L2Norm, Examples) {
  EXPECT_EQ(l2_norm(std::vector<double>{3.0, 4.0}), 5.0);
  const std::vector<double> zero(4, 0.0);
  EXPECT_EQ(l2_norm(zero), 0.0);
  for (double g : l2_norm_grad(zero)) EXPECT_EQ(g, 0.0);
}

TEST(L2Norm, GradientMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(seed);
    auto v = random_vector(6, gen);
    const auto g = l2_norm_grad(v);
    auto f = [&] { return l2_norm(v); };
    for (std::size_t i = 0; i < v.size(); ++i) {
      ASSERT_LE(rel_err(g[i], central_difference(f, v[i]), kFdFloor), kFdTol);
    }
  }
}

TEST(TopK, Examples) {
  const std::vector<double> v = {3.0, 1.0, 2.0};
  const auto top = topk_indices(v, 2);
  EXPECT_EQ(std::set<std::size_t>(top.begin(), top.end()), (std::set<std::size_t>{0, 2}));
  EXPECT_EQ(topk_indices(v, 3).size(), 3u);
  EXPECT_EQ(bottomk_indices(v, 1), std::vector<std::size_t>{1});
}

TEST(TopK, TiesPreferLowerIndex) {
  const std::vector<double> v(5, 1.0);
  EXPECT_EQ(topk_indices(v, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(bottomk_indices(v, 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(TopK, RejectsKOutOfRange) {
  const std::vector<double> v = {1.0, 2.0};
  EXPECT_THROW(topk_indices(v, 0), RangeError);
  EXPECT_THROW(topk_indices(v, 3), RangeError);
  EXPECT_THROW(bottomk_indices(v, 0), RangeError);
}

TEST(TopK, MeanEqualsBestSubsetMean) {
  for (int seed = 0; seed < 60; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t n = 1 + static_cast<std::size_t>(seed % 12);
    auto v = random_vector(n, gen);
    if (seed % 3 == 0) {
      for (double& x : v) x = std::round(x);  // force ties
    }
    for (std::size_t k = 1; k <= n; ++k) {
      double top = 0.0;
      double bottom = 0.0;
      for (std::size_t i : topk_indices(v, k)) top += v[i];
      for (std::size_t i : bottomk_indices(v, k)) bottom += v[i];
      EXPECT_NEAR(top / static_cast<double>(k), testing::best_subset_mean(v, k, true), 1e-12);
      EXPECT_NEAR(bottom / static_cast<double>(k), testing::best_subset_mean(v, k, false), 1e-12);
    }
  }
}

TEST(TopK, SelectionAndComplementPartitionIndices) {
  std::mt19937_64 gen(9);
  const auto v = random_vector(10, gen);
  const auto top = topk_indices(v, 4);
  std::set<std::size_t> chosen(top.begin(), top.end());
  EXPECT_EQ(chosen.size(), 4u);
  const double min_top = v[top.back()];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!chosen.contains(i)) {
      EXPECT_LE(v[i], min_top);
    }
  }
}

TEST(Matrix, RejectsInconsistentData) {
  EXPECT_THROW(Matrix(2, 3, std::vector<double>(5)), ShapeError);
  EXPECT_TRUE(Matrix(2, 2, 1.0).all_finite());
  EXPECT_FALSE(Matrix(1, 1, NAN).all_finite());
}

}  // namespace
}  // namespace wtal
