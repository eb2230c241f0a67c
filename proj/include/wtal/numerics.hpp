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

// Dense kernels for the segment model: 1-D convolution, ReLU, affine map,
// softmax, L2 norm and top-k selection, each with its exact backward pass.
// Matrices are row-major with one row per temporal segment.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wtal/error.hpp"

namespace wtal {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// K x in x out convolution kernel, element (k, i, o) at (k * in + i) * out + o.
struct ConvKernel {
  std::size_t taps = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> data;

  ConvKernel() = default;
  ConvKernel(std::size_t k, std::size_t in_dim, std::size_t out_dim)
      : taps(k), in(in_dim), out(out_dim), data(k * in_dim * out_dim, 0.0) {}

  double& at(std::size_t k, std::size_t i, std::size_t o) { return data[(k * in + i) * out + o]; }
  double at(std::size_t k, std::size_t i, std::size_t o) const { return data[(k * in + i) * out + o]; }

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void check_conv(const Matrix& input, const ConvKernel& w, std::span<const double> bias) {
  require(w.taps % 2 == 1, "conv1d: kernel size must be odd");
  require(w.data.size() == w.taps * w.in * w.out, "conv1d: kernel storage size");
  require(input.cols() == w.in, "conv1d: input has " + std::to_string(input.cols()) +
                                    " channels, kernel expects " + std::to_string(w.in));
  require(bias.size() == w.out, "conv1d: bias length != output channels");
}

}  // namespace detail

// "Same" 1-D convolution over time with zero padding of (K - 1) / 2.
inline Matrix conv1d_forward(const Matrix& input, const ConvKernel& w, std::span<const double> bias) {
  detail::check_conv(input, w, bias);
  const std::size_t steps = input.rows();
  const auto pad = static_cast<std::ptrdiff_t>(w.taps / 2);
  Matrix out(steps, w.out);
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = out.row(t);
    std::copy(bias.begin(), bias.end(), dst.begin());
    for (std::size_t k = 0; k < w.taps; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      const auto x = input.row(static_cast<std::size_t>(src));
      for (std::size_t i = 0; i < w.in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wk = &w.data[(k * w.in + i) * w.out];
        for (std::size_t o = 0; o < w.out; ++o) dst[o] += xi * wk[o];
      }
    }
  }
  return out;
}

struct ConvGrads {
  Matrix input;
  ConvKernel weights;
  std::vector<double> bias;
};

inline ConvGrads conv1d_backward(const Matrix& grad_out, const Matrix& input, const ConvKernel& w) {
  detail::require(input.cols() == w.in, "conv1d_backward: input/kernel channel mismatch");
  detail::require(grad_out.rows() == input.rows() && grad_out.cols() == w.out,
                  "conv1d_backward: grad_out shape mismatch");
  detail::require(w.taps % 2 == 1, "conv1d_backward: kernel size must be odd");
  const std::size_t steps = input.rows();
  const auto pad = static_cast<std::ptrdiff_t>(w.taps / 2);
  ConvGrads g{Matrix(steps, w.in), ConvKernel(w.taps, w.in, w.out), std::vector<double>(w.out, 0.0)};
  for (std::size_t t = 0; t < steps; ++t) {
    const auto go = grad_out.row(t);
    for (std::size_t o = 0; o < w.out; ++o) g.bias[o] += go[o];
    for (std::size_t k = 0; k < w.taps; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      const auto x = input.row(static_cast<std::size_t>(src));
      auto gx = g.input.row(static_cast<std::size_t>(src));
      for (std::size_t i = 0; i < w.in; ++i) {
        const double* wk = &w.data[(k * w.in + i) * w.out];
        double* gwk = &g.weights.data[(k * w.in + i) * w.out];
        const double xi = x[i];
        double acc = 0.0;
        for (std::size_t o = 0; o < w.out; ++o) {
          acc += go[o] * wk[o];
          gwk[o] += xi * go[o];
        }
        gx[i] += acc;
      }
    }
  }
  return g;
}

inline Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

// Subgradient 0 at x == 0.
inline Matrix relu_backward(const Matrix& grad_out, const Matrix& x) {
  detail::require(grad_out.rows() == x.rows() && grad_out.cols() == x.cols(),
                  "relu_backward: shape mismatch");
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x.data()[i] > 0.0)) g.data()[i] = 0.0;
  }
  return g;
}

// input (T x F) times weights (F x C) plus bias, row-wise.
inline Matrix linear_forward(const Matrix& input, const Matrix& weights, std::span<const double> bias) {
  detail::require(input.cols() == weights.rows(), "linear: input cols != weight rows");
  detail::require(bias.size() == weights.cols(), "linear: bias length != weight cols");
  Matrix out(input.rows(), weights.cols());
  for (std::size_t t = 0; t < input.rows(); ++t) {
    auto dst = out.row(t);
    std::copy(bias.begin(), bias.end(), dst.begin());
    const auto x = input.row(t);
    for (std::size_t f = 0; f < weights.rows(); ++f) {
      const double xf = x[f];
      if (xf == 0.0) continue;
      const auto w = weights.row(f);
      for (std::size_t c = 0; c < weights.cols(); ++c) dst[c] += xf * w[c];
    }
  }
  return out;
}

struct LinearGrads {
  Matrix input;
  Matrix weights;
  std::vector<double> bias;
};

inline LinearGrads linear_backward(const Matrix& grad_out, const Matrix& input, const Matrix& weights) {
  detail::require(input.cols() == weights.rows(), "linear_backward: input cols != weight rows");
  detail::require(grad_out.rows() == input.rows() && grad_out.cols() == weights.cols(),
                  "linear_backward: grad_out shape mismatch");
  LinearGrads g{Matrix(input.rows(), input.cols()), Matrix(weights.rows(), weights.cols()),
                std::vector<double>(weights.cols(), 0.0)};
  for (std::size_t t = 0; t < input.rows(); ++t) {
    const auto go = grad_out.row(t);
    const auto x = input.row(t);
    auto gx = g.input.row(t);
    for (std::size_t c = 0; c < go.size(); ++c) g.bias[c] += go[c];
    for (std::size_t f = 0; f < weights.rows(); ++f) {
      const auto w = weights.row(f);
      auto gw = g.weights.row(f);
      double acc = 0.0;
      for (std::size_t c = 0; c < go.size(); ++c) {
        acc += go[c] * w[c];
        gw[c] += x[f] * go[c];
      }
      gx[f] = acc;
    }
  }
  return g;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Vector-Jacobian product of softmax: given p = softmax(x) and dL/dp, dL/dx.
inline std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> grad_probs) {
  detail::require(probs.size() == grad_probs.size(), "softmax_backward: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (grad_probs[i] - dot);
  return g;
}

inline constexpr double kNormGradFloor = 1e-12;

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// v / |v|, and 0 when |v| < 1e-12.
inline std::vector<double> l2_norm_grad(std::span<const double> v) {
  std::vector<double> g(v.size(), 0.0);
  const double n = l2_norm(v);
  if (n < kNormGradFloor) return g;
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] / n;
  return g;
}

namespace detail {

inline void check_k(std::size_t k, std::size_t n, const char* who) {
  if (k < 1 || k > n) {
    throw RangeError(std::string(who) + ": k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(n) + "]");
  }
}

}  // namespace detail

// Indices of the k largest values, ordered by (value desc, index asc).
inline std::vector<std::size_t> topk_indices(std::span<const double> v, std::size_t k) {
  detail::check_k(k, v.size(), "topk_indices");
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  idx.resize(k);
  return idx;
}

// Indices of the k smallest values, ordered by (value asc, index asc).
inline std::vector<std::size_t> bottomk_indices(std::span<const double> v, std::size_t k) {
  detail::check_k(k, v.size(), "bottomk_indices");
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] < v[b] || (v[a] == v[b] && a < b); });
  idx.resize(k);
  return idx;
}

}  // namespace wtal
