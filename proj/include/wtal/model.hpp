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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wtal/binary_io.hpp"
#include "wtal/error.hpp"
#include "wtal/numerics.hpp"
#include "wtal/rng.hpp"

namespace wtal {

// Embedding convolution (feature_dim -> feature_dim) followed by a linear
// segment classifier (feature_dim -> num_classes). Also used as the gradient
// container, since gradients share the parameter layout.
struct ModelParams {
  ConvKernel embed_weights;
  std::vector<double> embed_bias;
  Matrix cls_weights;
  std::vector<double> cls_bias;

  std::size_t feature_dim() const { return embed_weights.in; }
  std::size_t num_classes() const { return cls_weights.cols(); }
  std::size_t kernel_size() const { return embed_weights.taps; }

  static ModelParams zeros(std::size_t feature_dim, std::size_t num_classes, std::size_t kernel_size) {
    return {ConvKernel(kernel_size, feature_dim, feature_dim), std::vector<double>(feature_dim, 0.0),
            Matrix(feature_dim, num_classes), std::vector<double>(num_classes, 0.0)};
  }

  ModelParams zeros_like() const { return zeros(feature_dim(), num_classes(), kernel_size()); }

  // Parameter blocks in checkpoint order.
  std::array<std::span<double>, 4> blocks() {
    return {std::span<double>(embed_weights.data), std::span<double>(embed_bias),
            std::span<double>(cls_weights.data()), std::span<double>(cls_bias)};
  }
  std::array<std::span<const double>, 4> blocks() const {
    return {std::span<const double>(embed_weights.data), std::span<const double>(embed_bias),
            std::span<const double>(cls_weights.data()), std::span<const double>(cls_bias)};
  }

  static constexpr std::array<std::string_view, 4> kBlockNames = {"embed_weights", "embed_bias",
                                                                  "cls_weights", "cls_bias"};

  void add(const ModelParams& other) {
    auto dst = blocks();
    const auto src = other.blocks();
    for (std::size_t b = 0; b < dst.size(); ++b) {
      for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += src[b][i];
    }
  }

  void scale(double s) {
    for (auto block : blocks()) {
      for (double& v : block) v *= s;
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto block : blocks()) n += block.size();
    return n;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Uniform Glorot init for both layers, zero biases.
inline ModelParams init_params(std::size_t feature_dim, std::size_t num_classes, std::size_t kernel_size,
                               std::uint64_t seed) {
  if (feature_dim < 1 || num_classes < 1) throw RangeError("init_params: dims must be >= 1");
  if (kernel_size % 2 == 0) throw RangeError("init_params: kernel size must be odd");
  ModelParams p = ModelParams::zeros(feature_dim, num_classes, kernel_size);
  Rng rng(seed);
  const double conv_fan = static_cast<double>(kernel_size * feature_dim);
  const double conv_limit = std::sqrt(6.0 / (conv_fan + conv_fan));
  for (double& w : p.embed_weights.data) w = rng.uniform(-conv_limit, conv_limit);
  const double cls_limit = std::sqrt(6.0 / static_cast<double>(feature_dim + num_classes));
  for (double& w : p.cls_weights.data()) w = rng.uniform(-cls_limit, cls_limit);
  return p;
}

// Activations saved by the forward pass; also the reverse-mode tape for the
// fixed conv -> relu -> linear pipeline.
struct ForwardOut {
  Matrix features;        // T x F input
  Matrix pre_activation;  // T x F conv output
  Matrix embedded;        // T x F after ReLU
  Matrix scores;          // T x C raw class scores
  std::vector<double> magnitudes;
};

inline ForwardOut forward(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.feature_dim()) {
    throw ShapeError("forward: features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(params.feature_dim()));
  }
  ForwardOut out;
  out.features = features;
  out.pre_activation = conv1d_forward(features, params.embed_weights, params.embed_bias);
  out.embedded = relu_forward(out.pre_activation);
  out.scores = linear_forward(out.embedded, params.cls_weights, params.cls_bias);
  out.magnitudes.resize(features.rows());
  for (std::size_t t = 0; t < features.rows(); ++t) out.magnitudes[t] = l2_norm(out.embedded.row(t));
  return out;
}

// Replays the tape. grad_scores is dL/dA; grad_embedded carries any loss terms
// that read the embedded features directly (the magnitude loss).
inline ModelParams backward(const ModelParams& params, const ForwardOut& tape, const Matrix& grad_scores,
                            const Matrix& grad_embedded) {
  LinearGrads lin = linear_backward(grad_scores, tape.embedded, params.cls_weights);
  Matrix grad_e = std::move(lin.input);
  if (grad_embedded.rows() != grad_e.rows() || grad_embedded.cols() != grad_e.cols()) {
    throw ShapeError("backward: grad_embedded shape mismatch");
  }
  for (std::size_t i = 0; i < grad_e.size(); ++i) grad_e.data()[i] += grad_embedded.data()[i];
  const Matrix grad_pre = relu_backward(grad_e, tape.pre_activation);
  ConvGrads conv = conv1d_backward(grad_pre, tape.features, params.embed_weights);
  return {std::move(conv.weights), std::move(conv.bias), std::move(lin.weights), std::move(lin.bias)};
}

// Checkpoint: "UMCK", u32 version, u32 F, u32 C, u32 K, then every parameter
// as a little-endian f64 in block order.
inline constexpr std::string_view kCheckpointMagic = "UMCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void encode_params(io::ByteWriter& w, const ModelParams& params) {
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.feature_dim()));
  w.u32(static_cast<std::uint32_t>(params.num_classes()));
  w.u32(static_cast<std::uint32_t>(params.kernel_size()));
  for (auto block : params.blocks()) w.f64s(block);
}

inline ModelParams decode_params(io::ByteReader& r) {
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t f = r.u32();
  const std::uint32_t c = r.u32();
  const std::uint32_t k = r.u32();
  if (f == 0 || c == 0 || k % 2 == 0) throw CorruptFileError("checkpoint: invalid dimensions");
  const std::uint64_t expected = (static_cast<std::uint64_t>(k) * f * f + f + static_cast<std::uint64_t>(f) * c + c) * 8;
  if (r.remaining() < expected) throw CorruptFileError("checkpoint: truncated");
  ModelParams p = ModelParams::zeros(f, c, k);
  for (auto block : p.blocks()) r.f64s(block);
  return p;
}

inline void save_params(const ModelParams& params, const std::string& path) {
  io::ByteWriter w;
  encode_params(w, params);
  io::write_file(path, w.bytes());
}

inline ModelParams load_params(const std::string& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path);
  ModelParams p = decode_params(r);
  r.expect_end();
  return p;
}

}  // namespace wtal
