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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtal/binary_io.hpp"
#include "wtal/datakit.hpp"
#include "wtal/error.hpp"
#include "wtal/json_util.hpp"
#include "wtal/mil.hpp"
#include "wtal/model.hpp"
#include "wtal/rng.hpp"

namespace wtal {

struct TrainConfig {
  std::size_t segments = 750;  // T
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t kernel_size = 3;
  std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints
  std::size_t threads = 1;
  MilConfig mil;

  void validate() const {
    if (segments < 1) throw ConfigError("train: segments must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      throw ConfigError("train: Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
    if (kernel_size % 2 == 0) throw ConfigError("train: kernel_size must be odd");
    mil.validate_for_length(segments);
  }
};

enum class SampleMode { kTrain, kTest };

// T indices into a sequence of `length` segments. Test mode takes
// floor(t * L / T); train mode draws one index uniformly inside each of T
// equal bins. Indices are non-decreasing; short videos repeat segments.
inline std::vector<std::size_t> sample_segments(std::size_t length, std::size_t segments, SampleMode mode, Rng& rng) {
  if (length < 1) throw RangeError("sample_segments: empty video");
  std::vector<std::size_t> idx(segments);
  const double step = static_cast<double>(length) / static_cast<double>(segments);
  for (std::size_t t = 0; t < segments; ++t) {
    double pos = static_cast<double>(t * length) / static_cast<double>(segments);
    if (mode == SampleMode::kTrain) pos += rng.uniform() * step;
    idx[t] = std::min(length - 1, static_cast<std::size_t>(std::floor(pos)));
  }
  return idx;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

struct AdamState {
  ModelParams first;
  ModelParams second;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Rejects non-finite gradients before touching state.
inline void adam_step(ModelParams& params, AdamState& state, const ModelParams& grads, const AdamConfig& cfg) {
  const auto g_blocks = grads.blocks();
  for (std::size_t b = 0; b < g_blocks.size(); ++b) {
    for (std::size_t i = 0; i < g_blocks[b].size(); ++i) {
      if (!std::isfinite(g_blocks[b][i])) {
        throw NumericalError("non-finite gradient in " + std::string(ModelParams::kBlockNames[b]) + "[" +
                             std::to_string(i) + "]");
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto p_blocks = params.blocks();
  auto m_blocks = state.first.blocks();
  auto v_blocks = state.second.blocks();
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
      const double g = g_blocks[b][i];
      double& m = m_blocks[b][i];
      double& v = v_blocks[b][i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      p_blocks[b][i] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    }
  }
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
      if (!std::isfinite(p_blocks[b][i])) {
        throw NumericalError("non-finite parameter in " + std::string(ModelParams::kBlockNames[b]) +
                             " after step " + std::to_string(state.step));
      }
    }
  }
}

struct LossRecord {
  std::uint64_t step = 0;
  double cls = 0.0;
  double um = 0.0;
  double be = 0.0;
  double total = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

inline std::string format_log_line(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu\t%.10g\t%.10g\t%.10g\t%.10g\n", static_cast<unsigned long long>(r.step), r.cls,
                r.um, r.be, r.total);
  return buf;
}

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::uint64_t step = 0;
  Rng rng;
  std::vector<std::size_t> order;  // video visiting order of the current epoch
  std::size_t cursor = 0;
  LossRecord running;              // exponential moving average of the losses

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

inline constexpr std::string_view kStateMagic = "UMTS";
inline constexpr std::uint32_t kStateVersion = 1;

inline std::vector<std::uint8_t> encode_state(const TrainState& s) {
  io::ByteWriter w;
  w.magic(kStateMagic);
  w.u32(kStateVersion);
  w.u64(s.step);
  w.u64(s.adam.step);
  w.u64(s.cursor);
  w.u32(static_cast<std::uint32_t>(s.order.size()));
  for (auto i : s.order) w.u64(i);
  w.str(s.rng.serialize());
  w.f64(s.running.cls);
  w.f64(s.running.um);
  w.f64(s.running.be);
  w.f64(s.running.total);
  encode_params(w, s.params);
  encode_params(w, s.adam.first);
  encode_params(w, s.adam.second);
  return w.bytes();
}

inline TrainState decode_state(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic(kStateMagic);
  if (const auto v = r.u32(); v != kStateVersion) throw VersionError(what + ": unsupported state version " + std::to_string(v));
  TrainState s;
  s.step = r.u64();
  s.adam.step = r.u64();
  s.cursor = r.u64();
  s.order.resize(r.u32());
  for (auto& i : s.order) i = r.u64();
  s.rng.deserialize(r.str());
  s.running.cls = r.f64();
  s.running.um = r.f64();
  s.running.be = r.f64();
  s.running.total = r.f64();
  s.running.step = s.step;
  s.params = decode_params(r);
  s.adam.first = decode_params(r);
  s.adam.second = decode_params(r);
  r.expect_end();
  return s;
}

inline void save_state(const TrainState& s, const std::string& path) { io::write_file(path, encode_state(s)); }
inline TrainState load_state(const std::string& path) { return decode_state(io::read_file(path), path); }

inline TrainState initial_state(std::size_t feature_dim, std::size_t num_classes, const TrainConfig& cfg) {
  TrainState s;
  s.params = init_params(feature_dim, num_classes, cfg.kernel_size, cfg.seed);
  s.adam.first = s.params.zeros_like();
  s.adam.second = s.params.zeros_like();
  s.rng = Rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct BatchResult {
  LossRecord loss;
  ModelParams grads;
};

// Forward, loss and backward for each video; reduction in video order.
inline BatchResult batch_loss(const ModelParams& params, std::span<const Matrix> features,
                              std::span<const std::vector<double>> labels, const MilConfig& cfg,
                              std::size_t threads = 1) {
  if (features.size() != labels.size() || features.empty()) throw ShapeError("batch_loss: bad batch");
  const double weight = 1.0 / static_cast<double>(features.size());
  std::vector<VideoLoss> losses(features.size());
  std::vector<ModelParams> grads(features.size());
  parallel_for(features.size(), threads, [&](std::size_t n) {
    const ForwardOut fwd = forward(params, features[n]);
    losses[n] = video_loss(fwd, labels[n], cfg, weight);
    grads[n] = backward(params, fwd, losses[n].grad_scores, losses[n].grad_embedded);
  });
  BatchResult out{{}, params.zeros_like()};
  for (std::size_t n = 0; n < features.size(); ++n) {
    out.loss.cls += losses[n].cls;
    out.loss.um += losses[n].um;
    out.loss.be += losses[n].be;
    out.grads.add(grads[n]);
  }
  out.loss.cls *= weight;
  out.loss.um *= weight;
  out.loss.be *= weight;
  out.loss.total = out.loss.cls + cfg.alpha * out.loss.um + cfg.beta * out.loss.be;
  return out;
}

struct TrainResult {
  TrainState state;
  std::vector<LossRecord> history;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(const TrainState&)> on_checkpoint;
};

// Trains until state.step == cfg.steps. Pass a previous state to resume.
inline TrainResult train(const std::vector<const VideoRecord*>& videos, std::size_t num_classes,
                         const TrainConfig& cfg, std::optional<TrainState> resume = std::nullopt,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (videos.empty()) throw DatasetError("train: no training videos");
  const std::size_t feature_dim = videos.front()->features.cols();
  std::vector<std::vector<double>> labels;
  labels.reserve(videos.size());
  for (const auto* v : videos) {
    if (v->features.cols() != feature_dim) throw DatasetError("train: inconsistent feature dims");
    if (v->labels.size() != num_classes) throw DatasetError("train: label/class count mismatch for " + v->video_id);
    labels.push_back(normalize_labels(v->labels));
  }

  TrainResult result{resume ? std::move(*resume) : initial_state(feature_dim, num_classes, cfg), {}};
  TrainState& st = result.state;
  if (st.params.feature_dim() != feature_dim || st.params.num_classes() != num_classes) {
    throw DatasetError("train: resumed parameters do not match the dataset dimensions");
  }
  if (st.order.size() != videos.size()) {
    st.order.resize(videos.size());
    std::iota(st.order.begin(), st.order.end(), std::size_t{0});
    st.rng.shuffle(st.order.begin(), st.order.end());
    st.cursor = 0;
  }
  const AdamConfig adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  const std::size_t batch = std::min(cfg.batch_size, videos.size());

  while (st.step < cfg.steps) {
    std::vector<Matrix> feats;
    std::vector<std::vector<double>> batch_labels;
    for (std::size_t b = 0; b < batch; ++b) {
      if (st.cursor == st.order.size()) {
        st.rng.shuffle(st.order.begin(), st.order.end());
        st.cursor = 0;
      }
      const std::size_t vi = st.order[st.cursor++];
      const auto idx = sample_segments(videos[vi]->features.rows(), cfg.segments, SampleMode::kTrain, st.rng);
      feats.push_back(gather_rows(videos[vi]->features, idx));
      batch_labels.push_back(labels[vi]);
    }
    BatchResult br = batch_loss(st.params, feats, batch_labels, cfg.mil, cfg.threads);
    br.loss.step = st.step + 1;
    for (double v : {br.loss.cls, br.loss.um, br.loss.be, br.loss.total}) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite loss at step " + std::to_string(br.loss.step) + " (cls " +
                             std::to_string(br.loss.cls) + ", um " + std::to_string(br.loss.um) + ", be " +
                             std::to_string(br.loss.be) + ")");
      }
    }
    adam_step(st.params, st.adam, br.grads, adam);
    ++st.step;
    constexpr double kEma = 0.98;
    const bool first = st.step == 1;
    st.running.step = st.step;
    st.running.cls = first ? br.loss.cls : kEma * st.running.cls + (1 - kEma) * br.loss.cls;
    st.running.um = first ? br.loss.um : kEma * st.running.um + (1 - kEma) * br.loss.um;
    st.running.be = first ? br.loss.be : kEma * st.running.be + (1 - kEma) * br.loss.be;
    st.running.total = first ? br.loss.total : kEma * st.running.total + (1 - kEma) * br.loss.total;
    result.history.push_back(br.loss);
    if (hooks.on_step) hooks.on_step(br.loss);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(st);
    }
  }
  return result;
}

// ---- gradient check ------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::array<double, 4> block_max_rel_err{};  // in ModelParams::kBlockNames order
  std::size_t parameters_checked = 0;
  std::string worst;  // "block[index]"

  double embed_max() const { return std::max(block_max_rel_err[0], block_max_rel_err[1]); }
  double cls_max() const { return std::max(block_max_rel_err[2], block_max_rel_err[3]); }
};

// Denominator floor of the relative error, so entries whose true gradient is
// ~0 are judged by absolute error instead.
inline constexpr double kGradCheckFloor = 1e-4;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

// Step of the loss-level check. The unscaled um term reaches ~1e4, so smaller
// steps lose the small gradient entries to roundoff.
inline constexpr double kGradCheckStep = 1e-5;

// Central differences of the total loss against the analytic gradient, for
// every parameter.
inline GradCheckReport gradient_check(const ModelParams& params, std::span<const Matrix> features,
                                      std::span<const std::vector<double>> labels, const MilConfig& cfg,
                                      double h = kGradCheckStep) {
  const BatchResult analytic = batch_loss(params, features, labels, cfg);
  GradCheckReport report;
  ModelParams probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = analytic.grads.blocks();
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
      const double saved = probe_blocks[b][i];
      probe_blocks[b][i] = saved + h;
      const double up = batch_loss(probe, features, labels, cfg).loss.total;
      probe_blocks[b][i] = saved - h;
      const double down = batch_loss(probe, features, labels, cfg).loss.total;
      probe_blocks[b][i] = saved;
      const double err = relative_error(grad_blocks[b][i], (up - down) / (2.0 * h));
      report.block_max_rel_err[b] = std::max(report.block_max_rel_err[b], err);
      if (err > report.max_rel_err || report.worst.empty()) {
        report.max_rel_err = err;
        report.worst = std::string(ModelParams::kBlockNames[b]) + "[" + std::to_string(i) + "]";
      }
      ++report.parameters_checked;
    }
  }
  return report;
}

struct GradCheckInstance {
  ModelParams params;
  std::vector<Matrix> features;
  std::vector<std::vector<double>> labels;  // normalized
};

// Random tiny problem: normal features, random non-empty multi-hot labels,
// Glorot weights and small random biases.
inline GradCheckInstance make_grad_check_instance(std::size_t segments, std::size_t feature_dim,
                                                  std::size_t num_classes, std::size_t videos, std::uint64_t seed,
                                                  std::size_t kernel_size = 3) {
  GradCheckInstance inst;
  inst.params = init_params(feature_dim, num_classes, kernel_size, seed);
  Rng rng(seed * 7919 + 1);
  for (double& b : inst.params.embed_bias) b = rng.uniform(-0.1, 0.1);
  for (double& b : inst.params.cls_bias) b = rng.uniform(-0.1, 0.1);
  for (std::size_t n = 0; n < videos; ++n) {
    Matrix f(segments, feature_dim);
    for (double& v : f.data()) v = rng.normal();
    inst.features.push_back(std::move(f));
    std::vector<double> y(num_classes, 0.0);
    y[rng.below(num_classes)] = 1.0;
    for (double& v : y) {
      if (rng.uniform() < 0.3) v = 1.0;
    }
    inst.labels.push_back(normalize_labels(y));
  }
  return inst;
}

}  // namespace wtal
