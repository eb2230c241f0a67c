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

// Video-level aggregation, magnitude-based pseudo action/background selection,
// and the training losses (classification, magnitude separation, background
// entropy) with their gradients w.r.t. segment scores and embedded features.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wtal/error.hpp"
#include "wtal/model.hpp"
#include "wtal/numerics.hpp"

namespace wtal {

struct MilConfig {
  double max_magnitude = 100.0;  // m
  double act_ratio = 9.0;        // r_act
  double bkg_ratio = 4.0;        // r_bkg
  double alpha = 5e-4;           // weight of the magnitude loss
  double beta = 1.0;             // weight of the background entropy loss
  double log_eps = 1e-12;

  void validate() const {
    if (!(max_magnitude > 0.0)) throw ConfigError("mil: max_magnitude must be > 0");
    if (!(act_ratio >= 1.0) || !(bkg_ratio >= 1.0)) throw ConfigError("mil: ratios must be >= 1");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("mil: alpha and beta must be >= 0");
    if (!(log_eps > 0.0)) throw ConfigError("mil: log_eps must be > 0");
  }

  std::size_t k_act(std::size_t segments) const { return ratio_count(segments, act_ratio); }
  std::size_t k_bkg(std::size_t segments) const { return ratio_count(segments, bkg_ratio); }

  // Pseudo action and background sets must fit side by side.
  void validate_for_length(std::size_t segments) const {
    validate();
    if (k_act(segments) + k_bkg(segments) > segments) {
      throw ConfigError("mil: k_act + k_bkg = " + std::to_string(k_act(segments) + k_bkg(segments)) +
                        " exceeds T = " + std::to_string(segments));
    }
  }

 private:
  static std::size_t ratio_count(std::size_t segments, double ratio) {
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(segments) / ratio));
    return std::max<std::size_t>(1, k);
  }
};

struct Aggregation {
  std::vector<double> raw;                        // a_c
  std::vector<std::vector<std::size_t>> support;  // top-k rows used for each class
};

// Per class, the mean of the k largest segment scores.
inline Aggregation aggregate_with_support(const Matrix& scores, std::size_t k_act) {
  detail::check_k(k_act, scores.rows(), "aggregate_video_score");
  Aggregation agg;
  agg.raw.resize(scores.cols());
  agg.support.resize(scores.cols());
  std::vector<double> column(scores.rows());
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    for (std::size_t t = 0; t < scores.rows(); ++t) column[t] = scores(t, c);
    agg.support[c] = topk_indices(column, k_act);
    double sum = 0.0;
    for (std::size_t t : agg.support[c]) sum += column[t];
    agg.raw[c] = sum / static_cast<double>(k_act);
  }
  return agg;
}

inline std::vector<double> aggregate_video_score(const Matrix& scores, std::size_t k_act) {
  return aggregate_with_support(scores, k_act).raw;
}

inline std::vector<double> video_probabilities(std::span<const double> raw) { return softmax(raw); }

struct PseudoSelection {
  std::vector<std::size_t> act;
  std::vector<std::size_t> bkg;
};

inline PseudoSelection select_pseudo(std::span<const double> magnitudes, std::size_t k_act, std::size_t k_bkg) {
  return {topk_indices(magnitudes, k_act), bottomk_indices(magnitudes, k_bkg)};
}

// P(d = 1 | segment): clipped magnitude over m.
inline double uncertainty(double magnitude, double max_magnitude) {
  return std::min(max_magnitude, std::max(0.0, magnitude)) / max_magnitude;
}

// Multi-hot label divided by its number of positives.
inline std::vector<double> normalize_labels(std::span<const double> multi_hot) {
  double total = 0.0;
  for (double v : multi_hot) total += v;
  if (!(total > 0.0)) throw DatasetError("video has no positive label");
  std::vector<double> y(multi_hot.begin(), multi_hot.end());
  for (double& v : y) v /= total;
  return y;
}

namespace detail {

inline void check_label_row(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) {
    if (v < 0.0) throw DatasetError("label row has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DatasetError("label row is not normalized (sum " + std::to_string(s) + ")");
}

inline double safe_log(double p, double eps) { return std::log(std::max(p, eps)); }

// d/dp of -w * log(max(p, eps)).
inline double neg_log_grad(double p, double w, double eps) { return p > eps ? -w / p : 0.0; }

inline Matrix mean_rows(const Matrix& m, std::span<const std::size_t> rows) {
  if (rows.empty()) throw RangeError("empty pseudo segment selection");
  Matrix mean(1, m.cols());
  for (std::size_t r : rows) {
    const auto src = m.row(r);
    for (std::size_t j = 0; j < m.cols(); ++j) mean(0, j) += src[j];
  }
  for (double& v : mean.data()) v /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace detail

// Per-video classification term: -sum_c y_c log p_c.
inline double video_loss_cls(std::span<const double> probs, std::span<const double> labels, double eps = 1e-12) {
  if (probs.size() != labels.size()) throw ShapeError("loss_cls: probs/labels length mismatch");
  detail::check_label_row(labels);
  double loss = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (labels[c] != 0.0) loss -= labels[c] * detail::safe_log(probs[c], eps);
  }
  return loss;
}

inline double loss_cls(const Matrix& video_probs, const Matrix& labels, double eps = 1e-12) {
  if (video_probs.rows() != labels.rows() || video_probs.cols() != labels.cols()) {
    throw ShapeError("loss_cls: probs/labels shape mismatch");
  }
  if (video_probs.rows() == 0) throw RangeError("loss_cls: empty batch");
  double total = 0.0;
  for (std::size_t n = 0; n < labels.rows(); ++n) total += video_loss_cls(video_probs.row(n), labels.row(n), eps);
  return total / static_cast<double>(labels.rows());
}

// Per-video magnitude term: (max(0, m - |mean act|) + |mean bkg|)^2.
inline double video_loss_um(const Matrix& embedded, const PseudoSelection& sel, double max_magnitude) {
  const Matrix act = detail::mean_rows(embedded, sel.act);
  const Matrix bkg = detail::mean_rows(embedded, sel.bkg);
  const double u = std::max(0.0, max_magnitude - l2_norm(act.data())) + l2_norm(bkg.data());
  return u * u;
}

inline double loss_um(std::span<const Matrix> embedded, std::span<const PseudoSelection> sel, double max_magnitude) {
  if (embedded.size() != sel.size()) throw ShapeError("loss_um: batch size mismatch");
  if (embedded.empty()) throw RangeError("loss_um: empty batch");
  double total = 0.0;
  for (std::size_t n = 0; n < embedded.size(); ++n) total += video_loss_um(embedded[n], sel[n], max_magnitude);
  return total / static_cast<double>(embedded.size());
}

// Mean class distribution of the pseudo background segments.
inline std::vector<double> background_class_mean(const Matrix& scores, std::span<const std::size_t> bkg) {
  if (bkg.empty()) throw RangeError("loss_be: empty background selection");
  std::vector<double> mean(scores.cols(), 0.0);
  for (std::size_t j : bkg) {
    const auto p = softmax(scores.row(j));
    for (std::size_t c = 0; c < p.size(); ++c) mean[c] += p[c];
  }
  for (double& v : mean) v /= static_cast<double>(bkg.size());
  return mean;
}

// Per-video entropy term: (1/C) sum_c -log pbar_c.
inline double entropy_term(std::span<const double> mean_probs, double eps = 1e-12) {
  double loss = 0.0;
  for (double p : mean_probs) loss -= detail::safe_log(p, eps);
  return loss / static_cast<double>(mean_probs.size());
}

inline double video_loss_be(const Matrix& scores, const PseudoSelection& sel, double eps = 1e-12) {
  return entropy_term(background_class_mean(scores, sel.bkg), eps);
}

inline double loss_be(std::span<const Matrix> scores, std::span<const PseudoSelection> sel, double eps = 1e-12) {
  if (scores.size() != sel.size()) throw ShapeError("loss_be: batch size mismatch");
  if (scores.empty()) throw RangeError("loss_be: empty batch");
  double total = 0.0;
  for (std::size_t n = 0; n < scores.size(); ++n) total += video_loss_be(scores[n], sel[n], eps);
  return total / static_cast<double>(scores.size());
}

// Loss values of one video plus the gradient of
// weight * (cls + alpha * um + beta * be) w.r.t. scores and embedded features.
struct VideoLoss {
  double cls = 0.0;
  double um = 0.0;
  double be = 0.0;
  Matrix grad_scores;
  Matrix grad_embedded;
};

inline VideoLoss video_loss(const ForwardOut& fwd, std::span<const double> labels, const MilConfig& cfg,
                            double weight) {
  const std::size_t steps = fwd.scores.rows();
  const std::size_t classes = fwd.scores.cols();
  const std::size_t k_act = cfg.k_act(steps);
  const std::size_t k_bkg = cfg.k_bkg(steps);
  VideoLoss out{0.0, 0.0, 0.0, Matrix(steps, classes), Matrix(steps, fwd.embedded.cols())};

  // Classification through top-k aggregation and video softmax.
  const Aggregation agg = aggregate_with_support(fwd.scores, k_act);
  const auto probs = video_probabilities(agg.raw);
  out.cls = video_loss_cls(probs, labels, cfg.log_eps);
  std::vector<double> grad_p(classes);
  for (std::size_t c = 0; c < classes; ++c) grad_p[c] = detail::neg_log_grad(probs[c], labels[c], cfg.log_eps);
  const auto grad_raw = softmax_backward(probs, grad_p);
  for (std::size_t c = 0; c < classes; ++c) {
    const double g = weight * grad_raw[c] / static_cast<double>(k_act);
    for (std::size_t t : agg.support[c]) out.grad_scores(t, c) += g;
  }

  const PseudoSelection sel = select_pseudo(fwd.magnitudes, k_act, k_bkg);

  // Magnitude separation; selection indices are constants.
  const Matrix act_mean = detail::mean_rows(fwd.embedded, sel.act);
  const Matrix bkg_mean = detail::mean_rows(fwd.embedded, sel.bkg);
  const double act_norm = l2_norm(act_mean.data());
  const double gap = cfg.max_magnitude - act_norm;
  const double u = std::max(0.0, gap) + l2_norm(bkg_mean.data());
  out.um = u * u;
  const double du = weight * cfg.alpha * 2.0 * u;
  if (du != 0.0) {
    if (gap > 0.0) {
      const auto g = l2_norm_grad(act_mean.data());
      const double s = -du / static_cast<double>(sel.act.size());
      for (std::size_t i : sel.act) {
        auto row = out.grad_embedded.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) row[j] += s * g[j];
      }
    }
    const auto g = l2_norm_grad(bkg_mean.data());
    const double s = du / static_cast<double>(sel.bkg.size());
    for (std::size_t i : sel.bkg) {
      auto row = out.grad_embedded.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) row[j] += s * g[j];
    }
  }

  // Background entropy of the averaged segment class distribution.
  std::vector<std::vector<double>> seg_probs;
  seg_probs.reserve(sel.bkg.size());
  std::vector<double> mean(classes, 0.0);
  for (std::size_t j : sel.bkg) {
    seg_probs.push_back(softmax(fwd.scores.row(j)));
    for (std::size_t c = 0; c < classes; ++c) mean[c] += seg_probs.back()[c];
  }
  for (double& v : mean) v /= static_cast<double>(sel.bkg.size());
  out.be = entropy_term(mean, cfg.log_eps);
  if (cfg.beta != 0.0) {
    std::vector<double> grad_mean(classes);
    const double w = weight * cfg.beta / static_cast<double>(classes) / static_cast<double>(sel.bkg.size());
    for (std::size_t c = 0; c < classes; ++c) grad_mean[c] = detail::neg_log_grad(mean[c], w, cfg.log_eps);
    for (std::size_t idx = 0; idx < sel.bkg.size(); ++idx) {
      const auto g = softmax_backward(seg_probs[idx], grad_mean);
      auto row = out.grad_scores.row(sel.bkg[idx]);
      for (std::size_t c = 0; c < classes; ++c) row[c] += g[c];
    }
  }
  return out;
}

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double um = 0.0;
  double be = 0.0;
  ModelParams grads;
};

// Batch loss and parameter gradients. Per-video terms are reduced in video
// index order so the result does not depend on evaluation order.
inline LossBreakdown loss_total(const ModelParams& params, std::span<const ForwardOut> batch,
                                std::span<const std::vector<double>> labels, const MilConfig& cfg) {
  if (batch.size() != labels.size()) throw ShapeError("loss_total: batch/labels size mismatch");
  if (batch.empty()) throw RangeError("loss_total: empty batch");
  cfg.validate();
  const double weight = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out{0.0, 0.0, 0.0, 0.0, params.zeros_like()};
  for (std::size_t n = 0; n < batch.size(); ++n) {
    VideoLoss v = video_loss(batch[n], labels[n], cfg, weight);
    out.cls += v.cls;
    out.um += v.um;
    out.be += v.be;
    out.grads.add(backward(params, batch[n], v.grad_scores, v.grad_embedded));
  }
  out.cls *= weight;
  out.um *= weight;
  out.be *= weight;
  out.total = out.cls + cfg.alpha * out.um + cfg.beta * out.be;
  return out;
}

}  // namespace wtal
