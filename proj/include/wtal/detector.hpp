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

// Inference: fused posteriors, class selection, multi-threshold candidate
// grouping, outer-inner contrast scoring and per-class temporal NMS.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wtal/datakit.hpp"
#include "wtal/error.hpp"
#include "wtal/evalkit.hpp"
#include "wtal/mil.hpp"
#include "wtal/model.hpp"
#include "wtal/numerics.hpp"
#include "wtal/trainer.hpp"

namespace wtal {

enum class ScoreMode { kFused, kSoftmaxOnly, kMinMaxFused };

inline std::string to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::kFused: return "fused";
    case ScoreMode::kSoftmaxOnly: return "softmax_only";
    case ScoreMode::kMinMaxFused: return "minmax_fused";
  }
  return "fused";
}

inline ScoreMode parse_score_mode(const std::string& s) {
  if (s == "fused") return ScoreMode::kFused;
  if (s == "softmax_only") return ScoreMode::kSoftmaxOnly;
  if (s == "minmax_fused") return ScoreMode::kMinMaxFused;
  throw ConfigError("unknown score_mode \"" + s + "\"");
}

struct DetectConfig {
  double theta_vid = 0.2;
  std::vector<double> theta_seg_list = threshold_grid(0.0, 0.25, 0.025);
  double nms_iou = 0.6;
  ScoreMode score_mode = ScoreMode::kFused;
  double outer_inflation = 0.25;
  std::size_t segments = 0;  // test-time T; 0 keeps every original segment

  void validate() const {
    if (theta_seg_list.empty()) throw ConfigError("detect: theta_seg_list is empty");
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ConfigError("detect: nms_iou must lie in (0, 1]");
    if (outer_inflation < 0.0) throw ConfigError("detect: outer_inflation must be >= 0");
  }
};

using Proposal = Detection;

// softmax over classes per segment, times P(d = 1) according to the mode.
inline Matrix fused_posterior(const Matrix& scores, std::span<const double> magnitudes, double max_magnitude,
                              ScoreMode mode) {
  if (magnitudes.size() != scores.rows()) throw ShapeError("fused_posterior: magnitudes/scores length mismatch");
  std::vector<double> in_dist(scores.rows(), 1.0);
  if (mode == ScoreMode::kFused) {
    for (std::size_t t = 0; t < in_dist.size(); ++t) in_dist[t] = uncertainty(magnitudes[t], max_magnitude);
  } else if (mode == ScoreMode::kMinMaxFused && !magnitudes.empty()) {
    const auto [lo, hi] = std::minmax_element(magnitudes.begin(), magnitudes.end());
    const double range = *hi - *lo;
    if (range > 0.0) {
      for (std::size_t t = 0; t < in_dist.size(); ++t) in_dist[t] = (magnitudes[t] - *lo) / range;
    }
  }
  Matrix post(scores.rows(), scores.cols());
  for (std::size_t t = 0; t < scores.rows(); ++t) {
    const auto p = softmax(scores.row(t));
    for (std::size_t c = 0; c < p.size(); ++c) post(t, c) = p[c] * in_dist[t];
  }
  return post;
}

// Classes with p_c > theta; the argmax (lowest index on ties) when none pass.
inline std::vector<std::size_t> select_classes(std::span<const double> probs, double theta_vid) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] > theta_vid) out.push_back(c);
  }
  if (out.empty() && !probs.empty()) {
    out.push_back(static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
  }
  return out;
}

struct Run {
  std::size_t first = 0;  // inclusive
  std::size_t last = 0;   // inclusive
  friend bool operator==(const Run&, const Run&) = default;
};

inline std::vector<Run> group_candidates(const std::vector<bool>& mask) {
  std::vector<Run> runs;
  std::size_t t = 0;
  while (t < mask.size()) {
    if (!mask[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end + 1 < mask.size() && mask[end + 1]) ++end;
    runs.push_back({t, end});
    t = end + 1;
  }
  return runs;
}

// mean(inner) - mean(outer), the outer region being ceil(inflation * len)
// segments on each side, clipped to the video.
inline double score_proposal(std::span<const double> column, const Run& run, double outer_inflation) {
  if (run.first > run.last || run.last >= column.size()) throw RangeError("score_proposal: invalid run");
  const std::size_t len = run.last - run.first + 1;
  double inner = 0.0;
  for (std::size_t t = run.first; t <= run.last; ++t) inner += column[t];
  inner /= static_cast<double>(len);
  const auto pad = static_cast<std::size_t>(std::ceil(outer_inflation * static_cast<double>(len)));
  const std::size_t lo = run.first >= pad ? run.first - pad : 0;
  const std::size_t hi = std::min(column.size() - 1, run.last + pad);
  double outer = 0.0;
  std::size_t count = 0;
  for (std::size_t t = lo; t < run.first; ++t, ++count) outer += column[t];
  for (std::size_t t = run.last + 1; t <= hi; ++t, ++count) outer += column[t];
  return count == 0 ? inner : inner - outer / static_cast<double>(count);
}

inline Interval segment_to_time(const Run& run, std::size_t segments, double duration) {
  const double per = duration / static_cast<double>(segments);
  return {static_cast<double>(run.first) * per, static_cast<double>(run.last + 1) * per};
}

namespace detail {

inline bool proposal_before(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  return a.t_end < b.t_end;
}

}  // namespace detail

// Greedy NMS over one class: keep the best remaining proposal, drop those with
// tIoU >= threshold against it.
inline std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold) {
  std::sort(proposals.begin(), proposals.end(), detail::proposal_before);
  std::vector<Proposal> kept;
  std::vector<bool> removed(proposals.size(), false);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(proposals[i]);
    for (std::size_t j = i + 1; j < proposals.size(); ++j) {
      if (!removed[j] && tiou({proposals[i].t_start, proposals[i].t_end}, {proposals[j].t_start, proposals[j].t_end}) >=
                             iou_threshold) {
        removed[j] = true;
      }
    }
  }
  return kept;
}

struct VideoInference {
  std::vector<double> video_probs;
  Matrix posteriors;
  std::vector<double> magnitudes;
  std::size_t segments = 0;
};

inline VideoInference infer(const ModelParams& params, const VideoRecord& video, const DetectConfig& dcfg,
                            const MilConfig& mcfg) {
  Matrix feats = video.features;
  if (dcfg.segments > 0) {
    Rng unused;
    feats = gather_rows(video.features, sample_segments(video.features.rows(), dcfg.segments, SampleMode::kTest, unused));
  }
  const ForwardOut fwd = forward(params, feats);
  VideoInference out;
  out.segments = feats.rows();
  out.video_probs = video_probabilities(aggregate_video_score(fwd.scores, mcfg.k_act(out.segments)));
  out.posteriors = fused_posterior(fwd.scores, fwd.magnitudes, mcfg.max_magnitude, dcfg.score_mode);
  out.magnitudes = fwd.magnitudes;
  return out;
}

// Proposals pooled over all segment thresholds, before NMS (ordered canonically).
inline std::vector<Proposal> proposals_from_posteriors(const std::string& video_id, const Matrix& posteriors,
                                                       std::span<const std::size_t> classes, double duration,
                                                       const DetectConfig& cfg) {
  std::vector<Proposal> pool;
  std::vector<double> column(posteriors.rows());
  std::vector<bool> mask(posteriors.rows());
  for (std::size_t c : classes) {
    for (std::size_t t = 0; t < posteriors.rows(); ++t) column[t] = posteriors(t, c);
    for (double theta : cfg.theta_seg_list) {
      for (std::size_t t = 0; t < column.size(); ++t) mask[t] = column[t] > theta;
      for (const Run& run : group_candidates(mask)) {
        const Interval iv = segment_to_time(run, posteriors.rows(), duration);
        pool.push_back({video_id, c, iv.start, iv.end, score_proposal(column, run, cfg.outer_inflation)});
      }
    }
  }
  std::sort(pool.begin(), pool.end(), [](const Proposal& a, const Proposal& b) {
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return detail::proposal_before(a, b);
  });
  return pool;
}

// Ordered by (class, t_start, score desc).
inline std::vector<Proposal> detect(const ModelParams& params, const VideoRecord& video, const DetectConfig& dcfg,
                                    const MilConfig& mcfg) {
  dcfg.validate();
  if (!(video.duration > 0.0)) throw DatasetError("detect: video " + video.video_id + " has no duration");
  const VideoInference inf = infer(params, video, dcfg, mcfg);
  const auto classes = select_classes(inf.video_probs, dcfg.theta_vid);
  const auto pool = proposals_from_posteriors(video.video_id, inf.posteriors, classes, video.duration, dcfg);
  std::vector<Proposal> out;
  for (std::size_t c : classes) {
    std::vector<Proposal> mine;
    for (const auto& p : pool) {
      if (p.class_id == c) mine.push_back(p);
    }
    auto kept = nms(std::move(mine), dcfg.nms_iou);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  std::sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) {
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    if (a.t_start != b.t_start) return a.t_start < b.t_start;
    if (a.score != b.score) return a.score > b.score;
    return a.t_end < b.t_end;
  });
  return out;
}

inline std::vector<Proposal> detect_all(const ModelParams& params, const std::vector<const VideoRecord*>& videos,
                                        const DetectConfig& dcfg, const MilConfig& mcfg, std::size_t threads = 1) {
  std::vector<std::vector<Proposal>> per_video(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) { per_video[i] = detect(params, *videos[i], dcfg, mcfg); });
  std::vector<Proposal> out;
  for (auto& v : per_video) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace wtal
