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

// Temporal detection evaluation with ActivityNet semantics: greedy
// score-ordered matching at a tIoU threshold, all-points interpolated AP,
// mAP over a threshold grid.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtal/error.hpp"

namespace wtal {

struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
};

// Zero-length or inverted intervals overlap nothing.
inline double tiou(const Interval& a, const Interval& b) {
  if (!(a.length() > 0.0) || !(b.length() > 0.0)) return 0.0;
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

struct Detection {
  std::string video_id;
  std::size_t class_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double score = 0.0;
};

struct GroundTruthInstance {
  std::string video_id;
  std::size_t class_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct GroundTruthVideo {
  double duration = 0.0;
  std::string subset;
};

struct GroundTruth {
  std::vector<std::string> classes;  // sorted vocabulary
  std::map<std::string, GroundTruthVideo> videos;
  std::vector<GroundTruthInstance> instances;

  std::size_t class_index(const std::string& label) const {
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw VocabularyError("unknown label \"" + label + "\"");
    return static_cast<std::size_t>(it - classes.begin());
  }
};

// Score desc, then earlier start, then input order.
inline std::vector<std::size_t> rank_detections(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].t_start < dets[b].t_start;
  });
  return order;
}

// Marks each ranked detection as true or false positive.
inline std::vector<bool> match_detections(const std::vector<Detection>& dets, std::span<const std::size_t> order,
                                          const std::vector<GroundTruthInstance>& gts, double threshold) {
  std::map<std::string, std::vector<std::size_t>> by_video;
  for (std::size_t g = 0; g < gts.size(); ++g) by_video[gts[g].video_id].push_back(g);
  std::vector<bool> matched(gts.size(), false);
  std::vector<bool> tp(order.size(), false);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Detection& d = dets[order[r]];
    const auto it = by_video.find(d.video_id);
    if (it == by_video.end()) continue;
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g : it->second) {
      if (matched[g]) continue;
      const double iou = tiou({d.t_start, d.t_end}, {gts[g].t_start, gts[g].t_end});
      if (iou >= threshold && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= 0.0) {
      matched[best_gt] = true;
      tp[r] = true;
    }
  }
  return tp;
}

// Area under the precision envelope, sum_k (R_k - R_{k-1}) * max_{j>=k} P_j.
inline double interpolated_ap(const std::vector<bool>& tp, std::size_t num_gt) {
  if (num_gt == 0 || tp.empty()) return 0.0;
  std::vector<double> prec(tp.size());
  std::vector<double> rec(tp.size());
  double hits = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    if (tp[k]) hits += 1.0;
    prec[k] = hits / static_cast<double>(k + 1);
    rec[k] = hits / static_cast<double>(num_gt);
  }
  for (std::size_t k = tp.size() - 1; k > 0; --k) prec[k - 1] = std::max(prec[k - 1], prec[k]);
  double ap = 0.0;
  double prev_rec = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    ap += (rec[k] - prev_rec) * prec[k];
    prev_rec = rec[k];
  }
  return ap;
}

struct ApResult {
  double ap = 0.0;
  bool has_ground_truth = false;
};

// Detections and ground truth of a single class.
inline ApResult average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruthInstance>& gts,
                                  double threshold) {
  if (gts.empty()) return {0.0, false};
  const auto order = rank_detections(dets);
  return {interpolated_ap(match_detections(dets, order, gts, threshold), gts.size()), true};
}

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> ap;  // [class][threshold]
  std::vector<bool> class_has_gt;
  std::vector<double> map;              // per threshold
  double average_map = 0.0;
  std::size_t num_ground_truth = 0;
  std::size_t num_detections = 0;
};

// Detections on videos outside the ground truth set are ignored.
inline EvalReport evaluate(const std::vector<Detection>& detections, const GroundTruth& gt,
                           const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ConfigError("evaluate: empty threshold list");
  const std::size_t num_classes = gt.classes.size();
  std::vector<std::vector<Detection>> dets(num_classes);
  std::vector<std::vector<GroundTruthInstance>> gts(num_classes);
  EvalReport report;
  report.classes = gt.classes;
  report.thresholds = thresholds;
  for (const auto& d : detections) {
    if (d.class_id >= num_classes) throw VocabularyError("detection class id out of vocabulary");
    if (!gt.videos.contains(d.video_id)) continue;
    dets[d.class_id].push_back(d);
    ++report.num_detections;
  }
  for (const auto& g : gt.instances) {
    if (g.class_id >= num_classes) throw VocabularyError("ground truth class id out of vocabulary");
    gts[g.class_id].push_back(g);
    ++report.num_ground_truth;
  }
  report.ap.assign(num_classes, std::vector<double>(thresholds.size(), 0.0));
  report.class_has_gt.assign(num_classes, false);
  report.map.assign(thresholds.size(), 0.0);
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    report.class_has_gt[c] = !gts[c].empty();
    if (!report.class_has_gt[c]) continue;
    ++evaluated;
    const auto order = rank_detections(dets[c]);
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      report.ap[c][i] = interpolated_ap(match_detections(dets[c], order, gts[c], thresholds[i]), gts[c].size());
      report.map[i] += report.ap[c][i];
    }
  }
  if (evaluated > 0) {
    for (double& m : report.map) m /= static_cast<double>(evaluated);
  }
  report.average_map = std::accumulate(report.map.begin(), report.map.end(), 0.0) /
                       static_cast<double>(report.map.size());
  return report;
}

// Inclusive grid lo, lo + step, ..., hi with values rounded to 1e-9.
inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(std::round((lo + step * static_cast<double>(i)) * 1e9) / 1e9);
  return grid;
}

inline std::vector<double> thumos_thresholds() { return threshold_grid(0.1, 0.7, 0.1); }
inline std::vector<double> activitynet_thresholds() { return threshold_grid(0.5, 0.95, 0.05); }

// ---- JSON interchange -------------------------------------------------------

// {"database": {id: {"duration", "subset", "annotations": [{"label", "segment"}]}}}
inline GroundTruth parse_ground_truth(const nlohmann::json& doc, const std::string& subset = "") {
  if (!doc.is_object() || !doc.contains("database") || !doc["database"].is_object()) {
    throw DatasetError("ground truth: missing \"database\" object");
  }
  GroundTruth gt;
  std::set<std::string> vocab;
  for (const auto& [id, video] : doc["database"].items()) {
    for (const auto& ann : video.value("annotations", nlohmann::json::array())) {
      vocab.insert(ann.at("label").get<std::string>());
    }
  }
  gt.classes.assign(vocab.begin(), vocab.end());
  for (const auto& [id, video] : doc["database"].items()) {
    GroundTruthVideo v{video.at("duration").get<double>(), video.value("subset", std::string())};
    if (!subset.empty() && v.subset != subset) continue;
    gt.videos.emplace(id, v);
    for (const auto& ann : video.value("annotations", nlohmann::json::array())) {
      const auto seg = ann.at("segment");
      if (!seg.is_array() || seg.size() != 2) throw DatasetError("ground truth: segment must be [start, end]");
      GroundTruthInstance g{id, gt.class_index(ann.at("label").get<std::string>()), seg[0].get<double>(),
                            seg[1].get<double>()};
      if (!(g.t_start < g.t_end)) throw DatasetError("ground truth: empty interval in video " + id);
      gt.instances.push_back(g);
    }
  }
  return gt;
}

// {"results": {id: [{"label", "segment", "score"}]}}
inline std::vector<Detection> parse_detections(const nlohmann::json& doc, const std::vector<std::string>& classes) {
  if (!doc.is_object() || !doc.contains("results") || !doc["results"].is_object()) {
    throw DatasetError("detections: missing \"results\" object");
  }
  GroundTruth vocab;
  vocab.classes = classes;
  std::vector<Detection> dets;
  for (const auto& [id, list] : doc["results"].items()) {
    for (const auto& item : list) {
      const auto seg = item.at("segment");
      if (!seg.is_array() || seg.size() != 2) throw DatasetError("detections: segment must be [start, end]");
      dets.push_back({id, vocab.class_index(item.at("label").get<std::string>()), seg[0].get<double>(),
                      seg[1].get<double>(), item.at("score").get<double>()});
    }
  }
  return dets;
}

inline nlohmann::json detections_to_json(const std::vector<Detection>& dets, const std::vector<std::string>& classes,
                                         const std::vector<std::string>& video_ids) {
  nlohmann::json results = nlohmann::json::object();
  for (const auto& id : video_ids) results[id] = nlohmann::json::array();
  for (const auto& d : dets) {
    results[d.video_id].push_back({{"label", classes.at(d.class_id)},
                                   {"segment", {d.t_start, d.t_end}},
                                   {"score", d.score}});
  }
  return {{"results", results}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    if (r.class_has_gt[c]) per_class[r.classes[c]] = r.ap[c];
  }
  return {{"thresholds", r.thresholds},          {"mAP", r.map},
          {"average_mAP", r.average_map},        {"per_class_AP", per_class},
          {"num_ground_truth", r.num_ground_truth}, {"num_detections", r.num_detections}};
}

// Percentages laid out as "mAP@0.1 ... mAP@0.7 | AVG".
inline std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[64];
  os << "metric";
  for (double t : r.thresholds) {
    std::snprintf(buf, sizeof buf, "\tmAP@%g", t);
    os << buf;
  }
  os << "\tAVG\n" << "value";
  for (double m : r.map) {
    std::snprintf(buf, sizeof buf, "\t%.2f", 100.0 * m);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\t%.2f\n", 100.0 * r.average_map);
  os << buf;
  return os.str();
}

// ---- magnitude histograms --------------------------------------------------

struct MagnitudeHistogram {
  std::vector<double> edges;  // bins + 1 edges spanning [0, max]
  std::vector<double> action;
  std::vector<double> background;
};

inline MagnitudeHistogram histogram_from_values(const std::vector<double>& action,
                                                const std::vector<double>& background, std::size_t bins) {
  if (bins == 0) throw RangeError("histogram: bins must be >= 1");
  double top = 0.0;
  for (double v : action) top = std::max(top, v);
  for (double v : background) top = std::max(top, v);
  if (!(top > 0.0)) top = 1.0;
  MagnitudeHistogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = top * static_cast<double>(i) / static_cast<double>(bins);
  auto fill = [&](const std::vector<double>& vals, std::vector<double>& out) {
    out.assign(bins, 0.0);
    if (vals.empty()) return;
    for (double v : vals) {
      auto b = static_cast<std::size_t>(std::max(0.0, v) / top * static_cast<double>(bins));
      out[std::min(b, bins - 1)] += 1.0;
    }
    for (double& f : out) f /= static_cast<double>(vals.size());
  };
  fill(action, h.action);
  fill(background, h.background);
  return h;
}

// Sum over bins of min(action, background); 1 = identical, 0 = disjoint.
inline double overlap_coefficient(const MagnitudeHistogram& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.action.size(); ++i) s += std::min(h.action[i], h.background[i]);
  return s;
}

inline std::string histogram_csv(const MagnitudeHistogram& h) {
  std::ostringstream os;
  os << "bin_start,bin_end,action,background\n";
  char buf[160];
  for (std::size_t i = 0; i < h.action.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", h.edges[i], h.edges[i + 1], h.action[i],
                  h.background[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace wtal
