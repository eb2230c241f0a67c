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

// Single-file run configuration covering training, MIL losses, detection and
// evaluation. Unknown keys are rejected at every level.

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtal/binary_io.hpp"
#include "wtal/detector.hpp"
#include "wtal/error.hpp"
#include "wtal/evalkit.hpp"
#include "wtal/json_util.hpp"
#include "wtal/mil.hpp"
#include "wtal/trainer.hpp"

namespace wtal {

struct RunConfig {
  TrainConfig train;
  DetectConfig detect;
  std::vector<double> eval_thresholds = thumos_thresholds();
  std::string eval_subset = "test";
  std::vector<double> m_sweep = {10, 25, 50, 100, 150, 200, 250};

  const MilConfig& mil() const { return train.mil; }

  void validate() const {
    train.validate();
    detect.validate();
    if (eval_thresholds.empty()) throw ConfigError("eval: thresholds must not be empty");
    for (double m : m_sweep) {
      if (!(m > 0.0)) throw ConfigError("ablate: m_sweep entries must be > 0");
    }
  }

  static RunConfig from_json(const nlohmann::json& j) {
    json_util::check_keys(j, {"train", "mil", "detect", "eval", "ablate"}, "config");
    RunConfig rc;
    if (j.contains("train")) {
      const auto& t = j["train"];
      const std::string s = "train";
      json_util::check_keys(t, {"segments", "batch_size", "steps", "learning_rate", "adam_beta1", "adam_beta2",
                                "adam_eps", "seed", "kernel_size", "checkpoint_every"},
                            s);
      json_util::read(t, "segments", rc.train.segments, s);
      json_util::read(t, "batch_size", rc.train.batch_size, s);
      json_util::read(t, "steps", rc.train.steps, s);
      json_util::read(t, "learning_rate", rc.train.learning_rate, s);
      json_util::read(t, "adam_beta1", rc.train.adam_beta1, s);
      json_util::read(t, "adam_beta2", rc.train.adam_beta2, s);
      json_util::read(t, "adam_eps", rc.train.adam_eps, s);
      json_util::read(t, "seed", rc.train.seed, s);
      json_util::read(t, "kernel_size", rc.train.kernel_size, s);
      json_util::read(t, "checkpoint_every", rc.train.checkpoint_every, s);
    }
    if (j.contains("mil")) {
      const auto& m = j["mil"];
      const std::string s = "mil";
      json_util::check_keys(m, {"max_magnitude", "act_ratio", "bkg_ratio", "alpha", "beta", "log_eps"}, s);
      json_util::read(m, "max_magnitude", rc.train.mil.max_magnitude, s);
      json_util::read(m, "act_ratio", rc.train.mil.act_ratio, s);
      json_util::read(m, "bkg_ratio", rc.train.mil.bkg_ratio, s);
      json_util::read(m, "alpha", rc.train.mil.alpha, s);
      json_util::read(m, "beta", rc.train.mil.beta, s);
      json_util::read(m, "log_eps", rc.train.mil.log_eps, s);
    }
    rc.detect.segments = rc.train.segments;
    if (j.contains("detect")) {
      const auto& d = j["detect"];
      const std::string s = "detect";
      json_util::check_keys(d, {"theta_vid", "theta_seg_list", "nms_iou", "score_mode", "outer_inflation", "segments"},
                            s);
      json_util::read(d, "theta_vid", rc.detect.theta_vid, s);
      json_util::read(d, "theta_seg_list", rc.detect.theta_seg_list, s);
      json_util::read(d, "nms_iou", rc.detect.nms_iou, s);
      std::string mode = to_string(rc.detect.score_mode);
      json_util::read(d, "score_mode", mode, s);
      rc.detect.score_mode = parse_score_mode(mode);
      json_util::read(d, "outer_inflation", rc.detect.outer_inflation, s);
      json_util::read(d, "segments", rc.detect.segments, s);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      json_util::check_keys(e, {"thresholds", "subset"}, "eval");
      json_util::read(e, "thresholds", rc.eval_thresholds, "eval");
      json_util::read(e, "subset", rc.eval_subset, "eval");
    }
    if (j.contains("ablate")) {
      const auto& a = j["ablate"];
      json_util::check_keys(a, {"m_sweep"}, "ablate");
      json_util::read(a, "m_sweep", rc.m_sweep, "ablate");
    }
    rc.validate();
    return rc;
  }

  nlohmann::json to_json() const {
    const auto& t = train;
    const auto& m = train.mil;
    return {{"train",
             {{"segments", t.segments},
              {"batch_size", t.batch_size},
              {"steps", t.steps},
              {"learning_rate", t.learning_rate},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"seed", t.seed},
              {"kernel_size", t.kernel_size},
              {"checkpoint_every", t.checkpoint_every}}},
            {"mil",
             {{"max_magnitude", m.max_magnitude},
              {"act_ratio", m.act_ratio},
              {"bkg_ratio", m.bkg_ratio},
              {"alpha", m.alpha},
              {"beta", m.beta},
              {"log_eps", m.log_eps}}},
            {"detect",
             {{"theta_vid", detect.theta_vid},
              {"theta_seg_list", detect.theta_seg_list},
              {"nms_iou", detect.nms_iou},
              {"score_mode", to_string(detect.score_mode)},
              {"outer_inflation", detect.outer_inflation},
              {"segments", detect.segments}}},
            {"eval", {{"thresholds", eval_thresholds}, {"subset", eval_subset}}},
            {"ablate", {{"m_sweep", m_sweep}}}};
  }

  // Fingerprint of the resolved configuration.
  std::string hash() const {
    io::Fnv1a h;
    h.update(to_json().dump());
    return io::hex64(h.digest());
  }
};

inline RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig::from_json(nlohmann::json::object());
  return RunConfig::from_json(json_util::parse(io::read_text(path), path));
}

}  // namespace wtal
