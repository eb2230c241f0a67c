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

// wtal: synthetic data generation, training, detection, evaluation and
// diagnostics for weakly-supervised temporal action localization.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "wtal/commands.hpp"

namespace {

constexpr const char* kThreadsEnv = "WTAL_THREADS";

std::size_t default_threads() {
  const char* env = std::getenv(kThreadsEnv);
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long v = std::stol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  std::cerr << "warning: ignoring invalid " << kThreadsEnv << "=\"" << env << "\"\n";
  return 1;
}

template <typename T>
std::optional<T> optional_if(const CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised temporal action localization with feature-magnitude uncertainty"};
  app.require_subcommand(1);
  std::size_t threads = default_threads();
  app.add_option("--threads", threads, std::string("Worker threads (default: $") + kThreadsEnv + " or 1)")
      ->check(CLI::PositiveNumber);

  wtal::cmd::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--spec", gen.spec_path, "Synthetic spec JSON (default: built-in)");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();

  wtal::cmd::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the train subset");
  train_cmd->add_option("--config", tr.config_path, "Run config JSON (default: built-in)");
  train_cmd->add_option("--data", tr.manifest_path, "Dataset manifest")->required();
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();
  train_cmd->add_option("--resume", tr.resume_path, "Training state file to resume from");

  wtal::cmd::DetectOptions det;
  std::string det_mode;
  std::string det_subset;
  auto* detect_cmd = app.add_subcommand("detect", "Run localization and write detections JSON");
  detect_cmd->add_option("--config", det.config_path, "Run config JSON");
  detect_cmd->add_option("--data", det.manifest_path, "Dataset manifest")->required();
  detect_cmd->add_option("--checkpoint", det.checkpoint_path, "Model checkpoint")->required();
  detect_cmd->add_option("--out", det.out_path, "Detections JSON")->required();
  auto* det_mode_opt = detect_cmd->add_option("--score-mode", det_mode, "fused | softmax_only | minmax_fused")
                           ->check(CLI::IsMember({"fused", "softmax_only", "minmax_fused"}));
  auto* det_subset_opt = detect_cmd->add_option("--subset", det_subset, "Subset to process (default: eval subset)");

  wtal::cmd::EvalOptions ev;
  std::string ev_thresholds;
  std::string ev_subset;
  auto* eval_cmd = app.add_subcommand("eval", "Compute mAP at tIoU thresholds");
  eval_cmd->add_option("--config", ev.config_path, "Run config JSON");
  eval_cmd->add_option("--detections", ev.detections_path, "Detections JSON")->required();
  eval_cmd->add_option("--gt", ev.ground_truth_path, "Ground truth JSON")->required();
  auto* ev_thr_opt =
      eval_cmd->add_option("--thresholds", ev_thresholds, "thumos | activitynet | comma-separated values");
  auto* ev_subset_opt = eval_cmd->add_option("--subset", ev_subset, "Ground-truth subset (default: eval subset)");
  eval_cmd->add_option("--out", ev.out_path, "Report JSON");
  eval_cmd->add_option("--table", ev.table_path, "Report table (TSV)");

  wtal::cmd::AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Score-mode ablation and max-magnitude sweep");
  ablate_cmd->add_option("--config", ab.config_path, "Run config JSON");
  ablate_cmd->add_option("--data", ab.manifest_path, "Dataset manifest")->required();
  ablate_cmd->add_option("--out", ab.out_dir, "Output directory (models are cached under models/)")->required();

  wtal::cmd::GradCheckOptions gc;
  auto* grad_cmd = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  grad_cmd->add_option("--config", gc.config_path, "Run config JSON (MIL settings)");
  grad_cmd->add_option("--segments", gc.segments, "Segments per video")->capture_default_str();
  grad_cmd->add_option("--features", gc.feature_dim, "Feature dimension")->capture_default_str();
  grad_cmd->add_option("--classes", gc.num_classes, "Number of classes")->capture_default_str();
  grad_cmd->add_option("--videos", gc.videos, "Videos per batch")->capture_default_str();
  grad_cmd->add_option("--seeds", gc.seeds, "Number of random instances")->capture_default_str();
  grad_cmd->add_option("--first-seed", gc.first_seed, "First instance seed")->capture_default_str();
  grad_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();

  wtal::cmd::HistOptions hi;
  std::string hist_subset;
  auto* hist_cmd = app.add_subcommand("hist", "Action/background feature-magnitude histograms");
  hist_cmd->add_option("--config", hi.config_path, "Run config JSON");
  hist_cmd->add_option("--data", hi.manifest_path, "Dataset manifest")->required();
  hist_cmd->add_option("--checkpoint", hi.checkpoint_path, "Model checkpoint (default: untrained model)");
  hist_cmd->add_option("--out", hi.out_path, "Histogram CSV");
  hist_cmd->add_option("--bins", hi.bins, "Number of bins")->capture_default_str()->check(CLI::PositiveNumber);
  auto* hist_subset_opt = hist_cmd->add_option("--subset", hist_subset, "Subset (default: eval subset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? wtal::cmd::kExitOk : wtal::cmd::kExitUsage;
  }

  try {
    if (*gen_cmd) {
      wtal::cmd::gen_data(gen, std::cout);
    } else if (*train_cmd) {
      tr.threads = threads;
      wtal::cmd::train_model(tr, std::cout);
    } else if (*detect_cmd) {
      det.threads = threads;
      if (det_mode_opt->count() > 0) det.score_mode = wtal::parse_score_mode(det_mode);
      det.subset = optional_if(det_subset_opt, det_subset);
      wtal::cmd::detect_videos(det, std::cout);
    } else if (*eval_cmd) {
      ev.thresholds = optional_if(ev_thr_opt, ev_thresholds);
      ev.subset = optional_if(ev_subset_opt, ev_subset);
      wtal::cmd::evaluate_files(ev, std::cout);
    } else if (*ablate_cmd) {
      ab.threads = threads;
      wtal::cmd::ablate(ab, std::cout);
    } else if (*grad_cmd) {
      if (!wtal::cmd::grad_check(gc, std::cout).passed) return wtal::cmd::kExitNumerical;
    } else if (*hist_cmd) {
      hi.subset = optional_if(hist_subset_opt, hist_subset);
      wtal::cmd::magnitude_hist(hi, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wtal::cmd::exit_code_for(e);
  }
  return wtal::cmd::kExitOk;
}
