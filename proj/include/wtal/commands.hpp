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

// Command implementations behind the wtal tool. Each command reads its inputs,
// writes its artifacts and returns a summary; the tool maps exceptions to exit
// codes with exit_code_for().

#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtal/binary_io.hpp"
#include "wtal/config.hpp"
#include "wtal/datakit.hpp"
#include "wtal/detector.hpp"
#include "wtal/error.hpp"
#include "wtal/evalkit.hpp"
#include "wtal/magnitudes.hpp"
#include "wtal/model.hpp"
#include "wtal/trainer.hpp"

namespace wtal::cmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kTrainSubset = "train";
inline constexpr const char* kCheckpointFile = "checkpoint.umck";
inline constexpr const char* kStateFile = "state.umts";
inline constexpr const char* kLogFile = "train_log.tsv";
inline constexpr const char* kRunManifestFile = "run_manifest.json";
inline constexpr const char* kResolvedConfigFile = "config.json";

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return kExitNumerical;
  return kExitUsage;
}

namespace detail {

namespace fs = std::filesystem;

inline fs::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("output directory must not be empty");
  fs::create_directories(dir);
  return dir;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { io::write_text(path.string(), j.dump(2) + "\n"); }

inline std::vector<std::string> video_ids(const std::vector<const VideoRecord*>& videos) {
  std::vector<std::string> out;
  for (const auto* v : videos) out.push_back(v->video_id);
  return out;
}

// Ground truth referenced by a manifest, restricted to one subset.
inline GroundTruth manifest_ground_truth(const std::string& manifest_path, const std::string& subset) {
  const auto manifest = wtal::detail::read_json_file(manifest_path);
  if (!manifest.contains("ground_truth")) throw DatasetError(manifest_path + ": no ground_truth entry");
  const auto path = fs::path(manifest_path).parent_path() / manifest["ground_truth"].get<std::string>();
  return load_ground_truth(path.string(), subset);
}

inline std::vector<const VideoRecord*> require_subset(const Dataset& ds, const std::string& subset) {
  auto videos = ds.subset(subset);
  if (videos.empty()) throw DatasetError("no videos in subset \"" + subset + "\"");
  return videos;
}

inline void check_checkpoint(const ModelParams& params, const Dataset& ds) {
  if (params.feature_dim() != ds.feature_dim || params.num_classes() != ds.num_classes()) {
    throw DatasetError("checkpoint shape (F=" + std::to_string(params.feature_dim()) +
                       ", C=" + std::to_string(params.num_classes()) + ") does not match the dataset (F=" +
                       std::to_string(ds.feature_dim) + ", C=" + std::to_string(ds.num_classes()) + ")");
  }
}

}  // namespace detail

// ---- gen-data ------------------------------------------------------------------

struct GenDataOptions {
  std::string spec_path;  // empty: built-in defaults
  std::string out_dir;
};

inline std::string gen_data(const GenDataOptions& opt, std::ostream& log) {
  const SyntheticSpec spec = spec_from_file(opt.spec_path);
  const auto out = detail::ensure_dir(opt.out_dir);
  const auto data = generate(spec);
  const std::string hash = write_dataset(data, out.string());
  detail::write_json(out / "synthetic_spec.json", spec.to_json());
  log << "wrote " << data.dataset.videos.size() << " videos to " << out.string() << " (dataset_hash " << hash
      << ")\n";
  return hash;
}

// ---- train ---------------------------------------------------------------------

struct TrainOptions {
  std::string config_path;
  std::string manifest_path;
  std::string out_dir;
  std::string resume_path;  // state file of an earlier run
  std::size_t threads = 1;
};

inline TrainState train_model(const TrainOptions& opt, std::ostream& log) {
  RunConfig rc = load_run_config(opt.config_path);
  rc.train.threads = opt.threads;
  const Dataset ds = load_dataset(opt.manifest_path);
  const auto videos = detail::require_subset(ds, kTrainSubset);
  const auto out = detail::ensure_dir(opt.out_dir);

  std::optional<TrainState> resume;
  if (!opt.resume_path.empty()) {
    resume = load_state(opt.resume_path);
    log << "resuming from step " << resume->step << "\n";
  }
  const std::string hash = dataset_hash(ds);
  detail::write_json(out / kResolvedConfigFile, rc.to_json());
  detail::write_json(out / kRunManifestFile,
                     {{"seed", rc.train.seed}, {"config_hash", rc.hash()}, {"dataset_hash", hash}});

  const auto log_path = (out / kLogFile).string();
  std::ofstream tsv(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!tsv) throw ConfigError("cannot write " + log_path);
  if (!resume) tsv << "step\tcls\tum\tbe\ttotal\n";

  TrainHooks hooks;
  hooks.on_step = [&](const LossRecord& r) { tsv << format_log_line(r); };
  hooks.on_checkpoint = [&](const TrainState& st) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%06llu.umck", static_cast<unsigned long long>(st.step));
    save_params(st.params, (out / name).string());
    save_state(st, (out / kStateFile).string());
    tsv.flush();
  };
  TrainResult result = train(videos, ds.num_classes(), rc.train, std::move(resume), hooks);
  save_params(result.state.params, (out / kCheckpointFile).string());
  save_state(result.state, (out / kStateFile).string());
  const auto& r = result.state.running;
  log << "trained " << result.state.step << " steps; smoothed losses cls " << r.cls << " um " << r.um << " be "
      << r.be << " total " << r.total << "\n";
  return std::move(result.state);
}

// ---- detect --------------------------------------------------------------------

struct DetectOptions {
  std::string config_path;
  std::string manifest_path;
  std::string checkpoint_path;
  std::string out_path;
  std::optional<ScoreMode> score_mode;
  std::optional<std::string> subset;
  std::size_t threads = 1;
};

inline nlohmann::json run_detection(const ModelParams& params, const Dataset& ds, const RunConfig& rc,
                                    const std::string& subset, std::size_t threads) {
  detail::check_checkpoint(params, ds);
  const auto videos = detail::require_subset(ds, subset);
  const auto dets = detect_all(params, videos, rc.detect, rc.mil(), threads);
  return detections_to_json(dets, ds.classes, detail::video_ids(videos));
}

inline nlohmann::json detect_videos(const DetectOptions& opt, std::ostream& log) {
  RunConfig rc = load_run_config(opt.config_path);
  if (opt.score_mode) rc.detect.score_mode = *opt.score_mode;
  const std::string subset = opt.subset.value_or(rc.eval_subset);
  const Dataset ds = load_dataset(opt.manifest_path);
  const ModelParams params = load_params(opt.checkpoint_path);
  auto doc = run_detection(params, ds, rc, subset, opt.threads);
  std::size_t count = 0;
  for (const auto& [id, list] : doc["results"].items()) count += list.size();
  if (!opt.out_path.empty()) io::write_text(opt.out_path, doc.dump(1) + "\n");
  log << count << " detections on subset \"" << subset << "\" (" << to_string(rc.detect.score_mode) << ")\n";
  return doc;
}

// ---- eval ----------------------------------------------------------------------

// "thumos", "activitynet", or a comma-separated list of tIoU values.
inline std::vector<double> parse_thresholds(const std::string& spec) {
  if (spec == "thumos") return thumos_thresholds();
  if (spec == "activitynet") return activitynet_thresholds();
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0.0) || v > 1.0) {
      throw ConfigError("invalid tIoU threshold \"" + item + "\"");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty threshold list");
  return out;
}

struct EvalOptions {
  std::string config_path;
  std::string detections_path;
  std::string ground_truth_path;
  std::optional<std::string> thresholds;
  std::optional<std::string> subset;
  std::string out_path;    // report JSON
  std::string table_path;  // report table
};

inline EvalReport evaluate_files(const EvalOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(opt.config_path);
  const auto thresholds = opt.thresholds ? parse_thresholds(*opt.thresholds) : rc.eval_thresholds;
  const GroundTruth gt = load_ground_truth(opt.ground_truth_path, opt.subset.value_or(rc.eval_subset));
  if (gt.videos.empty()) throw DatasetError("ground truth has no videos in the requested subset");
  const auto doc = wtal::detail::read_json_file(opt.detections_path);
  std::vector<Detection> dets;
  try {
    dets = parse_detections(doc, gt.classes);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(opt.detections_path + ": " + e.what());
  }
  const EvalReport report = evaluate(dets, gt, thresholds);
  const std::string table = report_table(report);
  if (!opt.out_path.empty()) detail::write_json(opt.out_path, report_to_json(report));
  if (!opt.table_path.empty()) io::write_text(opt.table_path, table);
  log << table;
  return report;
}

// ---- ablate --------------------------------------------------------------------

// One trained loss configuration of the ablation.
struct AblationModel {
  std::string name;
  double alpha = 0.0;
  double beta = 0.0;
  double max_magnitude = 100.0;
};

struct AblationRow {
  std::string name;
  std::string model;
  ScoreMode mode = ScoreMode::kFused;
  EvalReport report;
};

struct SweepRow {
  double max_magnitude = 0.0;
  EvalReport report;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // softmax_only, minmax_fused, fused+L_um, fused+L_um+L_be
  std::vector<SweepRow> sweep;

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      rows_json.push_back({{"name", r.name},
                           {"model", r.model},
                           {"score_mode", to_string(r.mode)},
                           {"mAP", r.report.map},
                           {"average_mAP", r.report.average_map}});
    }
    nlohmann::json sweep_json = nlohmann::json::array();
    for (const auto& s : sweep) {
      sweep_json.push_back({{"m", s.max_magnitude}, {"mAP", s.report.map}, {"average_mAP", s.report.average_map}});
    }
    const auto& thresholds = rows.empty() ? std::vector<double>{} : rows.front().report.thresholds;
    return {{"thresholds", thresholds}, {"score_modes", rows_json}, {"m_sweep", sweep_json}};
  }

  std::string table() const {
    std::ostringstream os;
    char buf[64];
    os << "row\taverage_mAP\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "\t%.2f\n", 100.0 * r.report.average_map);
      os << r.name << buf;
    }
    os << "m\taverage_mAP\n";
    for (const auto& s : sweep) {
      std::snprintf(buf, sizeof buf, "%g\t%.2f\n", s.max_magnitude, 100.0 * s.report.average_map);
      os << buf;
    }
    return os.str();
  }
};

struct AblateOptions {
  std::string config_path;
  std::string manifest_path;
  std::string out_dir;
  std::size_t threads = 1;
};

namespace detail {

inline std::string model_file(const AblationModel& m, const TrainConfig& base) {
  TrainConfig t = base;
  t.mil.alpha = m.alpha;
  t.mil.beta = m.beta;
  t.mil.max_magnitude = m.max_magnitude;
  RunConfig rc;
  rc.train = t;
  return m.name + "-" + rc.hash().substr(0, 8) + ".umck";
}

}  // namespace detail

// Loads the model from `models_dir` when present, otherwise trains and stores it.
inline ModelParams ablation_model(const AblationModel& m, const RunConfig& rc, const Dataset& ds,
                                  const std::string& models_dir, std::size_t threads, std::ostream& log) {
  const auto path = std::filesystem::path(models_dir) / detail::model_file(m, rc.train);
  if (std::filesystem::exists(path)) {
    ModelParams params = load_params(path.string());
    detail::check_checkpoint(params, ds);
    log << "loaded " << path.filename().string() << "\n";
    return params;
  }
  TrainConfig t = rc.train;
  t.mil.alpha = m.alpha;
  t.mil.beta = m.beta;
  t.mil.max_magnitude = m.max_magnitude;
  t.threads = threads;
  ModelParams params = train(detail::require_subset(ds, kTrainSubset), ds.num_classes(), t).state.params;
  save_params(params, path.string());
  log << "trained " << path.filename().string() << "\n";
  return params;
}

inline AblationResult ablate(const AblateOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(opt.config_path);
  const Dataset ds = load_dataset(opt.manifest_path);
  const GroundTruth gt = detail::manifest_ground_truth(opt.manifest_path, rc.eval_subset);
  const auto test = detail::require_subset(ds, rc.eval_subset);
  const auto out = detail::ensure_dir(opt.out_dir);
  const auto models_dir = detail::ensure_dir((out / "models").string());

  const double m = rc.mil().max_magnitude;
  const AblationModel baseline{"cls", 0.0, 0.0, m};
  const AblationModel um_only{"cls_um", rc.mil().alpha, 0.0, m};
  const AblationModel full{"cls_um_be", rc.mil().alpha, rc.mil().beta, m};

  auto score = [&](const ModelParams& params, ScoreMode mode, double max_magnitude) {
    DetectConfig d = rc.detect;
    d.score_mode = mode;
    MilConfig mil = rc.mil();
    mil.max_magnitude = max_magnitude;
    return evaluate(detect_all(params, test, d, mil, opt.threads), gt, rc.eval_thresholds);
  };

  AblationResult result;
  const ModelParams base_params = ablation_model(baseline, rc, ds, models_dir.string(), opt.threads, log);
  result.rows.push_back({"softmax_only", baseline.name, ScoreMode::kSoftmaxOnly,
                         score(base_params, ScoreMode::kSoftmaxOnly, m)});
  result.rows.push_back({"minmax_fused", baseline.name, ScoreMode::kMinMaxFused,
                         score(base_params, ScoreMode::kMinMaxFused, m)});
  const ModelParams um_params = ablation_model(um_only, rc, ds, models_dir.string(), opt.threads, log);
  result.rows.push_back({"fused+L_um", um_only.name, ScoreMode::kFused, score(um_params, ScoreMode::kFused, m)});
  const ModelParams full_params = ablation_model(full, rc, ds, models_dir.string(), opt.threads, log);
  result.rows.push_back({"fused+L_um+L_be", full.name, ScoreMode::kFused, score(full_params, ScoreMode::kFused, m)});

  for (double sweep_m : rc.m_sweep) {
    if (sweep_m == m) {
      result.sweep.push_back({sweep_m, result.rows.back().report});
      continue;
    }
    char name[48];
    std::snprintf(name, sizeof name, "cls_um_be_m%g", sweep_m);
    const AblationModel variant{name, rc.mil().alpha, rc.mil().beta, sweep_m};
    const ModelParams params = ablation_model(variant, rc, ds, models_dir.string(), opt.threads, log);
    result.sweep.push_back({sweep_m, score(params, ScoreMode::kFused, sweep_m)});
  }

  detail::write_json(out / "ablation.json", result.to_json());
  io::write_text((out / "ablation.tsv").string(), result.table());
  log << result.table();
  return result;
}

// ---- grad-check ----------------------------------------------------------------

struct GradCheckOptions {
  std::string config_path;  // MIL settings; empty: defaults
  std::size_t segments = 8;
  std::size_t feature_dim = 4;
  std::size_t num_classes = 3;
  std::size_t videos = 2;
  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  double tolerance = 1e-5;
};

struct GradCheckSummary {
  double max_rel_err = 0.0;
  std::size_t parameters_checked = 0;
  bool passed = false;
};

inline GradCheckSummary grad_check(const GradCheckOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(opt.config_path);
  if (opt.seeds == 0) throw ConfigError("grad-check: seeds must be >= 1");
  rc.mil().validate_for_length(opt.segments);
  GradCheckSummary summary;
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = opt.first_seed + s;
    const auto inst = make_grad_check_instance(opt.segments, opt.feature_dim, opt.num_classes, opt.videos, seed,
                                               rc.train.kernel_size);
    const auto r = gradient_check(inst.params, inst.features, inst.labels, rc.mil());
    log << "seed " << seed << "\tmax_rel_err " << r.max_rel_err << "\tworst " << r.worst << "\n";
    summary.max_rel_err = std::max(summary.max_rel_err, r.max_rel_err);
    summary.parameters_checked += r.parameters_checked;
  }
  summary.passed = summary.max_rel_err <= opt.tolerance;
  log << (summary.passed ? "PASS" : "FAIL") << " max_rel_err " << summary.max_rel_err << " over "
      << summary.parameters_checked << " parameters (tolerance " << opt.tolerance << ")\n";
  return summary;
}

// ---- hist ----------------------------------------------------------------------

struct HistOptions {
  std::string config_path;
  std::string manifest_path;
  std::string checkpoint_path;  // empty: freshly initialized model
  std::string out_path;         // CSV
  std::optional<std::string> subset;
  std::size_t bins = 50;
};

inline double magnitude_hist(const HistOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(opt.config_path);
  const Dataset ds = load_dataset(opt.manifest_path);
  const SegmentLabels labels = load_segment_labels(opt.manifest_path);
  const ModelParams params = opt.checkpoint_path.empty()
                                 ? init_params(ds.feature_dim, ds.num_classes(), rc.train.kernel_size, rc.train.seed)
                                 : load_params(opt.checkpoint_path);
  detail::check_checkpoint(params, ds);
  const auto videos = detail::require_subset(ds, opt.subset.value_or(rc.eval_subset));
  const auto hist = magnitude_histogram(params, videos, labels, opt.bins);
  const double overlap = overlap_coefficient(hist);
  if (!opt.out_path.empty()) io::write_text(opt.out_path, histogram_csv(hist));
  log << "overlap_coefficient " << overlap << "\n";
  return overlap;
}

}  // namespace wtal::cmd
