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

// Synthetic untrimmed videos with planted action intervals, the binary
// feature file format, and dataset manifests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtal/binary_io.hpp"
#include "wtal/error.hpp"
#include "wtal/evalkit.hpp"
#include "wtal/json_util.hpp"
#include "wtal/numerics.hpp"
#include "wtal/rng.hpp"

namespace wtal {

inline constexpr double kFramesPerSecond = 25.0;
inline constexpr double kFramesPerSegment = 16.0;

inline double segments_to_seconds(double segments) { return segments * kFramesPerSegment / kFramesPerSecond; }

// ---- feature files -----------------------------------------------------------
// "UMFT", u32 version, u32 rows, u32 cols, rows * cols little-endian f32.

inline constexpr std::string_view kFeatureMagic = "UMFT";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::vector<std::uint8_t> encode_features(const Matrix& m) {
  io::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) w.f32(static_cast<float>(v));
  return w.bytes();
}

inline Matrix decode_features(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic(kFeatureMagic);
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) throw VersionError(what + ": unsupported feature version " + std::to_string(version));
  const std::uint64_t rows = r.u32();
  const std::uint64_t cols = r.u32();
  if (r.remaining() != rows * cols * 4) {
    throw CorruptFileError(what + ": header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " but payload has " + std::to_string(r.remaining()) + " bytes");
  }
  Matrix m(rows, cols);
  for (double& v : m.data()) v = r.f32();
  return m;
}

inline void write_features(const Matrix& m, const std::string& path) { io::write_file(path, encode_features(m)); }

inline Matrix read_features(const std::string& path) { return decode_features(io::read_file(path), path); }

// ---- datasets --------------------------------------------------------------

// Weak supervision only: no segment-level labels live here.
struct VideoRecord {
  std::string video_id;
  std::string subset;
  double duration = 0.0;
  Matrix features;             // L x F
  std::vector<double> labels;  // multi-hot over classes
};

struct Dataset {
  std::vector<std::string> classes;
  std::size_t feature_dim = 0;
  std::vector<VideoRecord> videos;

  std::size_t num_classes() const { return classes.size(); }

  std::vector<const VideoRecord*> subset(const std::string& name) const {
    std::vector<const VideoRecord*> out;
    for (const auto& v : videos) {
      if (name.empty() || v.subset == name) out.push_back(&v);
    }
    return out;
  }
};

// Per-video segment labels: class id, or -1 for background. Kept apart from
// Dataset and only read by evaluation tooling.
using SegmentLabels = std::map<std::string, std::vector<int>>;

// Fingerprint over the canonical little-endian serialization of the dataset.
inline std::string dataset_hash(const Dataset& ds) {
  io::Fnv1a h;
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(ds.classes.size()));
  for (const auto& c : ds.classes) w.str(c);
  w.u32(static_cast<std::uint32_t>(ds.feature_dim));
  h.update(w.bytes());
  for (const auto& v : ds.videos) {
    io::ByteWriter vw;
    vw.str(v.video_id);
    vw.str(v.subset);
    vw.f64(v.duration);
    for (double l : v.labels) vw.f64(l);
    h.update(vw.bytes());
    h.update(encode_features(v.features));
  }
  return io::hex64(h.digest());
}

// ---- synthetic generation ----------------------------------------------------------

enum class BackgroundMode { kStatic, kDynamic, kMixed };

inline std::string to_string(BackgroundMode m) {
  switch (m) {
    case BackgroundMode::kStatic: return "static";
    case BackgroundMode::kDynamic: return "dynamic";
    case BackgroundMode::kMixed: return "mixed";
  }
  return "mixed";
}

inline BackgroundMode parse_background_mode(const std::string& s) {
  if (s == "static") return BackgroundMode::kStatic;
  if (s == "dynamic") return BackgroundMode::kDynamic;
  if (s == "mixed") return BackgroundMode::kMixed;
  throw ConfigError("unknown background_mode \"" + s + "\"");
}

struct SyntheticSpec {
  std::size_t num_classes = 5;
  std::size_t feature_dim = 32;
  std::size_t num_train = 200;
  std::size_t num_test = 50;
  std::size_t min_segments = 100;
  std::size_t max_segments = 200;
  std::size_t min_instances = 1;
  std::size_t max_instances = 3;
  double min_instance_fraction = 0.10;  // instance length relative to video length
  double max_instance_fraction = 0.22;
  std::size_t min_gap = 4;              // background segments between instances
  std::size_t max_classes_per_video = 1;
  double action_scale = 4.0;            // prototype amplitude
  double action_noise = 0.3;            // per-dimension std of action segments
  double background_scale = 0.7;        // dynamic background norm relative to action norm
  double static_scale = 0.7;            // static background norm relative to action norm
  double static_noise = 0.3;            // per-dimension jitter of static stretches
  double amplitude_spread = 0.8;        // per-stretch gain drawn from 1 +- spread
  BackgroundMode background_mode = BackgroundMode::kMixed;
  std::uint64_t prototype_seed = 17;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
    if (feature_dim < 1) throw ConfigError("synthetic: feature_dim must be >= 1");
    if (num_train + num_test < 1) throw ConfigError("synthetic: no videos requested");
    if (min_segments < 1 || min_segments > max_segments) throw ConfigError("synthetic: bad segment range");
    if (min_instances < 1 || min_instances > max_instances) throw ConfigError("synthetic: bad instance range");
    if (max_classes_per_video < 1) throw ConfigError("synthetic: max_classes_per_video must be >= 1");
    if (!(min_instance_fraction > 0.0) || min_instance_fraction > max_instance_fraction ||
        max_instance_fraction > 1.0) {
      throw ConfigError("synthetic: bad instance fraction range");
    }
    if (!(action_scale > 0.0) || action_noise < 0.0 || !(background_scale > 0.0) || !(static_scale > 0.0) ||
        static_noise < 0.0 || amplitude_spread < 0.0 || amplitude_spread >= 1.0) {
      throw ConfigError("synthetic: scales must be positive and noise non-negative");
    }
  }

  static SyntheticSpec from_json(const nlohmann::json& j) {
    const std::string s = "synthetic";
    json_util::check_keys(j, {"num_classes", "feature_dim", "num_train", "num_test", "min_segments",
                              "max_segments", "min_instances", "max_instances", "min_instance_fraction",
                              "max_instance_fraction", "min_gap", "max_classes_per_video", "action_scale", "action_noise",
                              "background_scale", "static_scale", "static_noise", "amplitude_spread", "background_mode", "prototype_seed", "seed"},
                          s);
    SyntheticSpec spec;
    json_util::read(j, "num_classes", spec.num_classes, s);
    json_util::read(j, "feature_dim", spec.feature_dim, s);
    json_util::read(j, "num_train", spec.num_train, s);
    json_util::read(j, "num_test", spec.num_test, s);
    json_util::read(j, "min_segments", spec.min_segments, s);
    json_util::read(j, "max_segments", spec.max_segments, s);
    json_util::read(j, "min_instances", spec.min_instances, s);
    json_util::read(j, "max_instances", spec.max_instances, s);
    json_util::read(j, "min_instance_fraction", spec.min_instance_fraction, s);
    json_util::read(j, "max_instance_fraction", spec.max_instance_fraction, s);
    json_util::read(j, "min_gap", spec.min_gap, s);
    json_util::read(j, "max_classes_per_video", spec.max_classes_per_video, s);
    json_util::read(j, "action_scale", spec.action_scale, s);
    json_util::read(j, "action_noise", spec.action_noise, s);
    json_util::read(j, "background_scale", spec.background_scale, s);
    json_util::read(j, "static_scale", spec.static_scale, s);
    json_util::read(j, "static_noise", spec.static_noise, s);
    json_util::read(j, "amplitude_spread", spec.amplitude_spread, s);
    std::string mode = to_string(spec.background_mode);
    json_util::read(j, "background_mode", mode, s);
    spec.background_mode = parse_background_mode(mode);
    json_util::read(j, "prototype_seed", spec.prototype_seed, s);
    json_util::read(j, "seed", spec.seed, s);
    spec.validate();
    return spec;
  }

  nlohmann::json to_json() const {
    return {{"num_classes", num_classes},
            {"feature_dim", feature_dim},
            {"num_train", num_train},
            {"num_test", num_test},
            {"min_segments", min_segments},
            {"max_segments", max_segments},
            {"min_instances", min_instances},
            {"max_instances", max_instances},
            {"min_instance_fraction", min_instance_fraction},
            {"max_instance_fraction", max_instance_fraction},
            {"min_gap", min_gap},
            {"max_classes_per_video", max_classes_per_video},
            {"action_scale", action_scale},
            {"action_noise", action_noise},
            {"background_scale", background_scale},
            {"static_scale", static_scale},
            {"static_noise", static_noise},
            {"amplitude_spread", amplitude_spread},
            {"background_mode", to_string(background_mode)},
            {"prototype_seed", prototype_seed},
            {"seed", seed}};
  }
};

struct SyntheticDataset {
  Dataset dataset;
  GroundTruth ground_truth;
  SegmentLabels segment_labels;
};

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  while (n < 1e-9) {
    for (double& x : v) x = rng.normal();
    n = l2_norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

// Random unit vectors with pairwise |cos| < 0.5, by rejection.
inline std::vector<std::vector<double>> draw_prototypes(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  constexpr int kMaxTries = 10000;
  Rng rng(seed);
  std::vector<std::vector<double>> protos;
  for (std::size_t c = 0; c < classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      auto cand = random_unit(rng, dim);
      placed = std::all_of(protos.begin(), protos.end(), [&](const auto& p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += p[i] * cand[i];
        return std::abs(dot) < 0.5;
      });
      if (placed) protos.push_back(std::move(cand));
    }
    if (!placed) {
      throw ConfigError("synthetic: could not draw " + std::to_string(classes) +
                        " prototypes with |cos| < 0.5 in dimension " + std::to_string(dim));
    }
  }
  return protos;
}

struct PlantedInstance {
  std::size_t start = 0;  // segment index, inclusive
  std::size_t end = 0;    // exclusive
  std::size_t class_id = 0;
};

inline std::vector<PlantedInstance> plant_instances(const SyntheticSpec& spec, std::size_t length, Rng& rng) {
  const auto min_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(spec.min_instance_fraction * static_cast<double>(length))));
  const auto max_len = std::max(
      min_len, static_cast<std::size_t>(std::floor(spec.max_instance_fraction * static_cast<double>(length))));
  auto count = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_instances),
                                                    static_cast<std::int64_t>(spec.max_instances)));
  std::vector<std::size_t> lengths(count);
  for (auto& l : lengths) {
    l = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(min_len), static_cast<std::int64_t>(max_len)));
  }
  auto needed = [&] {
    std::size_t total = 0;
    for (auto l : lengths) total += l;
    return total + (lengths.size() - 1) * spec.min_gap;
  };
  while (lengths.size() > 1 && needed() > length) lengths.pop_back();
  if (needed() > length) lengths[0] = length;
  std::size_t free = length - needed();
  std::vector<double> weights(lengths.size() + 1);
  double wsum = 0.0;
  for (double& w : weights) {
    w = rng.uniform() + 1e-3;
    wsum += w;
  }
  std::vector<std::size_t> gaps(weights.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    gaps[i] = static_cast<std::size_t>(std::floor(static_cast<double>(free) * weights[i] / wsum));
    used += gaps[i];
  }
  gaps.back() += free - used;
  std::vector<PlantedInstance> out;
  std::size_t pos = gaps[0];
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (i > 0) pos += spec.min_gap + gaps[i];
    out.push_back({pos, pos + lengths[i], 0});
    pos += lengths[i];
  }
  // Each instance draws from a small per-video palette of distinct classes.
  std::vector<std::size_t> palette(spec.num_classes);
  for (std::size_t c = 0; c < palette.size(); ++c) palette[c] = c;
  rng.shuffle(palette.begin(), palette.end());
  palette.resize(std::min({spec.max_classes_per_video, spec.num_classes, out.size()}));
  for (auto& inst : out) inst.class_id = palette[static_cast<std::size_t>(rng.below(palette.size()))];
  return out;
}

}  // namespace detail

inline std::string class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%03zu", c);
  return buf;
}

// Action segments: amplitude * prototype + isotropic noise. Background carries
// no class direction: static stretches hold a fixed random vector with small
// jitter, dynamic stretches resample every segment. Every contiguous stretch is
// then scaled by its own gain, so weak instances share videos with strong ones.
inline SyntheticDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.feature_dim;
  const auto protos = detail::draw_prototypes(spec.num_classes, dim, spec.prototype_seed);
  const double action_norm =
      std::sqrt(spec.action_scale * spec.action_scale + static_cast<double>(dim) * spec.action_noise * spec.action_noise);
  const double dynamic_std = spec.background_scale * action_norm / std::sqrt(static_cast<double>(dim));
  const double static_norm = spec.static_scale * action_norm;
  const double static_base = std::sqrt(std::max(0.0, static_norm * static_norm - static_cast<double>(dim) *
                                                                                     spec.static_noise * spec.static_noise));

  Rng rng(spec.seed);
  SyntheticDataset out;
  for (std::size_t c = 0; c < spec.num_classes; ++c) out.dataset.classes.push_back(class_name(c));
  out.dataset.feature_dim = dim;
  out.ground_truth.classes = out.dataset.classes;

  const std::size_t total = spec.num_train + spec.num_test;
  for (std::size_t n = 0; n < total; ++n) {
    const bool train = n < spec.num_train;
    char id[64];
    std::snprintf(id, sizeof id, "video_%s_%04zu", train ? "train" : "test", train ? n : n - spec.num_train);
    const auto length = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_segments),
                                                             static_cast<std::int64_t>(spec.max_segments)));
    const auto instances = detail::plant_instances(spec, length, rng);

    std::vector<int> seg_labels(length, -1);
    for (const auto& inst : instances) {
      for (std::size_t t = inst.start; t < inst.end; ++t) seg_labels[t] = static_cast<int>(inst.class_id);
    }

    Matrix features(length, dim);
    std::size_t t = 0;
    while (t < length) {
      std::size_t run_end = t;
      while (run_end < length && seg_labels[run_end] == seg_labels[t]) ++run_end;
      if (seg_labels[t] >= 0) {
        const auto& proto = protos[static_cast<std::size_t>(seg_labels[t])];
        for (std::size_t s = t; s < run_end; ++s) {
          for (std::size_t i = 0; i < dim; ++i) {
            features(s, i) = spec.action_scale * proto[i] + spec.action_noise * rng.normal();
          }
        }
      } else {
        bool dynamic = spec.background_mode == BackgroundMode::kDynamic;
        if (spec.background_mode == BackgroundMode::kMixed) dynamic = rng.uniform() < 0.5;
        if (dynamic) {
          for (std::size_t s = t; s < run_end; ++s) {
            for (std::size_t i = 0; i < dim; ++i) features(s, i) = dynamic_std * rng.normal();
          }
        } else {
          const auto base = detail::random_unit(rng, dim);
          for (std::size_t s = t; s < run_end; ++s) {
            for (std::size_t i = 0; i < dim; ++i) {
              features(s, i) = static_base * base[i] + spec.static_noise * rng.normal();
            }
          }
        }
      }
      const double gain = rng.uniform(1.0 - spec.amplitude_spread, 1.0 + spec.amplitude_spread);
      for (std::size_t s = t; s < run_end; ++s) {
        for (double& v : features.row(s)) v *= gain;
      }
      t = run_end;
    }
    // Stored precision is f32; keep the in-memory copy identical to a reload.
    for (double& v : features.data()) v = static_cast<double>(static_cast<float>(v));

    VideoRecord rec;
    rec.video_id = id;
    rec.subset = train ? "train" : "test";
    rec.duration = segments_to_seconds(static_cast<double>(length));
    rec.features = std::move(features);
    rec.labels.assign(spec.num_classes, 0.0);
    for (const auto& inst : instances) {
      rec.labels[inst.class_id] = 1.0;
      out.ground_truth.instances.push_back({rec.video_id, inst.class_id,
                                            segments_to_seconds(static_cast<double>(inst.start)),
                                            segments_to_seconds(static_cast<double>(inst.end))});
    }
    out.ground_truth.videos.emplace(rec.video_id, GroundTruthVideo{rec.duration, rec.subset});
    out.segment_labels.emplace(rec.video_id, std::move(seg_labels));
    out.dataset.videos.push_back(std::move(rec));
  }
  return out;
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& gt) {
  nlohmann::json db = nlohmann::json::object();
  for (const auto& [id, v] : gt.videos) {
    db[id] = {{"duration", v.duration}, {"subset", v.subset}, {"annotations", nlohmann::json::array()}};
  }
  for (const auto& inst : gt.instances) {
    db[inst.video_id]["annotations"].push_back(
        {{"label", gt.classes.at(inst.class_id)}, {"segment", {inst.t_start, inst.t_end}}});
  }
  return {{"database", db}};
}

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kGroundTruthFile = "gt.json";
inline constexpr const char* kSegmentLabelsFile = "segment_labels.json";

// Writes manifest.json, gt.json, segment_labels.json and features/<id>.umft;
// returns the dataset hash.
inline std::string write_dataset(const SyntheticDataset& data, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "features");
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : data.dataset.videos) {
    const std::string rel = "features/" + v.video_id + ".umft";
    write_features(v.features, (fs::path(out_dir) / rel).string());
    videos.push_back({{"video_id", v.video_id}, {"feature_path", rel}, {"subset", v.subset}});
  }
  io::write_text((fs::path(out_dir) / kGroundTruthFile).string(), ground_truth_to_json(data.ground_truth).dump(1) + "\n");
  nlohmann::json seg = nlohmann::json::object();
  for (const auto& [id, labels] : data.segment_labels) seg[id] = labels;
  io::write_text((fs::path(out_dir) / kSegmentLabelsFile).string(), seg.dump() + "\n");
  const std::string hash = dataset_hash(data.dataset);
  nlohmann::json manifest = {{"format", "wtal-manifest"},
                             {"version", 1},
                             {"classes", data.dataset.classes},
                             {"feature_dim", data.dataset.feature_dim},
                             {"ground_truth", kGroundTruthFile},
                             {"segment_labels", kSegmentLabelsFile},
                             {"dataset_hash", hash},
                             {"videos", videos}};
  io::write_text((fs::path(out_dir) / kManifestFile).string(), manifest.dump(1) + "\n");
  return hash;
}

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DatasetError("missing file " + path);
  try {
    return nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFileError(path + ": invalid JSON: " + e.what());
  }
}

}  // namespace detail

inline Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(manifest_path).parent_path();
  const auto manifest = detail::read_json_file(manifest_path);
  try {
    Dataset ds;
    ds.classes = manifest.at("classes").get<std::vector<std::string>>();
    ds.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    if (!std::is_sorted(ds.classes.begin(), ds.classes.end()) ||
        std::adjacent_find(ds.classes.begin(), ds.classes.end()) != ds.classes.end()) {
      throw DatasetError("manifest: class list must be sorted and unique");
    }
    const auto gt_doc = detail::read_json_file((root / manifest.at("ground_truth").get<std::string>()).string());
    const auto& db = gt_doc.at("database");
    std::set<std::string> seen;
    for (const auto& entry : manifest.at("videos")) {
      VideoRecord rec;
      rec.video_id = entry.at("video_id").get<std::string>();
      rec.subset = entry.value("subset", std::string());
      if (!seen.insert(rec.video_id).second) throw DatasetError("duplicate video_id " + rec.video_id);
      if (!db.contains(rec.video_id)) throw DatasetError("video " + rec.video_id + " missing from ground truth");
      const auto& meta = db.at(rec.video_id);
      rec.duration = meta.at("duration").get<double>();
      rec.labels.assign(ds.classes.size(), 0.0);
      for (const auto& ann : meta.value("annotations", nlohmann::json::array())) {
        const auto label = ann.at("label").get<std::string>();
        const auto it = std::lower_bound(ds.classes.begin(), ds.classes.end(), label);
        if (it == ds.classes.end() || *it != label) {
          throw VocabularyError("video " + rec.video_id + ": unknown label \"" + label + "\"");
        }
        rec.labels[static_cast<std::size_t>(it - ds.classes.begin())] = 1.0;
      }
      if (std::all_of(rec.labels.begin(), rec.labels.end(), [](double l) { return l == 0.0; })) {
        throw DatasetError("video " + rec.video_id + " has no labels");
      }
      const auto feature_path = (root / entry.at("feature_path").get<std::string>()).string();
      if (!fs::exists(feature_path)) throw DatasetError("missing feature file " + feature_path);
      rec.features = read_features(feature_path);
      if (rec.features.cols() != ds.feature_dim) {
        throw DatasetError("video " + rec.video_id + ": feature dim " + std::to_string(rec.features.cols()) +
                           " != manifest " + std::to_string(ds.feature_dim));
      }
      if (rec.features.rows() == 0) throw DatasetError("video " + rec.video_id + " has no segments");
      ds.videos.push_back(std::move(rec));
    }
    if (manifest.contains("dataset_hash") && manifest["dataset_hash"].get<std::string>() != dataset_hash(ds)) {
      throw CorruptFileError("manifest: dataset hash mismatch");
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(manifest_path + ": " + e.what());
  }
}

// Empty path: built-in defaults.
inline SyntheticSpec spec_from_file(const std::string& path) {
  if (path.empty()) return {};
  const auto doc = detail::read_json_file(path);
  if (!doc.is_object()) throw ConfigError(path + ": synthetic spec must be a JSON object");
  try {
    return SyntheticSpec::from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline SegmentLabels load_segment_labels(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const auto manifest = detail::read_json_file(manifest_path);
  if (!manifest.contains("segment_labels")) throw DatasetError("manifest has no segment labels");
  const auto doc = detail::read_json_file(
      (fs::path(manifest_path).parent_path() / manifest["segment_labels"].get<std::string>()).string());
  SegmentLabels out;
  for (const auto& [id, labels] : doc.items()) out.emplace(id, labels.get<std::vector<int>>());
  return out;
}

inline GroundTruth load_ground_truth(const std::string& path, const std::string& subset = "") {
  try {
    return parse_ground_truth(detail::read_json_file(path), subset);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(path + ": " + e.what());
  }
}

}  // namespace wtal
