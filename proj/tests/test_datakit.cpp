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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "wtal/datakit.hpp"

namespace wtal {
namespace {

namespace fs = std::filesystem;

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.num_train = 12;
  spec.num_test = 6;
  return spec;
}

TEST(FeatureFile, RoundTrip) {
  Matrix m(3, 4);
  for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = 0.25 * static_cast<double>(i) - 1.0;
  const auto bytes = encode_features(m);
  ASSERT_EQ(bytes.size(), 16u + 12u * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "UMFT");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 4);
  EXPECT_EQ(decode_features(bytes, "mem"), m);
  const auto dir = testing::scratch_dir("umft");
  const auto path = (dir / "a.umft").string();
  write_features(m, path);
  EXPECT_EQ(read_features(path), m);
}

TEST(FeatureFile, StoresSinglePrecision) {
  Matrix m(1, 1);
  m(0, 0) = 0.1;
  EXPECT_EQ(decode_features(encode_features(m), "mem")(0, 0), static_cast<double>(0.1f));
}

TEST(FeatureFile, CorruptInputs) {
  Matrix m(2, 2);
  auto bytes = encode_features(m);
  EXPECT_THROW(decode_features({}, "empty"), CorruptFileError);
  auto short_payload = bytes;
  short_payload.pop_back();
  EXPECT_THROW(decode_features(short_payload, "short"), CorruptFileError);
  auto long_payload = bytes;
  long_payload.push_back(0);
  EXPECT_THROW(decode_features(long_payload, "long"), CorruptFileError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_features(bad_magic, "magic"), VersionError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_features(bad_version, "version"), VersionError);
  const auto dir = testing::scratch_dir("umft_empty");
  const auto path = (dir / "empty.umft").string();
  std::ofstream(path, std::ios::binary).close();
  EXPECT_THROW(read_features(path), CorruptFileError);
}

TEST(Generate, DeterministicPerSeed) {
  const auto a = generate(small_spec());
  const auto b = generate(small_spec());
  EXPECT_EQ(dataset_hash(a.dataset), dataset_hash(b.dataset));
  ASSERT_EQ(a.dataset.videos.size(), b.dataset.videos.size());
  for (std::size_t i = 0; i < a.dataset.videos.size(); ++i) {
    EXPECT_EQ(encode_features(a.dataset.videos[i].features), encode_features(b.dataset.videos[i].features));
  }
  auto other = small_spec();
  other.seed = 1;
  EXPECT_NE(dataset_hash(generate(other).dataset), dataset_hash(a.dataset));
}

TEST(Generate, ShapesAndSubsets) {
  const auto spec = small_spec();
  const auto data = generate(spec);
  EXPECT_EQ(data.dataset.classes.size(), spec.num_classes);
  EXPECT_EQ(data.dataset.subset("train").size(), spec.num_train);
  EXPECT_EQ(data.dataset.subset("test").size(), spec.num_test);
  EXPECT_EQ(data.dataset.subset("").size(), spec.num_train + spec.num_test);
  for (const auto& v : data.dataset.videos) {
    EXPECT_GE(v.features.rows(), spec.min_segments);
    EXPECT_LE(v.features.rows(), spec.max_segments);
    EXPECT_EQ(v.features.cols(), spec.feature_dim);
    EXPECT_DOUBLE_EQ(v.duration, static_cast<double>(v.features.rows()) * 16.0 / 25.0);
    EXPECT_EQ(data.segment_labels.at(v.video_id).size(), v.features.rows());
  }
}

TEST(Generate, LabelsMatchPlantedInstances) {
  auto spec = small_spec();
  spec.max_classes_per_video = 3;
  spec.max_instances = 4;
  const auto data = generate(spec);
  std::map<std::string, std::vector<GroundTruthInstance>> by_video;
  for (const auto& g : data.ground_truth.instances) by_video[g.video_id].push_back(g);
  for (const auto& v : data.dataset.videos) {
    std::vector<double> expected(spec.num_classes, 0.0);
    for (const auto& g : by_video[v.video_id]) expected[g.class_id] = 1.0;
    EXPECT_EQ(v.labels, expected);
    EXPECT_GE(std::count(v.labels.begin(), v.labels.end(), 1.0), 1);
    const auto& seg = data.segment_labels.at(v.video_id);
    std::vector<double> from_segments(spec.num_classes, 0.0);
    for (int s : seg) {
      if (s >= 0) from_segments[static_cast<std::size_t>(s)] = 1.0;
    }
    EXPECT_EQ(from_segments, expected);
  }
}

TEST(Generate, InstancesDisjointAndInsideTheVideo) {
  auto spec = small_spec();
  spec.max_instances = 5;
  spec.max_classes_per_video = 2;
  const auto data = generate(spec);
  std::map<std::string, std::vector<GroundTruthInstance>> by_video;
  for (const auto& g : data.ground_truth.instances) by_video[g.video_id].push_back(g);
  for (const auto& [id, list] : by_video) {
    const double duration = data.ground_truth.videos.at(id).duration;
    for (std::size_t i = 0; i < list.size(); ++i) {
      EXPECT_GE(list[i].t_start, 0.0);
      EXPECT_LT(list[i].t_start, list[i].t_end);
      EXPECT_LE(list[i].t_end, duration + 1e-9);
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        EXPECT_EQ(tiou({list[i].t_start, list[i].t_end}, {list[j].t_start, list[j].t_end}), 0.0);
      }
    }
  }
}

TEST(Generate, SingleClassPerVideoByDefault) {
  const auto data = generate(small_spec());
  for (const auto& v : data.dataset.videos) EXPECT_EQ(std::count(v.labels.begin(), v.labels.end(), 1.0), 1);
}

TEST(Generate, PrototypesNearlyOrthogonal) {
  const auto protos = detail::draw_prototypes(5, 32, 17);
  for (std::size_t a = 0; a < protos.size(); ++a) {
    EXPECT_NEAR(l2_norm(protos[a]), 1.0, 1e-12);
    for (std::size_t b = a + 1; b < protos.size(); ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < 32; ++i) dot += protos[a][i] * protos[b][i];
      EXPECT_LT(std::abs(dot), 0.5);
    }
  }
  EXPECT_THROW(detail::draw_prototypes(5, 1, 0), ConfigError);
}

// Mean distance between neighbouring background segments relative to their norm.
double background_step_ratio(BackgroundMode mode) {
  auto spec = small_spec();
  spec.background_mode = mode;
  spec.amplitude_spread = 0.0;
  const auto data = generate(spec);
  double step = 0.0;
  double norm = 0.0;
  for (const auto& v : data.dataset.videos) {
    const auto& seg = data.segment_labels.at(v.video_id);
    for (std::size_t t = 1; t < seg.size(); ++t) {
      if (seg[t] >= 0 || seg[t - 1] >= 0) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < spec.feature_dim; ++i) d += std::pow(v.features(t, i) - v.features(t - 1, i), 2);
      step += std::sqrt(d);
      norm += l2_norm(v.features.row(t));
    }
  }
  return step / norm;
}

TEST(Generate, StaticBackgroundVariesLessThanDynamic) {
  const double stat = background_step_ratio(BackgroundMode::kStatic);
  const double dyn = background_step_ratio(BackgroundMode::kDynamic);
  EXPECT_GT(dyn, 1.2);  // independent draws: about sqrt(2)
  EXPECT_LT(1.5 * stat, dyn);
}

TEST(Spec, JsonRoundTripAndValidation) {
  SyntheticSpec spec;
  spec.num_classes = 7;
  spec.background_mode = BackgroundMode::kDynamic;
  const auto back = SyntheticSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  auto j = spec.to_json();
  j["num_classes"] = 1;
  EXPECT_THROW(SyntheticSpec::from_json(j), ConfigError);
  j = spec.to_json();
  j["colour"] = "blue";
  EXPECT_THROW(SyntheticSpec::from_json(j), ConfigError);
  j = spec.to_json();
  j["background_mode"] = "noisy";
  EXPECT_THROW(SyntheticSpec::from_json(j), ConfigError);
  j = spec.to_json();
  j["min_segments"] = 300;
  EXPECT_THROW(SyntheticSpec::from_json(j), ConfigError);
  EXPECT_EQ(spec_from_file("").to_json(), SyntheticSpec{}.to_json());
}

TEST(Dataset, WriteAndLoadRoundTrip) {
  const auto data = generate(small_spec());
  const auto dir = testing::scratch_dir("dataset_rt");
  const auto hash = write_dataset(data, dir.string());
  EXPECT_EQ(hash, dataset_hash(data.dataset));
  const auto manifest = (dir / kManifestFile).string();
  const auto loaded = load_dataset(manifest);
  EXPECT_EQ(dataset_hash(loaded), hash);
  ASSERT_EQ(loaded.videos.size(), data.dataset.videos.size());
  for (std::size_t i = 0; i < loaded.videos.size(); ++i) {
    EXPECT_EQ(loaded.videos[i].features, data.dataset.videos[i].features);
    EXPECT_EQ(loaded.videos[i].labels, data.dataset.videos[i].labels);
    EXPECT_EQ(loaded.videos[i].subset, data.dataset.videos[i].subset);
  }
  EXPECT_EQ(load_segment_labels(manifest), data.segment_labels);
  const auto gt = load_ground_truth((dir / kGroundTruthFile).string(), "test");
  EXPECT_EQ(gt.videos.size(), small_spec().num_test);
}

TEST(Dataset, HashIsPinned) {
  // Platform-stable fingerprint of a fixed tiny dataset.
  Dataset ds;
  ds.classes = {"a", "b"};
  ds.feature_dim = 2;
  VideoRecord v;
  v.video_id = "v0";
  v.subset = "train";
  v.duration = 1.28;
  v.features = Matrix(2, 2);
  v.features(0, 1) = 0.5;
  v.labels = {1.0, 0.0};
  ds.videos.push_back(v);
  const std::string h = dataset_hash(ds);
  EXPECT_EQ(h.size(), 16u);
  ds.videos[0].features(1, 1) = 0.25;
  EXPECT_NE(dataset_hash(ds), h);
}

nlohmann::json read(const fs::path& p) { return nlohmann::json::parse(io::read_text(p.string())); }

void write(const fs::path& p, const nlohmann::json& j) { io::write_text(p.string(), j.dump()); }

// Two-video dataset written to disk, for error-case surgery.
fs::path two_video_dataset(const std::string& name) {
  auto spec = small_spec();
  spec.num_train = 1;
  spec.num_test = 1;
  const auto dir = testing::scratch_dir(name);
  write_dataset(generate(spec), dir.string());
  return dir;
}

TEST(Dataset, TwoVideoManifest) {
  const auto dir = two_video_dataset("two_ok");
  const auto ds = load_dataset((dir / kManifestFile).string());
  ASSERT_EQ(ds.videos.size(), 2u);
  EXPECT_EQ(ds.feature_dim, 32u);
  EXPECT_EQ(ds.videos[0].features.cols(), 32u);
}

TEST(Dataset, LoadErrors) {
  {
    const auto dir = two_video_dataset("err_missing");
    fs::remove(dir / "features" / "video_test_0000.umft");
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), DatasetError);
  }
  {
    const auto dir = two_video_dataset("err_zero_label");
    auto gt = read(dir / kGroundTruthFile);
    gt["database"]["video_test_0000"]["annotations"] = nlohmann::json::array();
    write(dir / kGroundTruthFile, gt);
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), DatasetError);
  }
  {
    const auto dir = two_video_dataset("err_unknown_label");
    auto gt = read(dir / kGroundTruthFile);
    gt["database"]["video_test_0000"]["annotations"][0]["label"] = "dance";
    write(dir / kGroundTruthFile, gt);
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), VocabularyError);
  }
  {
    const auto dir = two_video_dataset("err_duplicate");
    auto m = read(dir / kManifestFile);
    m["videos"][1] = m["videos"][0];
    write(dir / kManifestFile, m);
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), DatasetError);
  }
  {
    const auto dir = two_video_dataset("err_hash");
    auto m = read(dir / kManifestFile);
    m["dataset_hash"] = "0000000000000000";
    write(dir / kManifestFile, m);
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), CorruptFileError);
  }
  {
    const auto dir = two_video_dataset("err_dim");
    auto m = read(dir / kManifestFile);
    m["feature_dim"] = 31;
    write(dir / kManifestFile, m);
    EXPECT_THROW(load_dataset((dir / kManifestFile).string()), DatasetError);
  }
  EXPECT_THROW(load_dataset("/nonexistent/manifest.json"), DatasetError);
}

TEST(Generate, RidgeProbeSeparatesSegments) {
  // Ridge regression on oracle segment labels (background as an extra class).
  const SyntheticSpec spec;
  const auto data = generate(spec);
  const std::size_t classes = spec.num_classes + 1;
  const std::size_t dim = spec.feature_dim + 1;
  auto design = [&](const std::string& subset, Eigen::MatrixXd& x, std::vector<std::size_t>& y) {
    std::size_t rows = 0;
    for (const auto* v : data.dataset.subset(subset)) rows += v->features.rows();
    x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    y.clear();
    Eigen::Index r = 0;
    for (const auto* v : data.dataset.subset(subset)) {
      const auto& seg = data.segment_labels.at(v->video_id);
      for (std::size_t t = 0; t < v->features.rows(); ++t, ++r) {
        for (std::size_t i = 0; i < spec.feature_dim; ++i) x(r, static_cast<Eigen::Index>(i)) = v->features(t, i);
        x(r, static_cast<Eigen::Index>(spec.feature_dim)) = 1.0;
        y.push_back(seg[t] < 0 ? spec.num_classes : static_cast<std::size_t>(seg[t]));
      }
    }
  };
  Eigen::MatrixXd x;
  std::vector<std::size_t> y;
  design("train", x, y);
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(classes));
  for (Eigen::Index r = 0; r < x.rows(); ++r) target(r, static_cast<Eigen::Index>(y[static_cast<std::size_t>(r)])) = 1.0;
  const Eigen::MatrixXd gram = x.transpose() * x + 1e-3 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * target);
  design("test", x, y);
  const Eigen::MatrixXd pred = x * w;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    Eigen::Index best = 0;
    pred.row(r).maxCoeff(&best);
    if (static_cast<std::size_t>(best) == y[static_cast<std::size_t>(r)]) ++correct;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(pred.rows());
  RecordProperty("probe_accuracy", std::to_string(accuracy));
  EXPECT_GE(accuracy, 0.95);
}

}  // namespace
}  // namespace wtal
