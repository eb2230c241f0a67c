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

#include <string>
#include <vector>

#include "wtal/datakit.hpp"
#include "wtal/error.hpp"
#include "wtal/evalkit.hpp"
#include "wtal/model.hpp"

namespace wtal {

struct GroupedMagnitudes {
  std::vector<double> action;
  std::vector<double> background;
};

// Embedded-feature magnitudes of every original segment, split by the
// segment-level ground truth.
inline GroupedMagnitudes grouped_magnitudes(const ModelParams& params, const std::vector<const VideoRecord*>& videos,
                                            const SegmentLabels& labels) {
  GroupedMagnitudes out;
  for (const auto* v : videos) {
    const auto it = labels.find(v->video_id);
    if (it == labels.end()) throw DatasetError("no segment labels for " + v->video_id);
    if (it->second.size() != v->features.rows()) throw DatasetError("segment label length mismatch for " + v->video_id);
    const ForwardOut fwd = forward(params, v->features);
    for (std::size_t t = 0; t < fwd.magnitudes.size(); ++t) {
      (it->second[t] >= 0 ? out.action : out.background).push_back(fwd.magnitudes[t]);
    }
  }
  return out;
}

inline MagnitudeHistogram magnitude_histogram(const ModelParams& params, const std::vector<const VideoRecord*>& videos,
                                              const SegmentLabels& labels, std::size_t bins) {
  const auto g = grouped_magnitudes(params, videos, labels);
  return histogram_from_values(g.action, g.background, bins);
}

}  // namespace wtal
