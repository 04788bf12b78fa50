// Copyright 2026 The tvseg Authors
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

// Stage 2: descriptive prompt -> ranked visual prompts.
// detect -> NMS -> confidence filter, then TOP-k selection.

#include <string>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"
#include "tvseg/prompting.hpp"

namespace tvseg {

struct GroundingConfig {
  double nms_iou_threshold = 0.5;
  double confidence_threshold = 0.5;
  int top_k = 10;

  void validate() const {
    if (!(nms_iou_threshold >= 0.0 && nms_iou_threshold <= 1.0)) {
      throw ConfigError("nms_iou_threshold must be in [0,1]");
    }
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw ConfigError("confidence_threshold must be in [0,1]");
    }
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
  }
};

// Boxes at or above `threshold`, order kept.
inline BoxSet filter_by_confidence(const BoxSet& boxes, double threshold) {
  BoxSet out;
  for (const auto& b : boxes) {
    if (b.score() >= threshold) out.insert(b);
  }
  return out;
}

// An empty result is a grounding miss, not an error.
inline BoxSet ground_concept(const ImagePayload& image, const DescriptivePrompt& prompt,
                             const DetectorBackend& detector, const GroundingConfig& cfg) {
  cfg.validate();
  if (prompt.text.empty()) throw PreconditionError("descriptive prompt is empty");
  const auto raw = detect(detector, image, prompt.text);
  return filter_by_confidence(nms(raw.boxes, cfg.nms_iou_threshold), cfg.confidence_threshold);
}

inline BoxSet select_top_k(const BoxSet& boxes, int k) {
  if (k < 1) throw PreconditionError("top-k needs k >= 1");
  return boxes.prefix(static_cast<std::size_t>(k));
}

}  // namespace tvseg
