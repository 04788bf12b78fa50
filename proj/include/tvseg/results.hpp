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

#include <optional>
#include <string>
#include <vector>

#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"

namespace tvseg {

enum class MethodKind { tv_sam, gsam, sam_auto, sam_bbox };

inline const char* to_string(MethodKind k) {
  switch (k) {
    case MethodKind::tv_sam: return "tv_sam";
    case MethodKind::gsam: return "gsam";
    case MethodKind::sam_auto: return "sam_auto";
    case MethodKind::sam_bbox: return "sam_bbox";
  }
  return "?";
}

inline MethodKind method_kind_from_string(const std::string& s) {
  if (s == "tv_sam") return MethodKind::tv_sam;
  if (s == "gsam") return MethodKind::gsam;
  if (s == "sam_auto") return MethodKind::sam_auto;
  if (s == "sam_bbox") return MethodKind::sam_bbox;
  throw InvalidArgument("unknown method kind '" + s + "'");
}

struct StageTimings {
  double prompt_ms = 0.0;
  double ground_ms = 0.0;
  double segment_ms = 0.0;
};

// Outcome of one method on one sample.
struct SampleResult {
  std::string sample_id;
  std::string dataset;
  std::string method;  // the method's configured name
  MethodKind kind = MethodKind::tv_sam;
  std::optional<double> dice;  // absent when the sample has no ground truth
  std::optional<RleMask> mask;
  std::string prompt;
  std::vector<ScoredBox> boxes;
  StageTimings timings;
  bool grounding_miss = false;
  bool backend_error = false;
  std::string error;
};

}  // namespace tvseg
