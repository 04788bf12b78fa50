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

// Stage 3: box-prompted mask decoding and the choice of one mask per sample.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"

namespace tvseg {

enum class SelectionKind {
  oracle_dice,        // best Dice against ground truth (evaluation only)
  predicted_quality,  // segmenter's own quality score (no ground truth needed)
};

struct SelectionPolicy {
  SelectionKind kind = SelectionKind::oracle_dice;

  bool requires_gt() const noexcept { return kind == SelectionKind::oracle_dice; }
};

inline const char* to_string(SelectionKind k) {
  return k == SelectionKind::oracle_dice ? "oracle_dice" : "predicted_quality";
}

inline SelectionKind selection_from_string(const std::string& s) {
  if (s == "oracle_dice") return SelectionKind::oracle_dice;
  if (s == "predicted_quality") return SelectionKind::predicted_quality;
  throw InvalidArgument("unknown selection policy '" + s + "'");
}

inline std::vector<ScoredMaskCandidate> segment_candidates(const ImagePayload& image,
                                                           const BoxSet& boxes,
                                                           const SegmenterBackend& segmenter) {
  return segment_with_boxes(segmenter, image, boxes);
}

// Index of the chosen candidate.
//   oracle_dice:       max Dice vs gt, then max quality, then lowest index
//   predicted_quality: max quality, then lowest index
inline std::size_t select_mask_index(const std::vector<ScoredMaskCandidate>& candidates,
                                     const SelectionPolicy& policy,
                                     const std::optional<BinaryMask>& gt) {
  if (candidates.empty()) throw PreconditionError("no candidates to select from");
  if (policy.requires_gt() && !gt) {
    throw PreconditionError("oracle selection needs a ground-truth mask");
  }
  std::size_t best = 0;
  double best_dice = policy.requires_gt() ? dice(candidates[0].mask, *gt) : 0.0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double q = candidates[i].predicted_quality;
    const double best_q = candidates[best].predicted_quality;
    if (policy.requires_gt()) {
      const double d = dice(candidates[i].mask, *gt);
      if (d > best_dice || (d == best_dice && q > best_q)) {
        best = i;
        best_dice = d;
      }
    } else if (q > best_q) {
      best = i;
    }
  }
  return best;
}

inline ScoredMaskCandidate select_mask(const std::vector<ScoredMaskCandidate>& candidates,
                                       const SelectionPolicy& policy,
                                       const std::optional<BinaryMask>& gt) {
  return candidates[select_mask_index(candidates, policy, gt)];
}

}  // namespace tvseg
