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

// The three model roles the pipeline talks to: a chat model that describes
// the target, a grounding detector that turns a phrase into scored boxes and
// a promptable segmenter that turns boxes (or nothing) into masks. Models are
// opaque; only their inputs and outputs cross this boundary.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"

namespace tvseg {

struct ScoredMaskCandidate {
  BinaryMask mask;
  double predicted_quality = 0.0;
  std::optional<ScoredBox> source_box;
  // Position of source_box in the prompting BoxSet.
  std::optional<std::size_t> source_index;

  friend bool operator==(const ScoredMaskCandidate&, const ScoredMaskCandidate&) = default;
};

struct BackendConfig {
  // "mock:<name>" or "http://host:port".
  std::string endpoint;
  int timeout_ms = 30000;
  int max_retries = 2;
  std::uint64_t seed = 0;
  // Sent as "Authorization: Bearer <token>" when non-empty.
  std::string token;
  // Concurrent calls allowed against this backend; 0 means unbounded.
  int max_in_flight = 0;
  // Mock-specific knobs (jitter, distractors, threshold, script, ...).
  std::map<std::string, std::string> params;

  void validate() const {
    if (endpoint.empty()) throw ConfigError("backend endpoint is empty");
    if (timeout_ms <= 0) throw ConfigError("backend timeout must be positive");
    if (max_retries < 0) throw ConfigError("backend max_retries must be >= 0");
    if (max_in_flight < 0) throw ConfigError("backend max_in_flight must be >= 0");
  }

  bool is_mock() const { return endpoint.rfind("mock:", 0) == 0; }
  std::string mock_name() const { return is_mock() ? endpoint.substr(5) : std::string{}; }

  std::string param(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  double param_double(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::logic_error&) {
      throw ConfigError("backend parameter '" + key + "' is not a number: " + it->second);
    }
  }

  int param_int(const std::string& key, int fallback) const {
    const double v = param_double(key, fallback);
    if (v != static_cast<double>(static_cast<int>(v))) {
      throw ConfigError("backend parameter '" + key + "' must be an integer");
    }
    return static_cast<int>(v);
  }

  bool param_bool(const std::string& key, bool fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("backend parameter '" + key + "' must be true or false");
  }
};

// What a detector returned plus how many boxes were unusable after clipping.
struct Detection {
  BoxSet boxes;
  int dropped = 0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string describe(const ImagePayload& image, const std::string& dialog) const = 0;
  virtual std::string id() const = 0;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual Detection detect(const ImagePayload& image, const std::string& phrase) const = 0;
  virtual std::string id() const = 0;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::vector<ScoredMaskCandidate> segment_with_boxes(const ImagePayload& image,
                                                              const BoxSet& boxes) const = 0;
  virtual std::vector<ScoredMaskCandidate> segment_auto(const ImagePayload& image) const = 0;
  virtual std::string id() const = 0;
};

// Ground truth looked up by image source id; only the oracle mocks use it.
class GroundTruthSource {
 public:
  virtual ~GroundTruthSource() = default;
  virtual std::optional<BinaryMask> mask(const std::string& source_id) const = 0;
  virtual std::optional<std::string> concept_of(const std::string& source_id) const = 0;
};

class MapTruth : public GroundTruthSource {
 public:
  struct Entry {
    std::optional<BinaryMask> mask;
    std::string concept_name;
  };

  void add(std::string source_id, std::optional<BinaryMask> mask, std::string concept_name) {
    entries_.insert_or_assign(std::move(source_id), Entry{std::move(mask), std::move(concept_name)});
  }

  std::optional<BinaryMask> mask(const std::string& source_id) const override {
    auto it = entries_.find(source_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.mask;
  }

  std::optional<std::string> concept_of(const std::string& source_id) const override {
    auto it = entries_.find(source_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.concept_name;
  }

 private:
  std::map<std::string, Entry> entries_;
};

// Clips a box to the image; nothing when no area survives.
inline std::optional<ScoredBox> clip_to_image(const ScoredBox& b, int width, int height) {
  const int x0 = std::clamp(b.x_min(), 0, width), x1 = std::clamp(b.x_max(), 0, width);
  const int y0 = std::clamp(b.y_min(), 0, height), y1 = std::clamp(b.y_max(), 0, height);
  if (x0 >= x1 || y0 >= y1) return std::nullopt;
  return ScoredBox(x0, y0, x1, y1, b.score(), b.phrase());
}

inline std::string chat_describe(const ChatBackend& backend, const ImagePayload& image,
                                 const std::string& dialog) {
  if (dialog.empty()) throw PreconditionError("chat dialog is empty");
  auto reply = backend.describe(image, dialog);
  if (reply.empty()) throw ProtocolError("chat backend '" + backend.id() + "' returned an empty reply");
  return reply;
}

// Raw scored boxes, clipped to the image. Boxes that lose all area to
// clipping are dropped and counted in Detection::dropped.
inline Detection detect(const DetectorBackend& backend, const ImagePayload& image,
                        const std::string& phrase) {
  if (phrase.empty()) throw PreconditionError("detection phrase is empty");
  Detection raw = backend.detect(image, phrase);
  Detection out;
  out.dropped = raw.dropped;
  for (const auto& b : raw.boxes) {
    auto clipped = clip_to_image(b, image.width(), image.height());
    if (!clipped) {
      ++out.dropped;
      continue;
    }
    out.boxes.insert(clipped->phrase().empty() ? clipped->with_phrase(phrase) : *clipped);
  }
  return out;
}

namespace detail {
inline void check_candidate_shapes(const SegmenterBackend& backend, const ImagePayload& image,
                                   const std::vector<ScoredMaskCandidate>& cands) {
  for (const auto& c : cands) {
    if (!image.matches(c.mask)) {
      throw ShapeError("segmenter '" + backend.id() + "' returned a " +
                       std::to_string(c.mask.width()) + "x" + std::to_string(c.mask.height()) +
                       " mask for a " + std::to_string(image.width()) + "x" +
                       std::to_string(image.height()) + " image");
    }
    if (!(c.predicted_quality >= 0.0 && c.predicted_quality <= 1.0)) {
      throw ProtocolError("segmenter '" + backend.id() + "' returned quality outside [0,1]");
    }
  }
}
}  // namespace detail

// At least one candidate per box; each candidate carries its prompting box.
inline std::vector<ScoredMaskCandidate> segment_with_boxes(const SegmenterBackend& backend,
                                                           const ImagePayload& image,
                                                           const BoxSet& boxes) {
  if (boxes.empty()) throw PreconditionError("segment_with_boxes needs at least one box");
  auto cands = backend.segment_with_boxes(image, boxes);
  detail::check_candidate_shapes(backend, image, cands);
  std::vector<std::size_t> per_box(boxes.size(), 0);
  for (auto& c : cands) {
    if (!c.source_index || *c.source_index >= boxes.size()) {
      throw ProtocolError("segmenter '" + backend.id() + "' returned a candidate without a valid source box");
    }
    c.source_box = boxes[*c.source_index];
    ++per_box[*c.source_index];
  }
  for (std::size_t i = 0; i < per_box.size(); ++i) {
    if (per_box[i] == 0) {
      throw ProtocolError("segmenter '" + backend.id() + "' returned no candidate for box " +
                          std::to_string(i));
    }
  }
  return cands;
}

inline std::vector<ScoredMaskCandidate> segment_auto(const SegmenterBackend& backend,
                                                     const ImagePayload& image) {
  auto cands = backend.segment_auto(image);
  detail::check_candidate_shapes(backend, image, cands);
  for (auto& c : cands) {
    c.source_box.reset();
    c.source_index.reset();
  }
  return cands;
}

}  // namespace tvseg
