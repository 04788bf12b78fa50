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

// Deterministic in-process backends. Given the same seed and inputs each one
// returns byte-identical output, which lets every pipeline path run offline.
//
//   ScriptedChat       replies looked up by (source id, dialog hash)
//   OracleDetector     ground-truth boxes with optional jitter, distractors,
//                      score noise and misses
//   OracleSegmenter    ground truth clipped to the prompting box
//   ThresholdSegmenter intensity >= tau inside the prompting box; its
//                      everything mode is the grid-over-regions auto mock

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvseg/backend.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"
#include "tvseg/rng.hpp"

namespace tvseg {

inline std::string hash_hex(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

class ScriptedChat : public ChatBackend {
 public:
  // A script entry without a dialog hash matches any dialog for its source.
  struct Entry {
    std::string source_id;
    std::optional<std::string> dialog_hash;
    std::string reply;
  };

  ScriptedChat(std::vector<Entry> entries, bool fallback,
               std::shared_ptr<const GroundTruthSource> truth = nullptr)
      : fallback_(fallback), truth_(std::move(truth)) {
    for (auto& e : entries) {
      const auto key = e.source_id + '\n' + e.dialog_hash.value_or("*");
      replies_.insert_or_assign(key, std::move(e.reply));
    }
  }

  // Script file: {"entries":[{"source_id":..., "dialog_hash":..., "reply":...}]}
  static std::vector<Entry> load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chat script " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("chat script " + path.string() + ": " + e.what());
    }
    std::vector<Entry> out;
    if (!j.contains("entries") || !j["entries"].is_array()) {
      throw ConfigError("chat script " + path.string() + " has no 'entries' array");
    }
    for (const auto& e : j["entries"]) {
      if (!e.contains("source_id") || !e.contains("reply")) {
        throw ConfigError("chat script entry needs source_id and reply");
      }
      Entry entry{e["source_id"].get<std::string>(), std::nullopt, e["reply"].get<std::string>()};
      if (e.contains("dialog_hash")) entry.dialog_hash = e["dialog_hash"].get<std::string>();
      out.push_back(std::move(entry));
    }
    return out;
  }

  static std::string fallback_reply(const std::string& concept_name) {
    return "The image shows the " + concept_name + ".";
  }

  std::string describe(const ImagePayload& image, const std::string& dialog) const override {
    auto it = replies_.find(image.source_id() + '\n' + hash_hex(dialog));
    if (it == replies_.end()) it = replies_.find(image.source_id() + "\n*");
    if (it != replies_.end()) return it->second;
    if (!fallback_) throw Error("no scripted chat reply for '" + image.source_id() + "'");
    std::optional<std::string> concept_name;
    if (truth_) concept_name = truth_->concept_of(image.source_id());
    return fallback_reply(concept_name.value_or("target"));
  }

  std::string id() const override { return "mock:scripted"; }

 private:
  std::map<std::string, std::string> replies_;
  bool fallback_;
  std::shared_ptr<const GroundTruthSource> truth_;
};

struct OracleDetectorOptions {
  double jitter_sigma = 0.0;      // px, per box side
  int distractor_count = 0;
  double score_noise = 0.0;       // ground-truth score = 1 - score_noise * |N(0,1)|
  double prompt_sensitivity = 0.0;
  double miss_rate = 0.0;         // probability of returning no boxes at all
  BoxMode box_mode = BoxMode::union_all;
};

class OracleDetector : public DetectorBackend {
 public:
  OracleDetector(std::uint64_t seed, OracleDetectorOptions opts,
                 std::shared_ptr<const GroundTruthSource> truth)
      : seed_(seed), opts_(opts), truth_(std::move(truth)) {
    if (opts_.jitter_sigma < 0 || opts_.distractor_count < 0 || opts_.score_noise < 0 ||
        opts_.prompt_sensitivity < 0 || opts_.miss_rate < 0 || opts_.miss_rate > 1) {
      throw ConfigError("oracle detector options out of range");
    }
  }

  // Richer phrases (more words) shrink the jitter when prompt_sensitivity > 0.
  double effective_sigma(const std::string& phrase) const {
    std::istringstream words(phrase);
    int n = 0;
    for (std::string w; words >> w;) ++n;
    return opts_.jitter_sigma / (1.0 + opts_.prompt_sensitivity * std::max(0, n - 1));
  }

  Detection detect(const ImagePayload& image, const std::string& phrase) const override {
    Detection out;
    if (!truth_) return out;
    auto gt = truth_->mask(image.source_id());
    if (!gt || gt->empty() || !image.matches(*gt)) return out;

    CounterRng rng(seed_, image.source_id(), "detect");
    if (opts_.miss_rate > 0 && rng.uniform() < opts_.miss_rate) return out;

    const double sigma = effective_sigma(phrase);
    double lowest_gt_score = 1.0;
    for (const auto& gt_box : mask_to_bbox(*gt, opts_.box_mode)) {
      const int dx0 = static_cast<int>(std::lround(sigma * rng.normal()));
      const int dy0 = static_cast<int>(std::lround(sigma * rng.normal()));
      const int dx1 = static_cast<int>(std::lround(sigma * rng.normal()));
      const int dy1 = static_cast<int>(std::lround(sigma * rng.normal()));
      const double score = std::clamp(1.0 - opts_.score_noise * std::abs(rng.normal()), 0.0, 1.0);
      const int x0 = gt_box.x_min() + dx0, y0 = gt_box.y_min() + dy0;
      const int x1 = gt_box.x_max() + dx1, y1 = gt_box.y_max() + dy1;
      if (x0 >= x1 || y0 >= y1) {
        ++out.dropped;
        continue;
      }
      auto clipped = clip_to_image(ScoredBox(x0, y0, x1, y1, score), image.width(), image.height());
      if (!clipped) {
        ++out.dropped;
        continue;
      }
      lowest_gt_score = std::min(lowest_gt_score, score);
      out.boxes.insert(*clipped);
    }

    for (int i = 0; i < opts_.distractor_count; ++i) {
      const int bw = rng.uniform_int(1, std::max(1, image.width() / 2));
      const int bh = rng.uniform_int(1, std::max(1, image.height() / 2));
      const int x0 = rng.uniform_int(0, image.width() - bw);
      const int y0 = rng.uniform_int(0, image.height() - bh);
      // Strictly below every ground-truth box score.
      const double score = lowest_gt_score * rng.uniform(0.05, 0.95);
      out.boxes.insert(ScoredBox(x0, y0, x0 + bw, y0 + bh, score));
    }
    return out;
  }

  std::string id() const override { return "mock:oracle"; }

 private:
  std::uint64_t seed_;
  OracleDetectorOptions opts_;
  std::shared_ptr<const GroundTruthSource> truth_;
};

class OracleSegmenter : public SegmenterBackend {
 public:
  explicit OracleSegmenter(std::shared_ptr<const GroundTruthSource> truth)
      : truth_(std::move(truth)) {}

  // One candidate per box: ground truth inside the box, with the covered
  // fraction of the ground truth as its quality.
  std::vector<ScoredMaskCandidate> segment_with_boxes(const ImagePayload& image,
                                                      const BoxSet& boxes) const override {
    const auto gt = truth_for(image);
    std::vector<ScoredMaskCandidate> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      auto cand = gt.clipped_to(boxes[i]);
      const auto total = gt.count();
      const double quality =
          total == 0 ? 0.0 : static_cast<double>(cand.count()) / static_cast<double>(total);
      out.push_back({std::move(cand), quality, boxes[i], i});
    }
    return out;
  }

  // Every ground-truth component, quality 1.
  std::vector<ScoredMaskCandidate> segment_auto(const ImagePayload& image) const override {
    std::vector<ScoredMaskCandidate> out;
    for (auto& comp : connected_components(truth_for(image))) {
      out.push_back({std::move(comp), 1.0, std::nullopt, std::nullopt});
    }
    return out;
  }

  std::string id() const override { return "mock:oracle"; }

 private:
  BinaryMask truth_for(const ImagePayload& image) const {
    std::optional<BinaryMask> gt;
    if (truth_) gt = truth_->mask(image.source_id());
    if (!gt || !image.matches(*gt)) return BinaryMask(image.width(), image.height());
    return *std::move(gt);
  }

  std::shared_ptr<const GroundTruthSource> truth_;
};

class ThresholdSegmenter : public SegmenterBackend {
 public:
  ThresholdSegmenter(std::uint64_t seed, int threshold, std::string name = "mock:threshold")
      : seed_(seed), threshold_(threshold), name_(std::move(name)) {
    if (threshold < 0 || threshold > 255) throw ConfigError("segmenter threshold must be in [0,255]");
  }

  // Foreground inside each box; quality is the fraction of the box filled.
  std::vector<ScoredMaskCandidate> segment_with_boxes(const ImagePayload& image,
                                                      const BoxSet& boxes) const override {
    const auto fg = threshold_mask(image, threshold_);
    std::vector<ScoredMaskCandidate> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      auto cand = fg.clipped_to(boxes[i]);
      const auto area = boxes[i].area();
      out.push_back({cand, static_cast<double>(cand.count()) / static_cast<double>(area),
                     boxes[i], i});
    }
    return out;
  }

  // Everything mode: one candidate per connected foreground region, then one
  // per cell of a seeded g x g grid (g in 2..4) restricted to the foreground.
  // Identical masks are reported once. An all-background image yields none.
  std::vector<ScoredMaskCandidate> segment_auto(const ImagePayload& image) const override {
    const auto fg = threshold_mask(image, threshold_);
    std::vector<ScoredMaskCandidate> out;
    if (fg.empty()) return out;
    CounterRng rng(seed_, image.source_id(), "segment_auto");
    auto add = [&out](BinaryMask m, double q) {
      for (const auto& c : out) {
        if (c.mask == m) return;
      }
      out.push_back({std::move(m), q, std::nullopt, std::nullopt});
    };
    for (auto& comp : connected_components(fg)) add(std::move(comp), rng.uniform(0.7, 1.0));
    const int g = rng.uniform_int(2, 4);
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) {
        const int x0 = gx * image.width() / g, x1 = (gx + 1) * image.width() / g;
        const int y0 = gy * image.height() / g, y1 = (gy + 1) * image.height() / g;
        if (x0 >= x1 || y0 >= y1) continue;
        auto part = fg.clipped_to(ScoredBox(x0, y0, x1, y1));
        if (part.empty()) continue;
        add(std::move(part), rng.uniform(0.0, 0.6));
      }
    }
    return out;
  }

  std::string id() const override { return name_; }

 private:
  std::uint64_t seed_;
  int threshold_;
  std::string name_;
};

// ---- construction from BackendConfig ---------------------------------------

inline std::shared_ptr<ChatBackend> make_mock_chat(const BackendConfig& cfg,
                                                   std::shared_ptr<const GroundTruthSource> truth) {
  const auto name = cfg.mock_name();
  if (name != "scripted") throw ConfigError("unknown chat mock '" + name + "'");
  std::vector<ScriptedChat::Entry> entries;
  const auto script = cfg.param("script", "");
  if (!script.empty()) entries = ScriptedChat::load_script(script);
  return std::make_shared<ScriptedChat>(std::move(entries), cfg.param_bool("fallback", true),
                                        std::move(truth));
}

inline std::shared_ptr<DetectorBackend> make_mock_detector(
    const BackendConfig& cfg, std::shared_ptr<const GroundTruthSource> truth) {
  const auto name = cfg.mock_name();
  if (name != "oracle") throw ConfigError("unknown detector mock '" + name + "'");
  OracleDetectorOptions o;
  o.jitter_sigma = cfg.param_double("jitter", 0.0);
  o.distractor_count = cfg.param_int("distractors", 0);
  o.score_noise = cfg.param_double("score_noise", 0.0);
  o.prompt_sensitivity = cfg.param_double("prompt_sensitivity", 0.0);
  o.miss_rate = cfg.param_double("miss_rate", 0.0);
  o.box_mode = box_mode_from_string(cfg.param("box_mode", "union"));
  return std::make_shared<OracleDetector>(cfg.seed, o, std::move(truth));
}

inline std::shared_ptr<SegmenterBackend> make_mock_segmenter(
    const BackendConfig& cfg, std::shared_ptr<const GroundTruthSource> truth) {
  const auto name = cfg.mock_name();
  if (name == "oracle") return std::make_shared<OracleSegmenter>(std::move(truth));
  if (name == "threshold" || name == "grid_auto") {
    return std::make_shared<ThresholdSegmenter>(cfg.seed, cfg.param_int("threshold", 128),
                                                "mock:" + name);
  }
  throw ConfigError("unknown segmenter mock '" + name + "'");
}

}  // namespace tvseg
