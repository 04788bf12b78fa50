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

// Dataset manifests, sample loading and the synthetic dataset generator.
//
// manifest.csv:
//
//   # dataset: Polyp             (optional; defaults to the directory name)
//   # declared_count: 602        (optional; must equal the number of rows)
//   sample_id,image,mask,modality,concept
//   p0001,images/p0001.png,masks/p0001.png,Endoscopy,polyp
//
// Paths are relative to the manifest's directory. The mask column may be
// empty for samples without ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvseg/backend.hpp"
#include "tvseg/csv.hpp"
#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"
#include "tvseg/image_io.hpp"
#include "tvseg/rng.hpp"

namespace tvseg {

inline constexpr std::array<std::string_view, 8> kModalities = {
    "Endoscopy", "Dermoscopy", "Microscopy", "Ultrasound", "X-ray", "CT", "T1 MRI", "T2 MRI"};

inline bool is_known_modality(std::string_view m) {
  return std::find(kModalities.begin(), kModalities.end(), m) != kModalities.end();
}

struct Sample {
  std::string sample_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> gt_mask_path;
  std::string modality;
  std::string concept_name;
  std::string dataset;

  // Unique across datasets; this is the id backends see.
  std::string source_id() const { return dataset + "/" + sample_id; }
};

struct Manifest {
  std::string dataset;
  std::vector<Sample> samples;
  std::optional<std::size_t> declared_count;
  std::filesystem::path path;
};

namespace detail {
inline std::string trim_copy(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

// Parses and validates a manifest. Every problem found is reported in one
// ManifestError.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError({"cannot open manifest " + path.string()});
  const auto base = path.parent_path();
  Manifest m;
  m.path = path;
  m.dataset = std::filesystem::absolute(path).parent_path().filename().string();
  std::vector<std::string> problems;
  int line = 0;

  // Directives before the header.
  while (in.peek() == '#') {
    std::string text;
    std::getline(in, text);
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto colon = text.find(':');
    if (colon == std::string::npos) continue;
    const auto key = detail::trim_copy(std::string_view(text).substr(1, colon - 1));
    const auto value = detail::trim_copy(std::string_view(text).substr(colon + 1));
    if (key == "dataset") {
      if (value.empty()) problems.push_back("line " + std::to_string(line) + ": empty dataset name");
      else m.dataset = value;
    } else if (key == "declared_count") {
      try {
        std::size_t used = 0;
        const auto n = std::stoll(value, &used);
        if (used != value.size() || n < 0) throw std::invalid_argument(value);
        m.declared_count = static_cast<std::size_t>(n);
      } catch (const std::logic_error&) {
        problems.push_back("line " + std::to_string(line) + ": declared_count is not a count: " + value);
      }
    }
  }

  static const std::vector<std::string> kHeader = {"sample_id", "image", "mask", "modality", "concept"};
  std::optional<std::vector<std::string>> header;
  try {
    header = csv::read_record(in, line);
  } catch (const DecodeError& e) {
    throw ManifestError({path.string() + ": " + e.what()});
  }
  if (!header || *header != kHeader) {
    throw ManifestError({path.string() + ": line " + std::to_string(line) +
                         ": expected header sample_id,image,mask,modality,concept"});
  }

  std::set<std::string> seen;
  for (;;) {
    std::optional<std::vector<std::string>> rec;
    try {
      rec = csv::read_record(in, line);
    } catch (const DecodeError& e) {
      problems.push_back(e.what());
      break;
    }
    if (!rec) break;
    if (rec->size() == 1 && rec->front().empty()) continue;  // blank line
    const auto where = "line " + std::to_string(line) + ": ";
    if (rec->size() != kHeader.size()) {
      problems.push_back(where + "expected 5 fields, found " + std::to_string(rec->size()));
      continue;
    }
    Sample s;
    s.sample_id = detail::trim_copy((*rec)[0]);
    s.image_path = base / detail::trim_copy((*rec)[1]);
    if (auto mask = detail::trim_copy((*rec)[2]); !mask.empty()) s.gt_mask_path = base / mask;
    s.modality = detail::trim_copy((*rec)[3]);
    s.concept_name = detail::trim_copy((*rec)[4]);
    s.dataset = m.dataset;
    if (s.sample_id.empty()) problems.push_back(where + "empty sample_id");
    if (!seen.insert(s.sample_id).second) problems.push_back(where + "duplicate sample_id '" + s.sample_id + "'");
    if (!is_known_modality(s.modality)) problems.push_back(where + "unknown modality '" + s.modality + "'");
    if (s.concept_name.empty()) problems.push_back(where + "empty concept");
    if (!std::filesystem::is_regular_file(s.image_path)) {
      problems.push_back(where + "missing image file " + s.image_path.string());
    }
    if (s.gt_mask_path && !std::filesystem::is_regular_file(*s.gt_mask_path)) {
      problems.push_back(where + "missing mask file " + s.gt_mask_path->string());
    }
    m.samples.push_back(std::move(s));
  }
  if (m.declared_count && *m.declared_count != m.samples.size()) {
    problems.push_back("declared_count " + std::to_string(*m.declared_count) + " but " +
                       std::to_string(m.samples.size()) + " samples listed");
  }
  if (!problems.empty()) {
    for (auto& p : problems) p = path.string() + ": " + p;
    throw ManifestError(std::move(problems));
  }
  return m;
}

struct LoadedSample {
  ImagePayload image;
  std::optional<BinaryMask> gt;
};

// Image as gray or RGB; mask binarized at >= 128 and required to match the
// image size.
inline LoadedSample load_sample(const Sample& s) {
  auto image = read_image(s.image_path, s.source_id());
  std::optional<BinaryMask> gt;
  if (s.gt_mask_path) {
    gt = read_mask(*s.gt_mask_path);
    if (!image.matches(*gt)) {
      throw ShapeError(s.source_id() + ": mask is " + std::to_string(gt->width()) + "x" +
                       std::to_string(gt->height()) + " but image is " +
                       std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
  }
  return {std::move(image), std::move(gt)};
}

// Ground truth for the oracle mocks, read lazily from manifests.
class ManifestTruth : public GroundTruthSource {
 public:
  explicit ManifestTruth(const std::vector<Manifest>& manifests) {
    for (const auto& m : manifests) {
      for (const auto& s : m.samples) samples_.insert_or_assign(s.source_id(), s);
    }
  }

  std::optional<BinaryMask> mask(const std::string& source_id) const override {
    auto it = samples_.find(source_id);
    if (it == samples_.end() || !it->second.gt_mask_path) return std::nullopt;
    {
      std::lock_guard lock(mu_);
      if (auto c = cache_.find(source_id); c != cache_.end()) return c->second;
    }
    auto m = read_mask(*it->second.gt_mask_path);
    std::lock_guard lock(mu_);
    cache_.insert_or_assign(source_id, m);
    return m;
  }

  std::optional<std::string> concept_of(const std::string& source_id) const override {
    auto it = samples_.find(source_id);
    if (it == samples_.end()) return std::nullopt;
    return it->second.concept_name;
  }

 private:
  std::map<std::string, Sample> samples_;
  mutable std::mutex mu_;
  mutable std::map<std::string, BinaryMask> cache_;
};

// ---- synthetic data --------------------------------------------------------

struct SyntheticShape {
  enum Kind { disk, rect } kind = disk;
  // disk: centre (cx, cy) and radius; rect: half-open [x0,x1) x [y0,y1).
  int cx = 0, cy = 0, radius = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool covers(int x, int y) const {
    if (kind == disk) {
      const std::int64_t dx = x - cx, dy = y - cy;
      return dx * dx + dy * dy <= std::int64_t{radius} * radius;
    }
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
};

struct SyntheticSpec {
  int n = 10;
  int width = 64;
  int height = 64;
  int shapes = 1;       // shapes per image, placed at random
  int noise = 20;       // uniform +-noise per pixel; at most 72
  std::uint64_t seed = 0;
  int channels = 1;
  std::string dataset = "synthetic";
  std::string modality = "Endoscopy";
  std::string concept_name = "lesion";
  // When set, every image uses exactly these shapes.
  std::vector<SyntheticShape> fixed_shapes;
};

namespace detail {

inline std::string region_name(double fx, double fy) {
  static const char* rows[] = {"upper", "middle", "lower"};
  static const char* cols[] = {"left", "center", "right"};
  const int r = std::clamp(static_cast<int>(fy * 3), 0, 2);
  const int c = std::clamp(static_cast<int>(fx * 3), 0, 2);
  if (r == 1 && c == 1) return "center of the image";
  if (r == 1) return std::string(cols[c]) + " side of the image";
  return std::string(rows[r]) + " " + cols[c] + " part of the image";
}

inline std::string shape_word(const std::vector<SyntheticShape>& shapes) {
  if (shapes.size() > 1) return "several separate blobs";
  return shapes.front().kind == SyntheticShape::disk ? "round" : "rectangular";
}

}  // namespace detail

// Writes images/, masks/, manifest.csv and chat_script.json under `dir` and
// returns the manifest path. Output is a pure function of the spec.
inline std::filesystem::path generate_synthetic(const SyntheticSpec& spec,
                                                const std::filesystem::path& dir) {
  if (spec.n < 1) throw PreconditionError("synthetic dataset needs n >= 1");
  if (spec.width < 8 || spec.height < 8) throw PreconditionError("synthetic images must be at least 8x8");
  if (spec.noise < 0 || spec.noise > 72) throw PreconditionError("synthetic noise must be in [0,72]");
  if (spec.shapes < 1 && spec.fixed_shapes.empty()) throw PreconditionError("synthetic images need a shape");
  if (spec.channels != 1 && spec.channels != 3) throw PreconditionError("channels must be 1 or 3");
  if (!is_known_modality(spec.modality)) throw PreconditionError("unknown modality '" + spec.modality + "'");

  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  std::filesystem::create_directories(dir / "masks", ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  const auto manifest_path = dir / "manifest.csv";
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw Error("cannot write " + manifest_path.string());
  manifest << "# dataset: " << spec.dataset << "\n# declared_count: " << spec.n << "\n"
           << "sample_id,image,mask,modality,concept\n";
  nlohmann::json script = {{"entries", nlohmann::json::array()}};

  const int w = spec.width, h = spec.height, minside = std::min(w, h);
  for (int i = 0; i < spec.n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%04d", i);
    CounterRng rng(spec.seed, id, "synthetic");

    std::vector<SyntheticShape> shapes = spec.fixed_shapes;
    for (int k = 0; shapes.size() < static_cast<std::size_t>(spec.shapes) && spec.fixed_shapes.empty(); ++k) {
      SyntheticShape s;
      if (rng.uniform() < 0.5) {
        s.kind = SyntheticShape::disk;
        s.radius = rng.uniform_int(std::max(2, minside / 10), std::max(2, minside / 4));
        s.cx = rng.uniform_int(s.radius, w - 1 - s.radius);
        s.cy = rng.uniform_int(s.radius, h - 1 - s.radius);
      } else {
        s.kind = SyntheticShape::rect;
        const int rw = rng.uniform_int(std::max(2, w / 8), std::max(2, w / 3));
        const int rh = rng.uniform_int(std::max(2, h / 8), std::max(2, h / 3));
        s.x0 = rng.uniform_int(0, w - rw);
        s.y0 = rng.uniform_int(0, h - rh);
        s.x1 = s.x0 + rw;
        s.y1 = s.y0 + rh;
      }
      shapes.push_back(s);
    }

    const int fg_level = rng.uniform_int(200, 255);
    const int bg_level = rng.uniform_int(0, 50);
    BinaryMask gt(w, h);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * spec.channels);
    double sx = 0, sy = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool on = std::any_of(shapes.begin(), shapes.end(),
                                    [&](const SyntheticShape& s) { return s.covers(x, y); });
        if (on) {
          gt.set(x, y);
          sx += x;
          sy += y;
        }
        const int noise = spec.noise ? rng.uniform_int(-spec.noise, spec.noise) : 0;
        const auto v = static_cast<std::uint8_t>(std::clamp((on ? fg_level : bg_level) + noise, 0, 255));
        for (int c = 0; c < spec.channels; ++c) {
          px[(static_cast<std::size_t>(y) * w + x) * spec.channels + c] = v;
        }
      }
    }

    const std::string image_rel = std::string("images/") + id + ".png";
    const std::string mask_rel = std::string("masks/") + id + ".png";
    write_image(dir / image_rel, w, h, spec.channels, px);
    write_mask(dir / mask_rel, gt);
    manifest << csv::join({id, image_rel, mask_rel, spec.modality, spec.concept_name}) << "\n";

    const auto count = static_cast<double>(std::max<std::int64_t>(1, gt.count()));
    const std::string reply = "color: bright white\nshape: " + detail::shape_word(shapes) +
                              "\nlocation: " + detail::region_name(sx / count / w, sy / count / h);
    script["entries"].push_back({{"source_id", spec.dataset + "/" + id}, {"reply", reply}});
  }
  std::ofstream(dir / "chat_script.json", std::ios::binary) << script.dump(2) << "\n";
  if (!manifest) throw Error("cannot write " + manifest_path.string());
  return manifest_path;
}

}  // namespace tvseg
