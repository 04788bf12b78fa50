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

// Shared fixtures and independent reference implementations. The references
// deliberately avoid the library's helpers so they can catch its mistakes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"

namespace tvseg::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tvseg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return BinaryMask(w, h, std::move(bits));
}

inline BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.set(x, y);
  return m;
}

// Dice from explicit pixel sets.
inline double ref_dice(const BinaryMask& a, const BinaryMask& b) {
  std::set<std::pair<int, int>> sa, sb;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (a.at(x, y)) sa.insert({x, y});
      if (b.at(x, y)) sb.insert({x, y});
    }
  std::vector<std::pair<int, int>> both;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  const auto total = sa.size() + sb.size();
  if (total == 0) return 1.0;
  return static_cast<double>(2 * both.size()) / static_cast<double>(total);
}

struct RefBox {
  int x0, y0, x1, y1;
  double score;
};

inline double ref_iou(const RefBox& a, const RefBox& b) {
  // Pixel counting on the overlap grid rather than interval arithmetic.
  long long inter = 0;
  for (int y = std::max(a.y0, b.y0); y < std::min(a.y1, b.y1); ++y)
    for (int x = std::max(a.x0, b.x0); x < std::min(a.x1, b.x1); ++x) ++inter;
  if (inter == 0) return 0.0;
  const long long aa = 1LL * (a.x1 - a.x0) * (a.y1 - a.y0);
  const long long ab = 1LL * (b.x1 - b.x0) * (b.y1 - b.y0);
  return static_cast<double>(inter) / static_cast<double>(aa + ab - inter);
}

// O(n^2) greedy suppression over an explicit ranking. `boxes` is in
// insertion order; exact duplicates after the first are ignored.
inline std::vector<RefBox> ref_nms(std::vector<RefBox> boxes, double thr) {
  std::vector<RefBox> uniq;
  for (const auto& b : boxes) {
    bool dup = false;
    for (const auto& u : uniq)
      dup = dup || (u.x0 == b.x0 && u.y0 == b.y0 && u.x1 == b.x1 && u.y1 == b.y1 && u.score == b.score);
    if (!dup) uniq.push_back(b);
  }
  std::vector<std::size_t> order(uniq.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto area = [](const RefBox& b) { return 1LL * (b.x1 - b.x0) * (b.y1 - b.y0); };
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (uniq[i].score != uniq[j].score) return uniq[i].score > uniq[j].score;
    if (area(uniq[i]) != area(uniq[j])) return area(uniq[i]) > area(uniq[j]);
    return i < j;
  });
  std::vector<bool> removed(uniq.size(), false);
  std::vector<RefBox> kept;
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (removed[order[a]]) continue;
    kept.push_back(uniq[order[a]]);
    for (std::size_t b = a + 1; b < order.size(); ++b)
      if (ref_iou(uniq[order[a]], uniq[order[b]]) > thr) removed[order[b]] = true;
  }
  return kept;
}

// Rescans the whole list for the best (dice, quality, -index) triple.
inline std::size_t ref_select_oracle(const std::vector<BinaryMask>& masks, const std::vector<double>& quality,
                                     const BinaryMask& gt) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    bool beats_all = true;
    for (std::size_t j = 0; j < masks.size(); ++j) {
      if (j == i) continue;
      const double di = ref_dice(masks[i], gt), dj = ref_dice(masks[j], gt);
      const bool j_better = dj > di || (dj == di && quality[j] > quality[i]) ||
                            (dj == di && quality[j] == quality[i] && j < i);
      if (j_better) {
        beats_all = false;
        break;
      }
    }
    if (beats_all) {
      best = i;
      break;
    }
  }
  return best;
}

inline ImagePayload gray_image(const BinaryMask& fg, std::string id, int on = 255, int off = 0) {
  std::vector<std::uint8_t> px(fg.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(fg.bits()[i] ? on : off);
  return ImagePayload(fg.width(), fg.height(), 1, std::move(px), std::move(id));
}

}  // namespace tvseg::testing
