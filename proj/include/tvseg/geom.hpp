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

// Boxes, masks and the pure kernels over them: IoU, Dice, NMS, components,
// mask-to-box derivation and run-length coding. No I/O lives here.
//
// Pixel coordinates are half-open everywhere: a box (x0, y0, x1, y1) covers
// columns x0..x1-1 and rows y0..y1-1, so its area is (x1 - x0) * (y1 - y0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvseg/error.hpp"

namespace tvseg {

class ScoredBox {
 public:
  ScoredBox(int x_min, int y_min, int x_max, int y_max, double score = 1.0,
            std::string phrase = {})
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max),
        score_(score), phrase_(std::move(phrase)) {
    if (x_min_ >= x_max_ || y_min_ >= y_max_) {
      throw InvalidArgument("degenerate box (" + std::to_string(x_min_) + "," +
                            std::to_string(y_min_) + "," + std::to_string(x_max_) +
                            "," + std::to_string(y_max_) + ")");
    }
    if (!(score_ >= 0.0 && score_ <= 1.0)) {
      throw InvalidArgument("box score outside [0,1]");
    }
  }

  int x_min() const noexcept { return x_min_; }
  int y_min() const noexcept { return y_min_; }
  int x_max() const noexcept { return x_max_; }
  int y_max() const noexcept { return y_max_; }
  double score() const noexcept { return score_; }
  const std::string& phrase() const noexcept { return phrase_; }

  std::int64_t width() const noexcept { return std::int64_t{x_max_} - x_min_; }
  std::int64_t height() const noexcept { return std::int64_t{y_max_} - y_min_; }
  std::int64_t area() const noexcept { return width() * height(); }

  bool contains(int x, int y) const noexcept {
    return x >= x_min_ && x < x_max_ && y >= y_min_ && y < y_max_;
  }

  bool contains(const ScoredBox& other) const noexcept {
    return other.x_min_ >= x_min_ && other.y_min_ >= y_min_ &&
           other.x_max_ <= x_max_ && other.y_max_ <= y_max_;
  }

  ScoredBox with_score(double score) const {
    return ScoredBox(x_min_, y_min_, x_max_, y_max_, score, phrase_);
  }

  ScoredBox with_phrase(std::string phrase) const {
    return ScoredBox(x_min_, y_min_, x_max_, y_max_, score_, std::move(phrase));
  }

  // Bitwise identity of coordinates, score and phrase.
  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;

 private:
  int x_min_;
  int y_min_;
  int x_max_;
  int y_max_;
  double score_;
  std::string phrase_;
};

// Intersection of two boxes, or nothing when they do not overlap.
inline std::int64_t intersection_area(const ScoredBox& a, const ScoredBox& b) noexcept {
  const std::int64_t w =
      std::int64_t{std::min(a.x_max(), b.x_max())} - std::max(a.x_min(), b.x_min());
  const std::int64_t h =
      std::int64_t{std::min(a.y_max(), b.y_max())} - std::max(a.y_min(), b.y_min());
  return (w > 0 && h > 0) ? w * h : 0;
}

inline double iou(const ScoredBox& a, const ScoredBox& b) noexcept {
  const std::int64_t inter = intersection_area(a, b);
  if (inter == 0) return 0.0;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Boxes kept in rank order: score descending, then area descending, then the
// order in which they were inserted. Bitwise duplicates are refused.
class BoxSet {
 public:
  BoxSet() = default;

  explicit BoxSet(std::span<const ScoredBox> boxes) {
    for (const auto& b : boxes) insert(b);
  }

  BoxSet(std::initializer_list<ScoredBox> boxes)
      : BoxSet(std::span<const ScoredBox>(boxes.begin(), boxes.size())) {}

  // Returns false (and leaves the set unchanged) for a bitwise duplicate.
  bool insert(const ScoredBox& box) {
    for (const auto& e : entries_) {
      if (e.box == box) return false;
    }
    Entry entry{box, next_seq_++};
    auto pos = std::upper_bound(entries_.begin(), entries_.end(), entry, ranks_before);
    entries_.insert(pos, std::move(entry));
    return true;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const ScoredBox& operator[](std::size_t i) const { return entries_.at(i).box; }
  const ScoredBox& front() const { return entries_.at(0).box; }

  std::vector<ScoredBox> boxes() const {
    std::vector<ScoredBox> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.box);
    return out;
  }

  // The first min(n, size()) boxes, still in rank order.
  BoxSet prefix(std::size_t n) const {
    BoxSet out;
    for (std::size_t i = 0; i < std::min(n, entries_.size()); ++i) out.insert(entries_[i].box);
    return out;
  }

  friend bool operator==(const BoxSet& a, const BoxSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i] == b[i])) return false;
    }
    return true;
  }

  class const_iterator {
   public:
    using iterator_category = std::random_access_iterator_tag;
    using value_type = ScoredBox;
    using difference_type = std::ptrdiff_t;
    using pointer = const ScoredBox*;
    using reference = const ScoredBox&;

    const_iterator() = default;
    reference operator*() const { return (*set_)[i_]; }
    pointer operator->() const { return &(*set_)[i_]; }
    const_iterator& operator++() { ++i_; return *this; }
    const_iterator operator++(int) { auto t = *this; ++i_; return t; }
    bool operator==(const const_iterator& o) const { return i_ == o.i_; }

   private:
    friend class BoxSet;
    const_iterator(const BoxSet* s, std::size_t i) : set_(s), i_(i) {}
    const BoxSet* set_ = nullptr;
    std::size_t i_ = 0;
  };

  const_iterator begin() const { return {this, 0}; }
  const_iterator end() const { return {this, entries_.size()}; }

 private:
  struct Entry {
    ScoredBox box;
    std::uint64_t seq;
  };

  static bool ranks_before(const Entry& a, const Entry& b) {
    if (a.box.score() != b.box.score()) return a.box.score() > b.box.score();
    if (a.box.area() != b.box.area()) return a.box.area() > b.box.area();
    return a.seq < b.seq;
  }

  std::vector<Entry> entries_;
  std::uint64_t next_seq_ = 0;
};

class BinaryMask {
 public:
  BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }

  // `bits` is row-major; any nonzero byte is foreground.
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("mask dimensions must be positive");
    if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ShapeError("mask bitmap length " + std::to_string(bits_.size()) +
                       " does not match " + std::to_string(width) + "x" +
                       std::to_string(height));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool on = true) { bits_[index(x, y)] = on ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::int64_t count() const noexcept {
    return static_cast<std::int64_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }

  bool same_shape(const BinaryMask& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  // Keep only the pixels inside `box` (clipped to the mask).
  BinaryMask clipped_to(const ScoredBox& box) const {
    BinaryMask out(width_, height_);
    const int x0 = std::max(box.x_min(), 0), x1 = std::min(box.x_max(), width_);
    const int y0 = std::max(box.y_min(), 0), y1 = std::min(box.y_max(), height_);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) out.bits_[index(x, y)] = bits_[index(x, y)];
    }
    return out;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

inline std::int64_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("mask shapes differ: " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                     "x" + std::to_string(b.height()));
  }
  const auto x = a.bits();
  const auto y = b.bits();
  std::int64_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += x[i] & y[i];
  return n;
}

// 2|m ∩ gt| / (|m| + |gt|). Two empty masks agree perfectly and score 1.
inline double dice(const BinaryMask& m, const BinaryMask& gt) {
  const std::int64_t inter = intersection_count(m, gt);
  const std::int64_t total = m.count() + gt.count();
  if (total == 0) return 1.0;
  return static_cast<double>(2 * inter) / static_cast<double>(total);
}

// Greedy suppression in BoxSet rank order: a box is discarded when its IoU
// with an already kept box exceeds `iou_threshold`.
inline BoxSet nms(const BoxSet& candidates, double iou_threshold) {
  BoxSet kept;
  std::vector<ScoredBox> kept_list;
  for (const auto& box : candidates) {
    bool suppressed = false;
    for (const auto& k : kept_list) {
      if (iou(k, box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept_list.push_back(box);
      kept.insert(box);
    }
  }
  return kept;
}

// 8-connected foreground components, ordered by their first pixel in
// row-major scan order. Each component is returned as a full-size mask.
inline std::vector<BinaryMask> connected_components(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  std::vector<std::int32_t> label(m.size(), -1);
  std::vector<BinaryMask> out;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto seed = static_cast<std::size_t>(y) * w + x;
      if (!m.at(x, y) || label[seed] >= 0) continue;
      const auto id = static_cast<std::int32_t>(out.size());
      BinaryMask comp(w, h);
      label[seed] = id;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        comp.set(cx, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto ni = static_cast<std::size_t>(ny) * w + nx;
            if (label[ni] >= 0 || !m.at(nx, ny)) continue;
            label[ni] = id;
            queue.emplace_back(nx, ny);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

enum class BoxMode { union_all, per_component };

inline const char* to_string(BoxMode mode) {
  return mode == BoxMode::union_all ? "union" : "per_component";
}

inline BoxMode box_mode_from_string(const std::string& s) {
  if (s == "union") return BoxMode::union_all;
  if (s == "per_component") return BoxMode::per_component;
  throw InvalidArgument("unknown box mode '" + s + "' (expected union or per_component)");
}

namespace detail {
inline ScoredBox tight_box(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw EmptyMaskError("mask has no foreground pixels");
  return ScoredBox(x0, y0, x1 + 1, y1 + 1, 1.0);
}
}  // namespace detail

// Tight box(es) around the foreground, each with score 1.
inline BoxSet mask_to_bbox(const BinaryMask& m, BoxMode mode) {
  BoxSet out;
  if (mode == BoxMode::union_all) {
    out.insert(detail::tight_box(m));
    return out;
  }
  const auto comps = connected_components(m);
  if (comps.empty()) throw EmptyMaskError("mask has no foreground pixels");
  for (const auto& c : comps) out.insert(detail::tight_box(c));
  return out;
}

// Alternating background/foreground run lengths, starting with background,
// in row-major order. Only the leading run may be zero.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& m) {
  RleMask r{m.width(), m.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto bit : m.bits()) {
    if (bit != current) {
      r.runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  r.runs.push_back(run);
  return r;
}

inline BinaryMask rle_decode(const RleMask& r) {
  if (r.width <= 0 || r.height <= 0) throw DecodeError("RLE mask dimensions must be positive");
  const auto total = static_cast<std::uint64_t>(r.width) * static_cast<std::uint64_t>(r.height);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    if (r.runs[i] == 0 && i != 0) throw DecodeError("RLE run " + std::to_string(i) + " is zero");
    sum += r.runs[i];
  }
  if (sum != total) {
    throw DecodeError("RLE runs sum to " + std::to_string(sum) + ", expected " +
                      std::to_string(total));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    bits.insert(bits.end(), r.runs[i], static_cast<std::uint8_t>(i % 2));
  }
  return BinaryMask(r.width, r.height, std::move(bits));
}

}  // namespace tvseg
