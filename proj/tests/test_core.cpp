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


#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support.hpp"
#include "tvseg/csv.hpp"
#include "tvseg/geom.hpp"
#include "tvseg/image.hpp"
#include "tvseg/image_io.hpp"
#include "tvseg/rng.hpp"

using namespace tvseg;
using tvseg::testing::rect_mask;

// ---- boxes -----------------------------------------------------------------

TEST(ScoredBox, RejectsDegenerateAndOutOfRangeScore) {
  EXPECT_THROW(ScoredBox(5, 0, 5, 10), InvalidArgument);
  EXPECT_THROW(ScoredBox(0, 7, 10, 3), InvalidArgument);
  EXPECT_THROW(ScoredBox(0, 0, 1, 1, 1.5), InvalidArgument);
  EXPECT_THROW(ScoredBox(0, 0, 1, 1, -0.1), InvalidArgument);
  EXPECT_EQ(ScoredBox(-3, -3, 2, 2).area(), 25);
}

TEST(Iou, AnalyticCases) {
  const ScoredBox a(0, 0, 10, 10);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, ScoredBox(20, 20, 30, 30)), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, ScoredBox(5, 0, 15, 10)), 50.0 / 150.0);
  // Touching edges share no pixels.
  EXPECT_DOUBLE_EQ(iou(a, ScoredBox(10, 0, 20, 10)), 0.0);
}

TEST(BoxSet, RankOrderAndDuplicates) {
  BoxSet s;
  EXPECT_TRUE(s.insert(ScoredBox(0, 0, 5, 5, 0.8)));   // area 25
  EXPECT_TRUE(s.insert(ScoredBox(0, 0, 10, 10, 0.8)));  // area 100
  EXPECT_TRUE(s.insert(ScoredBox(0, 0, 2, 2, 0.9)));
  EXPECT_TRUE(s.insert(ScoredBox(1, 1, 6, 6, 0.8)));   // area 25, inserted later
  EXPECT_FALSE(s.insert(ScoredBox(0, 0, 5, 5, 0.8)));
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], ScoredBox(0, 0, 2, 2, 0.9));
  EXPECT_EQ(s[1], ScoredBox(0, 0, 10, 10, 0.8));
  EXPECT_EQ(s[2], ScoredBox(0, 0, 5, 5, 0.8));
  EXPECT_EQ(s[3], ScoredBox(1, 1, 6, 6, 0.8));
  EXPECT_EQ(s.prefix(2).size(), 2u);
  EXPECT_EQ(s.prefix(10), s);
}

TEST(Nms, Examples) {
  EXPECT_TRUE(nms(BoxSet{}, 0.5).empty());
  const auto out = nms(BoxSet{ScoredBox(0, 0, 10, 10, 0.8), ScoredBox(0, 0, 10, 10, 0.9)}, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].score(), 0.9);
  // IoU exactly at the threshold is kept.
  const BoxSet pair{ScoredBox(0, 0, 10, 10, 0.9), ScoredBox(5, 0, 15, 10, 0.8)};
  EXPECT_EQ(nms(pair, 1.0 / 3.0).size(), 2u);
  EXPECT_EQ(nms(pair, 0.3).size(), 1u);
  EXPECT_EQ(nms(pair, 1.0).size(), 2u);
}

TEST(Nms, HandTracedThreeBoxChain) {
  // b overlaps a and c; a suppresses b, so c survives even though b would have removed it.
  const BoxSet s{ScoredBox(0, 0, 10, 10, 0.9), ScoredBox(4, 0, 14, 10, 0.8), ScoredBox(8, 0, 18, 10, 0.7)};
  const auto out = nms(s, 0.3);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].x_min(), 0);
  EXPECT_EQ(out[1].x_min(), 8);
}

TEST(Nms, MatchesReferenceOnRandomSets) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coord(0, 20), size(1, 10), count(0, 10), sc(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<tvseg::testing::RefBox> ref;
    BoxSet set;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const int x = coord(rng), y = coord(rng);
      tvseg::testing::RefBox b{x, y, x + size(rng), y + size(rng), sc(rng) / 4.0};
      ref.push_back(b);
      set.insert(ScoredBox(b.x0, b.y0, b.x1, b.y1, b.score));
    }
    for (double thr : {0.0, 0.3, 0.5, 0.9, 1.0}) {
      const auto got = nms(set, thr);
      const auto want = tvseg::testing::ref_nms(ref, thr);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(got[i], ScoredBox(want[i].x0, want[i].y0, want[i].x1, want[i].y1, want[i].score));
      }
    }
  }
}

// ---- masks -----------------------------------------------------------------

TEST(Dice, Examples) {
  const auto a = rect_mask(8, 8, 0, 0, 2, 2);
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, rect_mask(8, 8, 4, 4, 6, 6)), 0.0);
  EXPECT_DOUBLE_EQ(dice(a, rect_mask(8, 8, 1, 0, 3, 2)), 0.5);
  EXPECT_DOUBLE_EQ(dice(BinaryMask(8, 8), BinaryMask(8, 8)), 1.0);
  EXPECT_DOUBLE_EQ(dice(BinaryMask(8, 8), a), 0.0);
  EXPECT_THROW(dice(a, BinaryMask(8, 7)), ShapeError);
}

TEST(Dice, SymmetricAndBounded) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = tvseg::testing::random_mask(rng, 9, 7, 0.4);
    const auto b = tvseg::testing::random_mask(rng, 9, 7, 0.4);
    EXPECT_EQ(dice(a, b), dice(b, a));
    EXPECT_GE(dice(a, b), 0.0);
    EXPECT_LE(dice(a, b), 1.0);
  }
}

TEST(MaskToBbox, Examples) {
  BinaryMask one(10, 10);
  one.set(3, 7);
  EXPECT_EQ(mask_to_bbox(one, BoxMode::union_all)[0], ScoredBox(3, 7, 4, 8, 1.0));
  EXPECT_EQ(mask_to_bbox(rect_mask(10, 10, 0, 0, 10, 10), BoxMode::union_all)[0], ScoredBox(0, 0, 10, 10));

  auto two = rect_mask(10, 10, 0, 0, 2, 2);
  two.set(8, 8);
  two.set(9, 8);
  two.set(8, 9);
  two.set(9, 9);
  const auto per = mask_to_bbox(two, BoxMode::per_component);
  ASSERT_EQ(per.size(), 2u);
  EXPECT_EQ(per[0], ScoredBox(0, 0, 2, 2));
  EXPECT_EQ(per[1], ScoredBox(8, 8, 10, 10));
  const auto uni = mask_to_bbox(two, BoxMode::union_all);
  ASSERT_EQ(uni.size(), 1u);
  EXPECT_EQ(uni[0], ScoredBox(0, 0, 10, 10));

  EXPECT_THROW(mask_to_bbox(BinaryMask(4, 4), BoxMode::union_all), EmptyMaskError);
  EXPECT_THROW(mask_to_bbox(BinaryMask(4, 4), BoxMode::per_component), EmptyMaskError);
  EXPECT_EQ(box_mode_from_string("union"), BoxMode::union_all);
  EXPECT_THROW(box_mode_from_string("all"), InvalidArgument);
}

TEST(ConnectedComponents, Examples) {
  EXPECT_TRUE(connected_components(BinaryMask(5, 5)).empty());
  const auto blob = rect_mask(6, 6, 1, 1, 4, 5);
  const auto one = connected_components(blob);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], blob);

  BinaryMask checker(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      if ((x + y) % 2 == 0) checker.set(x, y);
  EXPECT_EQ(connected_components(checker).size(), 1u);
}

TEST(ConnectedComponents, OrderedByFirstPixelAndPartitionInput) {
  BinaryMask m(8, 4);
  m.set(6, 0);  // first in scan order
  m.set(1, 1);
  m.set(2, 2);  // diagonal neighbour of (1,1)
  m.set(7, 3);
  const auto comps = connected_components(m);
  ASSERT_EQ(comps.size(), 3u);
  EXPECT_TRUE(comps[0].at(6, 0));
  EXPECT_TRUE(comps[1].at(1, 1) && comps[1].at(2, 2));
  EXPECT_TRUE(comps[2].at(7, 3));

  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto r = tvseg::testing::random_mask(rng, 12, 9, 0.3);
    std::int64_t total = 0;
    for (const auto& c : connected_components(r)) {
      EXPECT_EQ(intersection_count(c, r), c.count());
      total += c.count();
    }
    EXPECT_EQ(total, r.count());
  }
}

TEST(Rle, Examples) {
  EXPECT_EQ(rle_encode(BinaryMask(2, 2)).runs, std::vector<std::uint32_t>{4});
  EXPECT_EQ(rle_encode(rect_mask(2, 2, 0, 0, 2, 2)).runs, (std::vector<std::uint32_t>{0, 4}));
  BinaryMask m(3, 1);
  m.set(1, 0);
  EXPECT_EQ(rle_encode(m).runs, (std::vector<std::uint32_t>{1, 1, 1}));
}

TEST(Rle, DecodeRejectsNonCanonical) {
  EXPECT_THROW(rle_decode(RleMask{2, 2, {3}}), DecodeError);
  EXPECT_THROW(rle_decode(RleMask{2, 2, {2, 0, 2}}), DecodeError);
  EXPECT_THROW(rle_decode(RleMask{0, 2, {}}), DecodeError);
  EXPECT_NO_THROW(rle_decode(RleMask{2, 2, {0, 1, 3}}));
}

TEST(Rle, RoundTripRandom) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 20);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto m = tvseg::testing::random_mask(rng, dim(rng), dim(rng), density(rng));
    EXPECT_EQ(rle_decode(rle_encode(m)), m);
  }
}

TEST(Rle, ClippedToBox) {
  const auto m = rect_mask(6, 6, 0, 0, 6, 6);
  EXPECT_EQ(m.clipped_to(ScoredBox(2, 2, 4, 5)).count(), 6);
  EXPECT_EQ(m.clipped_to(ScoredBox(-5, -5, 100, 100)).count(), 36);
}

// ---- images and files ------------------------------------------------------

TEST(Image, ValidationAndThreshold) {
  EXPECT_THROW(ImagePayload(2, 2, 2, std::vector<std::uint8_t>(8)), InvalidArgument);
  EXPECT_THROW(ImagePayload(2, 2, 1, std::vector<std::uint8_t>(3)), ShapeError);
  const ImagePayload rgb(2, 1, 3, {255, 255, 255, 10, 230, 10});
  EXPECT_EQ(rgb.intensity(0, 0), 255);
  const auto fg = threshold_mask(rgb, 128);
  EXPECT_TRUE(fg.at(0, 0));
  EXPECT_TRUE(fg.at(1, 0));  // green dominates luma
  EXPECT_FALSE(threshold_mask(rgb, 250).at(1, 0));
}

TEST(ImageIo, PngAndPnmRoundTrip) {
  tvseg::testing::TempDir dir("io");
  std::vector<std::uint8_t> px(5 * 3 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 7);
  for (const char* name : {"a.png", "a.ppm"}) {
    write_image(dir / name, 5, 3, 3, px);
    const auto img = read_image(dir / name, "x");
    EXPECT_EQ(img.width(), 5);
    EXPECT_EQ(img.channels(), 3);
    EXPECT_EQ(img.pixels(), px);
  }
  BinaryMask m(4, 3);
  m.set(1, 2);
  write_mask(dir / "m.png", m);
  write_mask(dir / "m.pgm", m);
  EXPECT_EQ(read_mask(dir / "m.png"), m);
  EXPECT_EQ(read_mask(dir / "m.pgm"), m);
  tvseg::testing::write_file(dir / "bad.png", "not a png");
  EXPECT_THROW(read_image(dir / "bad.png"), DecodeError);
  EXPECT_THROW(read_image(dir / "missing.png"), Error);
}

// ---- rng and csv -----------------------------------------------------------

TEST(CounterRng, KeyedStreamsAreIndependentOfCallOrder) {
  CounterRng a(1, "ds/s1", "detect"), b(1, "ds/s1", "detect");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  CounterRng c(1, "ds/s2", "detect"), d(2, "ds/s1", "detect"), e(1, "ds/s1", "auto");
  CounterRng f(1, "ds/s1", "detect");
  const auto first = f.next();
  EXPECT_NE(first, c.next());
  EXPECT_NE(first, d.next());
  EXPECT_NE(first, e.next());
}

TEST(CounterRng, RangesAndMoments) {
  CounterRng r(9, "x", "y");
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const int k = r.uniform_int(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Csv, QuotingRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::istringstream in(tvseg::csv::join(fields) + "\r\nnext\n");
  int line = 0;
  auto rec = tvseg::csv::read_record(in, line);
  ASSERT_TRUE(rec);
  EXPECT_EQ(*rec, fields);
  rec = tvseg::csv::read_record(in, line);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->front(), "next");
  EXPECT_FALSE(tvseg::csv::read_record(in, line));
  std::istringstream bad("\"open");
  EXPECT_THROW(tvseg::csv::read_record(bad, line), DecodeError);
}
