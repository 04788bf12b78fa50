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

#include "support.hpp"
#include "tvseg/grounding.hpp"
#include "tvseg/mocks.hpp"
#include "tvseg/pipeline.hpp"
#include "tvseg/prompting.hpp"
#include "tvseg/segmenting.hpp"

using namespace tvseg;
using tvseg::testing::rect_mask;

// ---- prompting -------------------------------------------------------------

TEST(BuildDialog, DefaultTemplate) {
  const auto reg = TemplateRegistry::with_defaults();
  const ConceptQuery q{"polyp", "Endoscopy"};
  const auto d = build_dialog(q, "default", reg);
  EXPECT_NE(d.find("polyp"), std::string::npos);
  EXPECT_NE(d.find("Endoscopy"), std::string::npos);
  for (const char* field : {"color:", "shape:", "location:"}) EXPECT_NE(d.find(field), std::string::npos);
  EXPECT_EQ(d, build_dialog(q, "default", reg));
  EXPECT_THROW(build_dialog({" ", "CT"}, "default", reg), PreconditionError);
  EXPECT_THROW(build_dialog(q, "missing", reg), TemplateError);
}

struct ParseCase {
  const char* reply;
  std::optional<std::string> color, shape, location;
};

class ParseAttributes : public ::testing::TestWithParam<ParseCase> {};

TEST_P(ParseAttributes, Table) {
  const auto& c = GetParam();
  const auto a = parse_attributes(c.reply);
  EXPECT_EQ(a.color, c.color);
  EXPECT_EQ(a.shape, c.shape);
  EXPECT_EQ(a.location, c.location);
  EXPECT_EQ(a.raw_reply, c.reply);
}

INSTANTIATE_TEST_SUITE_P(
    Replies, ParseAttributes,
    ::testing::Values(
        ParseCase{"color: dark brown\nshape: irregular oval\nlocation: central region of the skin", "dark brown",
                  "irregular oval", "central region of the skin"},
        ParseCase{"Color: red\ncolor: blue\nshape: round", "red", "round", std::nullopt},
        ParseCase{"- **Color:** pink.\n2) Shape: flat;\n* LOCATION: lower left", "pink", "flat", "lower left"},
        ParseCase{"## colour: grey\n\xE2\x80\xA2 shape: ring", "grey", "ring", std::nullopt},
        ParseCase{"I cannot help with that.", std::nullopt, std::nullopt, std::nullopt},
        ParseCase{"color:\nshape:   \nlocation: top", std::nullopt, std::nullopt, "top"},
        ParseCase{"texture: smooth\nsize: small", std::nullopt, std::nullopt, std::nullopt},
        ParseCase{"color: snake_case_value\r\nshape: x", "snake_case_value", "x", std::nullopt}));

TEST(RenderPrompt, DefaultTemplate) {
  const auto reg = TemplateRegistry::with_defaults();
  AttributeSet full{"dark brown", "irregular oval", "the center", ""};
  EXPECT_EQ(render_prompt(full, {"melanoma", "Dermoscopy"}, "default", reg).text,
            "dark brown irregular oval melanoma located at the center");
  EXPECT_EQ(render_prompt(AttributeSet{}, {" polyp ", "Endoscopy"}, "default", reg).text, "polyp");
  AttributeSet shape_only{std::nullopt, "round", std::nullopt, ""};
  EXPECT_EQ(render_prompt(shape_only, {"cell", "Microscopy"}, "default", reg).text, "round cell");
  EXPECT_THROW(render_prompt(full, {"", "CT"}, "default", reg), PreconditionError);
}

TEST(TemplateRegistry, ValidationAndDirectoryLoading) {
  auto reg = TemplateRegistry::with_defaults();
  EXPECT_THROW(reg.add(TemplateKind::prompt, "x", "{color} thing"), TemplateError);
  EXPECT_THROW(reg.add(TemplateKind::prompt, "x", "{concept} {size}"), TemplateError);
  EXPECT_THROW(reg.add(TemplateKind::prompt, "x", "[[{color}]] {concept}"), TemplateError);
  EXPECT_THROW(reg.add(TemplateKind::prompt, "x", "{concept"), TemplateError);
  reg.add(TemplateKind::prompt, "terse", "{concept}[ ({shape})]");
  AttributeSet attrs{"red", std::nullopt, std::nullopt, ""};
  EXPECT_EQ(render_prompt(attrs, {"lesion", "CT"}, "terse", reg).text, "lesion");

  tvseg::testing::TempDir dir("tpl");
  tvseg::testing::write_file(dir / "prompt/loc.txt", "{concept} at {location}\n");
  tvseg::testing::write_file(dir / "dialog/short.txt", "Describe the {concept}.");
  reg.load_directory(dir.path());
  EXPECT_TRUE(reg.contains(TemplateKind::prompt, "loc"));
  EXPECT_EQ(build_dialog({"cyst", "CT"}, "short", reg), "Describe the cyst.");
  tvseg::testing::write_file(dir / "prompt/bad.txt", "no concept here");
  EXPECT_THROW(reg.load_directory(dir.path()), TemplateError);
  EXPECT_THROW(reg.load_directory(dir / "missing"), TemplateError);
}

TEST(Templates, ShippedDefaultsMatchBuiltIns) {
  auto reg = TemplateRegistry{};
  reg.load_directory(TVSEG_SOURCE_DIR "/templates");
  const auto builtin = TemplateRegistry::with_defaults();
  EXPECT_EQ(reg.get(TemplateKind::dialog, "default"), builtin.get(TemplateKind::dialog, "default"));
  EXPECT_EQ(reg.get(TemplateKind::prompt, "default"), builtin.get(TemplateKind::prompt, "default"));
}

// ---- grounding -------------------------------------------------------------

namespace {
struct FixedDetector : DetectorBackend {
  BoxSet boxes;
  Detection detect(const ImagePayload&, const std::string&) const override { return {boxes, 0}; }
  std::string id() const override { return "fixed"; }
};
}  // namespace

TEST(GroundConcept, NmsThenConfidence) {
  const ImagePayload img(40, 40, 1, std::vector<std::uint8_t>(1600));
  const DescriptivePrompt prompt{"lesion", {}, "default"};
  FixedDetector det;
  det.boxes = BoxSet{ScoredBox(0, 0, 10, 10, 0.9), ScoredBox(0, 0, 10, 10, 0.8)};
  auto out = ground_concept(img, prompt, det, {0.5, 0.5, 10});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].score(), 0.9);

  det.boxes = BoxSet{ScoredBox(0, 0, 10, 10, 0.9), ScoredBox(20, 20, 30, 30, 0.4)};
  out = ground_concept(img, prompt, det, {0.5, 0.5, 10});
  ASSERT_EQ(out.size(), 1u);
  // Exactly at the threshold passes.
  det.boxes = BoxSet{ScoredBox(20, 20, 30, 30, 0.5)};
  EXPECT_EQ(ground_concept(img, prompt, det, {0.5, 0.5, 10}).size(), 1u);

  EXPECT_THROW(ground_concept(img, {"", {}, ""}, det, {}), PreconditionError);
  EXPECT_THROW(ground_concept(img, prompt, det, {1.5, 0.5, 10}), ConfigError);
  EXPECT_THROW(ground_concept(img, prompt, det, {0.5, 0.5, 0}), ConfigError);
}

TEST(GroundConcept, PerfectOracle) {
  const auto gt = rect_mask(30, 30, 4, 5, 17, 12);
  auto truth = std::make_shared<MapTruth>();
  truth->add("d/x", gt, "lesion");
  OracleDetector det(1, {}, truth);
  const auto img = tvseg::testing::gray_image(gt, "d/x");
  for (double thr : {0.0, 0.5, 1.0}) {
    const auto out = ground_concept(img, {"lesion", {}, ""}, det, {thr, thr, 10});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].x_min(), 4);
    EXPECT_EQ(out[0].y_min(), 5);
    EXPECT_EQ(out[0].x_max(), 17);
    EXPECT_EQ(out[0].y_max(), 12);
    EXPECT_DOUBLE_EQ(out[0].score(), 1.0);
  }
}

TEST(SelectTopK, Examples) {
  const BoxSet three{ScoredBox(0, 0, 1, 1, 0.9), ScoredBox(0, 0, 1, 1, 0.8), ScoredBox(0, 0, 1, 1, 0.7)};
  EXPECT_EQ(select_top_k(three, 10).size(), 3u);
  const auto two = select_top_k(three, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(two[0].score(), 0.9);
  EXPECT_DOUBLE_EQ(two[1].score(), 0.8);
  const BoxSet tie{ScoredBox(0, 0, 5, 10, 0.8), ScoredBox(0, 0, 10, 10, 0.8)};
  EXPECT_EQ(select_top_k(tie, 1)[0].area(), 100);
  EXPECT_THROW(select_top_k(three, 0), PreconditionError);
}

// ---- selection -------------------------------------------------------------

TEST(SelectMask, Examples) {
  const auto gt = rect_mask(10, 10, 0, 0, 10, 10);
  const std::vector<ScoredMaskCandidate> one{{rect_mask(10, 10, 0, 0, 2, 2), 0.1, std::nullopt, 0}};
  EXPECT_EQ(select_mask_index(one, {SelectionKind::oracle_dice}, gt), 0u);
  EXPECT_EQ(select_mask_index(one, {SelectionKind::predicted_quality}, std::nullopt), 0u);

  // Dice vs gt of 0.3, 0.9 and 0.5 (areas 18, 82, 33 of 100).
  auto area_mask = [](int n) {
    BinaryMask m(10, 10);
    for (int i = 0; i < n; ++i) m.set(i % 10, i / 10);
    return m;
  };
  std::vector<ScoredMaskCandidate> three{{area_mask(18), 0.9, std::nullopt, 0},
                                         {area_mask(82), 0.1, std::nullopt, 1},
                                         {area_mask(33), 0.5, std::nullopt, 2}};
  EXPECT_NEAR(dice(three[0].mask, gt), 36.0 / 118.0, 1e-15);
  EXPECT_EQ(select_mask_index(three, {SelectionKind::oracle_dice}, gt), 1u);
  EXPECT_EQ(select_mask_index(three, {SelectionKind::predicted_quality}, std::nullopt), 0u);

  EXPECT_THROW(select_mask_index({}, {SelectionKind::predicted_quality}, std::nullopt), PreconditionError);
  EXPECT_THROW(select_mask_index(three, {SelectionKind::oracle_dice}, std::nullopt), PreconditionError);
}

TEST(SelectMask, TieBreaks) {
  const auto gt = rect_mask(6, 6, 0, 0, 3, 3);
  const auto m = rect_mask(6, 6, 0, 0, 2, 2);
  std::vector<ScoredMaskCandidate> c{{m, 0.4, std::nullopt, 0}, {m, 0.6, std::nullopt, 1}, {m, 0.6, std::nullopt, 2}};
  EXPECT_EQ(select_mask_index(c, {SelectionKind::oracle_dice}, gt), 1u);
  EXPECT_EQ(select_mask_index(c, {SelectionKind::predicted_quality}, std::nullopt), 1u);
}

TEST(SelectMask, MatchesExhaustiveReference) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> count(1, 8), qual(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = tvseg::testing::random_mask(rng, 8, 8, 0.4);
    std::vector<ScoredMaskCandidate> cands;
    std::vector<BinaryMask> masks;
    std::vector<double> q;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      // Coarse densities make equal-Dice ties common.
      auto m = tvseg::testing::random_mask(rng, 8, 8, (i % 3) * 0.3);
      const double quality = qual(rng) / 3.0;
      masks.push_back(m);
      q.push_back(quality);
      cands.push_back({std::move(m), quality, std::nullopt, std::nullopt});
    }
    ASSERT_EQ(select_mask_index(cands, {SelectionKind::oracle_dice}, gt),
              tvseg::testing::ref_select_oracle(masks, q, gt));
  }
}

TEST(TopK, OracleBestWithinPrefixIsMonotone) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = tvseg::testing::random_mask(rng, 8, 8, 0.5);
    std::vector<ScoredMaskCandidate> pool;
    for (std::size_t i = 0; i < 12; ++i) {
      pool.push_back({tvseg::testing::random_mask(rng, 8, 8, 0.5), 0.5, std::nullopt, i});
    }
    std::optional<double> prev;
    for (std::size_t k : {1, 2, 3, 5, 10}) {
      const auto best = best_dice_within_top_k(pool, k, gt);
      ASSERT_TRUE(best);
      if (prev) EXPECT_GE(*best, *prev);
      prev = best;
    }
  }
}
