#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aerodet/decode_fuse.hpp"
#include "aerodet/error.hpp"
#include "support/oracles.hpp"

using namespace aerodet;

namespace {

Detection det(double x, double y, double w, double h, int cat, double score) { return {{x, y, w, h}, cat, score}; }

// Exhaustive local-maximum scan used as the peak oracle.
std::vector<Peak> scan_peaks(const DenseGrid& g) {
  std::vector<Peak> out;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < g.channels(); ++c) {
        bool is_max = true;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= g.width() || ny >= g.height()) continue;
            is_max = is_max && g.at(nx, ny, c) <= g.at(x, y, c);
          }
        if (is_max) out.push_back({{x, y}, c, g.at(x, y, c)});
      }
  std::stable_sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.score > b.score; });
  return out;
}

}  // namespace

TEST(ExtractPeaks, SingleKernel) {
  DenseGrid g(20, 20, 1);
  draw_gaussian(g, 0, {7, 9}, 3);
  const auto p = extract_peaks(g, 100);
  ASSERT_FALSE(p.empty());
  EXPECT_EQ(p[0], (Peak{{7, 9}, 0, 1.0}));
  EXPECT_EQ(p[1].score, 0.0);  // zero plateau cells qualify with score 0
}

TEST(ExtractPeaks, ConstantChannelTakesScanOrder) {
  DenseGrid g(4, 3, 1, 0.5);
  const auto p = extract_peaks(g, 5);
  ASSERT_EQ(p.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(p[i].cell, (Cell{i % 4, i / 4}));
}

TEST(ExtractPeaks, MatchesExhaustiveScan) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DenseGrid g(13, 9, 3);
    for (int k = 0; k < 6; ++k)
      draw_gaussian(g, k % 3, {int(u(rng) * 13), int(u(rng) * 9)}, 1 + int(u(rng) * 3));
    for (double& v : g.data()) v *= 0.3 + 0.7 * u(rng) > 0.5 ? 1.0 : 0.9;
    const auto got = extract_peaks(g, 40);
    auto want = scan_peaks(g);
    want.resize(std::min<std::size_t>(40, want.size()));
    ASSERT_EQ(got, want);
  }
}

TEST(ExtractPeaks, TwoKernelsHigherFirst) {
  DenseGrid g(30, 30, 1);
  draw_gaussian(g, 0, {5, 5}, 2);
  draw_gaussian(g, 0, {20, 20}, 2);
  g.at(20, 20, 0) = 1.0;
  g.at(5, 5, 0) = 0.8;
  const auto p = extract_peaks(g, 2);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].cell, (Cell{20, 20}));
  EXPECT_EQ(p[1].cell, (Cell{5, 5}));
}

TEST(DecodeBoxes, Examples) {
  const LabelTree tree = visdrone_label_tree();
  const std::vector<Peak> peaks{{{30, 20}, 0, 0.9}, {{0, 0}, 1, 0.8}, {{3, 3}, 11, 0.7}, {{4, 4}, 2, 0.6}};
  const auto d = decode_boxes(peaks, {{24, 16}, {2, 2}, {10, 10}, {0, 5}}, {{0.25, 0.75}, {0, 0}, {0, 0}, {0, 0}}, 4, tree);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].bbox, (BBox{109, 75, 24, 16}));
  EXPECT_EQ(d[0].category, tree.class_at_channel(0));
  EXPECT_DOUBLE_EQ(d[0].score, 0.9);
  EXPECT_EQ(d[1].bbox, (BBox{-1, -1, 2, 2}));
}

TEST(ChipToGlobal, Examples) {
  const ChipOrigin o{"img", {600, 400}, {512, 512}, {2000, 1000}};
  const auto g = chip_to_global({det(10, 20, 50, 40, 1, 0.5)}, o);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].bbox, (BBox{610, 420, 50, 40}));
  const ChipOrigin zero{"img", {0, 0}, {512, 512}, {2000, 1000}};
  EXPECT_EQ(chip_to_global({det(10, 20, 50, 40, 1, 0.5)}, zero)[0].bbox, (BBox{10, 20, 50, 40}));
  const auto clipped = chip_to_global({det(480, 580, 40, 40, 1, 0.5)}, o);
  EXPECT_EQ(clipped[0].bbox, (BBox{1080, 980, 40, 20}));
  EXPECT_TRUE(chip_to_global({det(2000, 10, 5, 5, 1, 0.5)}, o).empty());
}

TEST(ChipToGlobal, InvertibleWithoutClipping) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const ChipOrigin o{"i", {std::floor(u(rng) * 1000), std::floor(u(rng) * 500)}, {512, 512}, {2000, 1200}};
    const Detection d = det(u(rng) * 400, u(rng) * 400, 1 + u(rng) * 100, 1 + u(rng) * 100, 1, u(rng));
    const auto g = chip_to_global({d}, o);
    ASSERT_EQ(g.size(), 1u);
    ASSERT_NEAR(g[0].bbox.x - o.offset.x, d.bbox.x, 1e-9);
    ASSERT_NEAR(g[0].bbox.y - o.offset.y, d.bbox.y, 1e-9);
    ASSERT_EQ(g[0].bbox.w, d.bbox.w);
  }
}

TEST(Nms, Examples) {
  EXPECT_EQ(nms({det(0, 0, 10, 10, 1, 0.8), det(0, 0, 10, 10, 1, 0.9)}, 0.5),
            (std::vector<Detection>{det(0, 0, 10, 10, 1, 0.9)}));
  EXPECT_EQ(nms({det(0, 0, 10, 10, 1, 0.9), det(0, 0, 10, 10, 2, 0.8)}, 0.5).size(), 2u);
  // Chain: iou(A,B) = iou(B,C) = 0.6 > 0.5, iou(A,C) = 0.25.
  const Detection a = det(0, 0, 10, 10, 1, 0.9), b = det(2.5, 0, 10, 10, 1, 0.8), c = det(5, 0, 10, 10, 1, 0.7);
  ASSERT_GT(iou(a.bbox, b.bbox), 0.5);
  ASSERT_LT(iou(a.bbox, c.bbox), 0.5);
  EXPECT_EQ(nms({c, b, a}, 0.5), (std::vector<Detection>{a, c}));
}

TEST(NmsProperty, IdempotentAndPairwiseBounded) {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 60; ++i) dets.push_back(det(u(rng) * 200, u(rng) * 200, 10 + u(rng) * 40, 10 + u(rng) * 40, 1 + i % 3, u(rng)));
    const auto kept = nms(dets, 0.4);
    ASSERT_EQ(nms(kept, 0.4), kept);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].category == kept[j].category) ASSERT_LE(iou(kept[i].bbox, kept[j].bbox), 0.4);
  }
}

TEST(ChipEdges, InteriorSidesOnly) {
  const std::vector<ChipOrigin> chips{{"i", {0, 0}, {512, 512}, {1000, 800}}, {"i", {488, 288}, {512, 512}, {1000, 800}}};
  const auto edges = chip_edges(chips, {1000, 800});
  EXPECT_EQ(edges.size(), 4u);
  EXPECT_NE(std::find(edges.begin(), edges.end(), ChipEdge{true, 512, 0, 512}), edges.end());
  EXPECT_NE(std::find(edges.begin(), edges.end(), ChipEdge{true, 488, 288, 800}), edges.end());
}

TEST(MergeSplitBoxes, Examples) {
  const std::vector<ChipEdge> edges{{true, 500, 0, 1000}};
  const FuseConfig cfg;
  const auto m = merge_split_boxes({det(460, 100, 40, 30, 1, 0.7), det(500, 100, 38, 30, 1, 0.9)}, edges, cfg);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].bbox, (BBox{460, 100, 78, 30}));
  EXPECT_DOUBLE_EQ(m[0].score, 0.9);
  EXPECT_EQ(merge_split_boxes({det(460, 100, 40, 30, 1, 0.7), det(500, 100, 38, 30, 2, 0.9)}, edges, cfg).size(), 2u);
  EXPECT_EQ(merge_split_boxes({det(460, 100, 40, 30, 1, 0.7), det(500, 200, 38, 30, 1, 0.9)}, edges, cfg).size(), 2u);
  EXPECT_EQ(merge_split_boxes({det(400, 100, 40, 30, 1, 0.7), det(500, 100, 38, 30, 1, 0.9)}, edges, cfg).size(), 2u);
}

TEST(MergeSplitBoxes, CroppedCopyMergesWithFullObject) {
  // Full object from the neighbouring chip overhangs the edge by less than delta.
  const std::vector<ChipEdge> edges{{true, 500, 0, 1000}};
  const auto m = merge_split_boxes({det(470, 100, 30, 30, 1, 1.0), det(470, 100, 31, 30, 1, 1.0)}, edges, {});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].bbox, (BBox{470, 100, 31, 30}));
}

TEST(MergeSplitBoxes, Transitive) {
  const std::vector<ChipEdge> edges{{true, 500, 0, 1000}, {true, 540, 0, 1000}};
  const auto m = merge_split_boxes(
      {det(460, 100, 40, 30, 1, 0.5), det(500, 100, 40, 30, 1, 0.6), det(540, 100, 20, 30, 1, 0.7)}, edges, {});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].bbox, (BBox{460, 100, 100, 30}));
}

TEST(Fuse, SingleChipEqualsNms) {
  const ChipOrigin o{"i", {0, 0}, {512, 512}, {512, 512}};
  const std::vector<Detection> d{det(10, 10, 20, 20, 1, 0.9), det(11, 10, 20, 20, 1, 0.8), det(100, 100, 5, 5, 2, 0.3)};
  EXPECT_EQ(fuse({{o, d}}, {}, {512, 512}, {}), nms(d, 0.5));
}

TEST(Fuse, DuplicateFromOverlappingChipsKeepsOne) {
  const ImageDims img{1000, 600};
  const ChipOrigin a{"i", {0, 0}, {512, 512}, img}, b{"i", {300, 0}, {512, 512}, img};
  const auto out = fuse({{a, {det(350, 50, 20, 20, 1, 0.9)}}, {b, {det(50, 50, 20, 20, 1, 0.85)}}}, {}, img, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].score, 0.9);
}

TEST(Fuse, CapKeepsHighestScores) {
  std::vector<Detection> g;
  for (int i = 0; i < 600; ++i) g.push_back(det((i % 30) * 30.0, (i / 30) * 30.0, 20, 20, 1, (i * 7919 % 600) / 600.0));
  const auto out = fuse({}, g, {1000, 1000}, {});
  ASSERT_EQ(out.size(), 500u);
  std::vector<double> scores;
  for (const auto& d : g) scores.push_back(d.score);
  std::sort(scores.rbegin(), scores.rend());
  for (std::size_t i = 0; i < 500; ++i) EXPECT_DOUBLE_EQ(out[i].score, scores[i]);
}

TEST(Fuse, OutputInsideImage) {
  const auto out = fuse({}, {det(-5, -5, 20, 20, 1, 0.5), det(990, 590, 30, 30, 1, 0.5)}, {1000, 600}, {});
  for (const auto& d : out) EXPECT_TRUE(contains(image_box({1000, 600}), d.bbox, 1e-9));
}

TEST(DetectionsJson, RoundTripAndCocoArray) {
  const std::vector<ImageDetections> images{{"a", {det(1, 2, 3, 4, 1, 0.5)}}, {"b", {}}};
  EXPECT_EQ(detections_from_json(detections_to_json(images)), images);
  const auto flat = detections_from_json(R"([{"image_id":"a","bbox":[1,2,3,4],"category_id":1,"score":0.5}])");
  ASSERT_EQ(flat.size(), 1u);
  EXPECT_EQ(flat[0], images[0]);
  EXPECT_THROW(detections_from_json("{\"images\": [{}]}"), DataError);
}

TEST(ChipResultsJson, RoundTrip) {
  ImageChipResults r{"x", {1000, 800}, {{{"x", {10, 20}, {512, 512}, {1000, 800}}, {det(1, 2, 3, 4, 5, 0.5)}}},
                     {det(100, 200, 300, 200, 6, 0.7)}};
  const auto back = chip_results_from_json(chip_results_to_json({r}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].dims, r.dims);
  ASSERT_EQ(back[0].chips.size(), 1u);
  EXPECT_EQ(back[0].chips[0].origin.offset, r.chips[0].origin.offset);
  EXPECT_EQ(back[0].chips[0].detections, r.chips[0].detections);
  EXPECT_EQ(back[0].global_dets, r.global_dets);
  EXPECT_EQ(fuse_image(back[0], {}), fuse_image(r, {}));
}

TEST(FuseConfig, Validation) {
  FuseConfig c;
  c.nms_iou = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_detections = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
