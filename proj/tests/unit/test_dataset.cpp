#include <gtest/gtest.h>

#include <fstream>

#include "aerodet/dataset.hpp"
#include "aerodet/error.hpp"
#include "aerodet/label_tree.hpp"
#include "support/oracles.hpp"

using namespace aerodet;

TEST(LabelTree, VisdroneShape) {
  const LabelTree t = visdrone_label_tree();
  EXPECT_EQ(t.num_base(), 11u);
  EXPECT_EQ(t.num_stacked(), 3u);
  EXPECT_EQ(t.num_channels(), 14u);
}

TEST(LabelTree, VisdroneParents) {
  const LabelTree t = visdrone_label_tree();
  const int human = *t.id_of("human");
  const int vehicles = *t.id_of("vehicles");
  const int nmv = *t.id_of("non-motor-vehicles");
  EXPECT_EQ(t.parent_of(*t.id_of("pedestrian")), human);
  EXPECT_EQ(t.parent_of(*t.id_of("people")), human);
  for (const char* v : {"car", "van", "truck", "bus"}) {
    EXPECT_EQ(t.parent_of(*t.id_of(v)), vehicles) << v;
    EXPECT_NE(t.parent_of(*t.id_of(v)), human) << v;
  }
  for (const char* v : {"bicycle", "tricycle", "awning-tricycle", "motor"})
    EXPECT_EQ(t.parent_of(*t.id_of(v)), nmv) << v;
  EXPECT_FALSE(t.parent_of(*t.id_of("others")));
}

TEST(LabelTree, ChannelLayout) {
  const LabelTree t = visdrone_label_tree();
  for (int ch = 0; ch < static_cast<int>(t.num_channels()); ++ch)
    EXPECT_EQ(t.channel_of(t.class_at_channel(ch)), ch);
  EXPECT_FALSE(t.is_stacked_channel(10));
  EXPECT_TRUE(t.is_stacked_channel(11));
  EXPECT_THROW(t.class_at_channel(14), std::out_of_range);
}

TEST(LabelTree, IgnoreFlags) {
  EXPECT_TRUE(visdrone_label_tree().ignored(0));
  EXPECT_TRUE(visdrone_label_tree().ignored(11));
  EXPECT_FALSE(visdrone_label_tree(false).ignored(11));
  EXPECT_FALSE(visdrone_label_tree().ignored(4));
}

TEST(LabelTree, Uavdt) {
  const LabelTree t = uavdt_label_tree();
  EXPECT_EQ(t.num_base(), 3u);
  EXPECT_EQ(t.num_stacked(), 0u);
}

TEST(LabelTree, JsonRoundTrip) {
  oracle::TempDir dir("tree");
  const LabelTree t = visdrone_label_tree();
  save_label_tree(t, dir / "tree.json");
  EXPECT_EQ(load_label_tree(dir / "tree.json"), t);
}

TEST(LabelTree, RejectsBadDefinitions) {
  EXPECT_THROW(LabelTree({{1, "a"}, {1, "b"}}, {}, {}), std::exception);
  EXPECT_THROW(LabelTree({{1, "a"}}, {{2, "p"}}, {{1, 3}}), std::exception);
}

TEST(Visdrone, ParsesReferenceLine) {
  const auto a = parse_visdrone_line("684,8,273,116,0,4,0,0", visdrone_label_tree());
  ASSERT_TRUE(a);
  EXPECT_EQ(a->bbox, (BBox{684, 8, 273, 116}));
  EXPECT_EQ(a->category, 4);
  EXPECT_EQ(a->truncation, 0);
  EXPECT_FALSE(a->ignore);
}

TEST(Visdrone, TrailingCommaAccepted) {
  EXPECT_TRUE(parse_visdrone_line("1,2,3,4,1,1,0,0,", visdrone_label_tree()));
}

TEST(Visdrone, ZeroAreaDropped) {
  EXPECT_FALSE(parse_visdrone_line("1,2,0,4,1,1,0,0", visdrone_label_tree()));
}

TEST(Visdrone, SevenFieldsIsAnErrorNamingTheLine) {
  oracle::TempDir dir("vd");
  std::ofstream(dir / "x.txt") << "1,2,3,4,1,1,0,0\n1,2,3,4,1,1,0\n";
  try {
    load_visdrone_file(dir / "x.txt", {100, 100}, visdrone_label_tree());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x.txt:2"), std::string::npos) << e.what();
  }
}

TEST(Visdrone, UnknownCategoryIsAnError) {
  EXPECT_THROW(parse_visdrone_line("1,2,3,4,1,42,0,0", visdrone_label_tree()), DataError);
}

TEST(Visdrone, EmptyFileGivesEmptyRecord) {
  oracle::TempDir dir("vd");
  std::ofstream(dir / "e.txt").close();
  const auto r = load_visdrone_file(dir / "e.txt", {10, 10}, visdrone_label_tree());
  EXPECT_EQ(r.image_id, "e");
  EXPECT_TRUE(r.annotations.empty());
}

TEST(Visdrone, FixtureDirectory) {
  const auto recs = load_visdrone(oracle::fixture("visdrone"), visdrone_label_tree());
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].image_id, "0000001_00000_d_0000001");
  EXPECT_EQ(recs[0].dims, (ImageDims{1360, 765}));
  // 14 lines, one zero-area.
  EXPECT_EQ(recs[0].annotations.size(), 13u);
  // Box at (1320,700,60,80) is clipped to the 1360x765 image.
  EXPECT_EQ(recs[0].annotations[10].bbox, (BBox{1320, 700, 40, 65}));
  EXPECT_TRUE(recs[0].annotations[11].ignore);  // ignored region
  EXPECT_TRUE(recs[0].annotations[12].ignore);  // others
  EXPECT_EQ(recs[1].annotations.size(), 5u);
  EXPECT_TRUE(recs[2].annotations.empty());
}

TEST(Visdrone, MissingSizesIsAnError) {
  oracle::TempDir dir("vd");
  std::ofstream(dir / "a.txt") << "1,2,3,4,1,1,0,0\n";
  EXPECT_THROW(load_visdrone(dir.path(), visdrone_label_tree()), DataError);
}

TEST(Coco, FixtureMatchesVisdrone) {
  const LabelTree t = visdrone_label_tree();
  EXPECT_EQ(load_coco(oracle::fixture("visdrone_coco.json"), t), load_visdrone(oracle::fixture("visdrone"), t));
}

TEST(Coco, MinimalDocument) {
  const auto recs = parse_coco(
      R"({"images":[{"id":7,"file_name":"img/a.jpg","width":100,"height":50}],
          "annotations":[{"id":1,"image_id":7,"category_id":4,"bbox":[1,2,3,4]}]})",
      visdrone_label_tree());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].image_id, "a");
  EXPECT_EQ(recs[0].path, "img/a.jpg");
  ASSERT_EQ(recs[0].annotations.size(), 1u);
  EXPECT_EQ(recs[0].annotations[0].bbox, (BBox{1, 2, 3, 4}));
}

TEST(Coco, AnnotationForMissingImage) {
  EXPECT_THROW(parse_coco(R"({"images":[{"id":1,"width":10,"height":10}],
                              "annotations":[{"id":1,"image_id":2,"category_id":4,"bbox":[1,2,3,4]}]})",
                          visdrone_label_tree()),
               DataError);
}

TEST(Coco, RoundTripIsLossless) {
  const LabelTree t = visdrone_label_tree();
  auto recs = load_visdrone(oracle::fixture("visdrone"), t);
  recs[1].path = "images/second.jpg";
  EXPECT_EQ(parse_coco(to_coco(recs, t), t), recs);
  oracle::TempDir dir("coco");
  save_coco(recs, t, dir / "out.json");
  EXPECT_EQ(load_coco(dir / "out.json", t), recs);
}

TEST(Coco, RoundTripRandomRecords) {
  const LabelTree t = visdrone_label_tree();
  std::mt19937_64 rng(5);
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 20; ++i) {
    ImageRecord r{"img" + std::to_string(i), {640, 480}, std::nullopt,
                  oracle::random_annotations(rng, {640, 480}, i * 5)};
    for (auto& a : r.annotations) a.ignore = t.ignored(a.category) || a.ignore;
    recs.push_back(r);
  }
  EXPECT_EQ(parse_coco(to_coco(recs, t), t), recs);
}

TEST(Coco, LoadingIsDeterministic) {
  const LabelTree t = visdrone_label_tree();
  EXPECT_EQ(load_visdrone(oracle::fixture("visdrone"), t), load_visdrone(oracle::fixture("visdrone"), t));
}
