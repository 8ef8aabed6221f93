#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "sadse/workload.hpp"

using namespace sadse;

TEST(MakeMm, HeadlineAndValidationSizes) {
  auto w = make_mm(1024, 1024, 1024);
  EXPECT_EQ(w.kind, WorkloadKind::MM);
  ASSERT_EQ(w.num_loops(), 3u);
  EXPECT_EQ(w.dims_string(), "1024,1024,1024");
  EXPECT_EQ(make_mm(64, 64, 64).iterations(), 64 * 64 * 64);
  EXPECT_EQ(make_mm(1, 1, 1).iterations(), 1);
}

TEST(MakeMm, DependenceMetadata) {
  auto w = make_mm(8, 8, 8);
  ASSERT_EQ(w.arrays.size(), 3u);
  auto i = w.loop_id("i"), j = w.loop_id("j"), k = w.loop_id("k");
  EXPECT_EQ(w.array("A").carried_read, LoopSet{j});
  EXPECT_EQ(w.array("B").carried_read, LoopSet{i});
  EXPECT_EQ(w.array("C").carried_flow, LoopSet{k});
  EXPECT_TRUE(w.array("C").is_output());
  EXPECT_FALSE(w.array("A").is_output());
  EXPECT_EQ(w.simd_loop, k);
  EXPECT_EQ(w.parallel_loops(), (LoopSet{i, j}));
}

TEST(MakeMm, RejectsNonPositiveExtent) {
  EXPECT_THROW(make_mm(0, 4, 4), ValidationError);
  EXPECT_THROW(make_mm(4, -1, 4), ValidationError);
}

TEST(MakeCnn, ValidationAndVggLayers) {
  auto w = make_cnn(16, 16, 16, 16, 3, 3);
  EXPECT_EQ(w.kind, WorkloadKind::CNN);
  ASSERT_EQ(w.num_loops(), 6u);
  EXPECT_EQ(make_cnn(3, 64, 224, 224, 3, 3).dims_string(), "3,64,224,224,3,3");
  EXPECT_EQ(make_cnn(64, 64, 224, 224, 3, 3).iterations(), 64LL * 64 * 224 * 224 * 9);
  EXPECT_THROW(make_cnn(1, 1, 1, 1, 0, 1), ValidationError);
}

TEST(MakeCnn, DependenceMetadata) {
  auto w = make_cnn(4, 4, 4, 4, 3, 3);
  LoopSet flow{w.loop_id("i"), w.loop_id("p"), w.loop_id("q")};
  EXPECT_EQ(w.array("fo").carried_flow, flow);
  EXPECT_EQ(w.array("weights").carried_read, (LoopSet{w.loop_id("h"), w.loop_id("w")}));
  EXPECT_EQ(w.array("fi").carried_read, LoopSet{w.loop_id("o")});
  EXPECT_EQ(w.simd_loop, w.loop_id("i"));
}

TEST(MakeCnn, InputHaloFootprint) {
  auto w = make_cnn(8, 8, 16, 16, 3, 3);
  // tiles: i=4 o=2 h=5 w=6 p=3 q=3
  std::vector<std::int64_t> t{4, 2, 5, 6, 3, 3};
  EXPECT_EQ(w.array("fi").tile_footprint(t), 4 * (5 + 3 - 1) * (6 + 3 - 1));
  EXPECT_EQ(w.array("weights").tile_footprint(t), 2 * 4 * 3 * 3);
  EXPECT_EQ(w.array("fo").tile_footprint(t), 2 * 5 * 6);
}

TEST(Workload, DependenceMetadataIsTotal) {
  for (const auto& w : {make_mm(3, 5, 7), make_cnn(2, 3, 4, 5, 3, 3)}) {
    for (LoopId l = 0; l < w.num_loops(); ++l) {
      bool covered = false;
      for (const auto& a : w.arrays) covered |= a.indexing().contains(l) || a.carried().contains(l);
      EXPECT_TRUE(covered) << w.loops[l].name;
    }
    for (const auto& a : w.arrays) EXPECT_TRUE((a.carried_read & a.carried_flow).empty()) << a.name;
  }
}

TEST(Workload, FootprintMonotoneInEveryTileSize) {
  std::mt19937_64 rng(3);
  auto w = make_cnn(32, 32, 32, 32, 5, 5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::int64_t> t(6);
    for (LoopId l = 0; l < 6; ++l) t[l] = std::uniform_int_distribution<std::int64_t>(1, w.extent(l))(rng);
    LoopId bump = std::uniform_int_distribution<LoopId>(0, 5)(rng);
    auto t2 = t;
    t2[bump] += 1;
    for (const auto& a : w.arrays) ASSERT_LE(a.tile_footprint(t), a.tile_footprint(t2)) << a.name;
  }
}

TEST(Network, BundledVgg16) {
  auto net = load_network(SADSE_DATA_DIR "/vgg16.layers");
  ASSERT_EQ(net.layers.size(), 13u);
  EXPECT_EQ(net.layers[0].name, "CONV1");
  EXPECT_EQ(net.layers[0].workload().dims_string(), "3,64,224,224,3,3");
  EXPECT_EQ(net.layers[1].workload().dims_string(), "64,64,224,224,3,3");
  EXPECT_EQ(net.name, "vgg16");
}

TEST(Network, BundledResnet50) {
  auto net = load_network(SADSE_DATA_DIR "/resnet50.layers");
  EXPECT_EQ(net.layers.size(), 53u);
}

TEST(Network, EmptyFileIsEmptyNetwork) {
  std::istringstream in("# nothing here\n\n");
  EXPECT_TRUE(parse_network(in).layers.empty());
}

TEST(Network, MalformedRecordNamesLineAndRecord) {
  std::istringstream in("a 1 2 3 4 5 6\nbad 1 2 x 4 5 6\n");
  try {
    parse_network(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("bad 1 2 x"), std::string::npos);
  }
  std::istringstream short_rec("c 1 2 3\n");
  EXPECT_THROW(parse_network(short_rec), ParseError);
  std::istringstream zero("c 1 2 3 4 0 6\n");
  EXPECT_THROW(parse_network(zero), ParseError);
}

TEST(Network, DuplicateNamesRejected) {
  std::istringstream in("x 1 1 1 1 1 1\nx 2 2 2 2 2 2\n");
  try {
    parse_network(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Network, MissingFile) { EXPECT_THROW(load_network("/nonexistent/net.layers"), ParseError); }
