#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sadse/design_space.hpp"

using namespace sadse;

namespace {

std::vector<std::string> names(const Workload& w, const std::vector<Dataflow>& dfs) {
  std::vector<std::string> out;
  for (const auto& d : dfs) out.push_back(to_string(w, d));
  return out;
}

DesignPoint table2_point(const Workload& w) {
  DesignPoint p;
  p.spec = {w.kind, make_dataflow(w, {"i", "j"}), prune_orderings(w)[0]};
  p.t1 = {129, 130, 64, 1, 1, 1, 1, 1};
  p.t2 = {3, 13, 1, 1, 1, 1, 1, 1};
  p.t3 = 4;
  return p;
}

}  // namespace

TEST(Dataflows, MmTable) {
  auto w = make_mm(8, 8, 8);
  EXPECT_EQ(names(w, enumerate_dataflows(w)),
            (std::vector<std::string>{"[i]", "[j]", "[k]", "[i,j]", "[i,k]", "[j,k]"}));
}

TEST(Dataflows, CnnTable) {
  auto w = make_cnn(4, 4, 4, 4, 3, 3);
  EXPECT_EQ(names(w, enumerate_dataflows(w)),
            (std::vector<std::string>{"[o]", "[h]", "[w]", "[i]", "[o,h]", "[o,w]", "[o,i]", "[h,w]", "[h,i]",
                                      "[w,i]"}));
  for (const auto& d : enumerate_dataflows(w)) EXPECT_LE(d.count, 2);
}

TEST(Orderings, MmPruned) {
  auto w = make_mm(8, 8, 8);
  std::vector<std::string> got;
  for (const auto& o : prune_orderings(w)) got.push_back(to_string(w, o));
  EXPECT_EQ(got, (std::vector<std::string>{"<[i,j],k>", "<[j,k],i>", "<[i,k],j>"}));
}

TEST(Orderings, CnnPruned) {
  auto w = make_cnn(4, 4, 4, 4, 3, 3);
  std::vector<std::string> got;
  for (const auto& o : prune_orderings(w)) got.push_back(to_string(w, o));
  EXPECT_EQ(got, (std::vector<std::string>{"<[o,h,w],[i,p,q]>", "<[i,o,p,q],[h,w]>", "<[i,h,w,p,q],o>"}));
}

TEST(Orderings, GroupsPartitionLoops) {
  for (const auto& w : {make_mm(2, 2, 2), make_cnn(2, 2, 2, 2, 2, 2)}) {
    for (const auto& o : prune_orderings(w)) {
      LoopSet outer, inner;
      for (auto l : o.outer_group()) outer.insert(l);
      for (auto l : o.inner_group()) inner.insert(l);
      EXPECT_TRUE((outer & inner).empty());
      EXPECT_EQ(outer | inner, w.all_loops());
      EXPECT_EQ(inner, w.arrays[o.defining_array].carried());
    }
  }
}

TEST(Orderings, EmptyReuseSetIncluded) {
  // extra reference indexing every loop: RL = {} gives <NRL> alone
  auto w = make_mm(4, 4, 4);
  ArrayRef d;
  d.name = "D";
  d.dims = {{0}, {1}, {2}};
  w.arrays.insert(w.arrays.begin(), d);
  auto o = ordering_for_array(w, 0);
  EXPECT_EQ(o.inner_size, 0);
  EXPECT_EQ(to_string(w, o), "<[i,j,k]>");
  // same loop order as <[i,j],k>, so pruning keeps one copy
  auto ords = prune_orderings(w);
  EXPECT_EQ(ords.size(), 3u);
  EXPECT_TRUE(std::any_of(ords.begin(), ords.end(), [&](const LoopOrdering& x) { return x.same_order(o); }));
}

TEST(Specs, CountsAndUniqueness) {
  auto mm = make_mm(8, 8, 8);
  auto cnn = make_cnn(4, 4, 4, 4, 3, 3);
  auto a = enumerate_specs(mm);
  auto b = enumerate_specs(cnn);
  EXPECT_EQ(a.size(), 18u);
  EXPECT_EQ(b.size(), 30u);
  std::set<std::string> seen;
  for (const auto& s : a) EXPECT_TRUE(seen.insert(to_string(mm, s)).second);
  auto again = enumerate_specs(mm);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(to_string(mm, a[n]), to_string(mm, again[n]));
}

TEST(Repair, Examples) {
  auto w = make_mm(64, 64, 64);
  auto p = unit_point(w, enumerate_specs(w)[3]);
  p.t1 = {7, 36, 64, 1, 1, 1, 1, 1};
  p.t2 = {4, 8, 1, 1, 1, 1, 1, 1};
  p.t3 = 4;
  auto r = repair(w, p);
  EXPECT_EQ(r.t2[0], 1);
  EXPECT_EQ(r.t2[1], 6);
  EXPECT_EQ(r.t3, 4);
  EXPECT_TRUE(is_valid(w, r));
}

TEST(Repair, ClampsAndIdempotent) {
  std::mt19937_64 rng(11);
  for (const auto& w : {make_mm(64, 48, 100), make_cnn(16, 24, 30, 30, 3, 3)}) {
    auto specs = enumerate_specs(w);
    for (int trial = 0; trial < 3000; ++trial) {
      DesignPoint p;
      p.spec = specs[trial % specs.size()];
      for (LoopId l = 0; l < kMaxLoops; ++l) {
        p.t1[l] = std::uniform_int_distribution<std::int64_t>(-3, 130)(rng);
        p.t2[l] = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
      }
      p.t3 = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
      auto r = repair(w, p);
      ASSERT_TRUE(is_valid(w, r)) << validate_point(w, r);
      auto rr = repair(w, r);
      ASSERT_EQ(r.t1, rr.t1);
      ASSERT_EQ(r.t2, rr.t2);
      ASSERT_EQ(r.t3, rr.t3);
      auto pad = padded_extents(w, r);
      for (LoopId l = 0; l < w.num_loops(); ++l) {
        ASSERT_GE(pad[l], w.extent(l));
        if (has_latency_hiding(w, l) && p.t1[l] >= 1 && p.t1[l] <= w.extent(l)) {
          ASSERT_EQ(r.t2[l], sadse::testing::brute_largest_divisor_at_most(p.t1[l], p.t2[l]));
        }
      }
    }
  }
}

TEST(Divisors, MatchBruteForce) {
  for (std::int64_t n = 1; n <= 300; ++n) {
    std::vector<std::int64_t> ref;
    for (std::int64_t d = 1; d <= n; ++d)
      if (n % d == 0) ref.push_back(d);
    ASSERT_EQ(divisors(n), ref);
    for (std::int64_t cap = 1; cap <= n + 2; cap += 3)
      ASSERT_EQ(largest_divisor_at_most(n, cap), sadse::testing::brute_largest_divisor_at_most(n, cap));
  }
}

TEST(Legality, CnnReductionLoopsHaveNoLatencyHiding) {
  auto w = make_cnn(8, 8, 8, 8, 3, 3);
  auto p = unit_point(w, enumerate_specs(w)[0]);
  p.t1 = {4, 4, 4, 4, 3, 3, 1, 1};
  p.t2[w.loop_id("p")] = 3;
  EXPECT_FALSE(is_valid(w, p));
  p.t2[w.loop_id("p")] = 1;
  p.t2[w.loop_id("o")] = 2;
  EXPECT_TRUE(is_valid(w, p));
  p.t3 = 3;
  EXPECT_FALSE(is_valid(w, p));
}

TEST(Serialization, Table2PointRoundTrip) {
  auto w = make_mm(1024, 1024, 1024);
  auto p = table2_point(w);
  auto s = to_string(w, p);
  EXPECT_EQ(s, "mm/df=[i,j]/ord=<[i,j],k>/t1=129,130,64/t2=3,13/t3=4");
  auto q = parse_point(w, s);
  EXPECT_EQ(to_string(w, q), s);
  EXPECT_EQ(q.spec.ordering.defining_array, p.spec.ordering.defining_array);
}

TEST(Serialization, EverySpecRoundTrips) {
  for (const auto& w : {make_mm(8, 8, 8), make_cnn(4, 4, 4, 4, 3, 3)}) {
    for (const auto& s : enumerate_specs(w)) {
      auto text = to_string(w, s);
      auto back = parse_spec(w, text);
      EXPECT_EQ(to_string(w, back), text);
      EXPECT_TRUE(back.dataflow == s.dataflow);
      EXPECT_TRUE(back.ordering.same_order(s.ordering));
    }
  }
}

TEST(Serialization, ArbitraryPermutation) {
  auto w = make_mm(8, 8, 8);
  auto o = parse_ordering(w, "<j,i,k>");
  EXPECT_LT(o.defining_array, 0);
  EXPECT_EQ(to_string(w, o), "<j,i,k>");
  // a permutation that matches a pruned one maps back onto it
  auto q = parse_ordering(w, "<i,k,j>");
  EXPECT_EQ(to_string(w, q), "<[i,k],j>");
}

TEST(Serialization, Rejections) {
  auto w = make_mm(8, 8, 8);
  EXPECT_THROW(parse_point(w, "mm/df=[i,j]/ord=<[i,j],k>/t1=8,8/t2=1,1/t3=1"), ParseError);
  EXPECT_THROW(parse_point(w, "cnn/df=[i,j]/ord=<[i,j],k>/t1=8,8,8/t2=1,1/t3=1"), ParseError);
  EXPECT_THROW(parse_point(w, "mm/df=[i,j]/ord=<[i,i],k>/t1=8,8,8/t2=1,1/t3=1"), ParseError);
  EXPECT_THROW(parse_point(w, "mm/df=[i,j]/ord=<[i,j],k>/t1=8,8,8/t2=3,1/t3=1"), ValidationError);
  EXPECT_THROW(parse_point(w, "mm/df=[i,j]/ord=<[i,j],k>/t1=8,x,8/t2=1,1/t3=1"), ParseError);
  EXPECT_THROW(parse_dataflow(w, "[i,j,k]"), ParseError);
}
