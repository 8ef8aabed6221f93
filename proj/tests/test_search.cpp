#include <gtest/gtest.h>

#include <random>
#include <set>

#include "sadse/device.hpp"
#include "sadse/search.hpp"

using namespace sadse;

namespace {

Genome mm_genome(std::array<std::int64_t, 3> i, std::array<std::int64_t, 3> j, std::array<std::int64_t, 3> k) {
  Genome g;
  g.num_loops = 3;
  g.chain[0] = i;
  g.chain[1] = j;
  g.chain[2] = k;
  return g;
}

std::int64_t trace_best(const SearchTrace& t) {
  std::int64_t b = kInfeasible;
  for (const auto& r : t.rows) b = std::min(b, r.latency);
  return b;
}

void expect_monotone(const SearchResult& r) {
  std::int64_t prev = kInfeasible;
  for (std::size_t n = 0; n < r.trace.rows.size(); ++n) {
    const auto& row = r.trace.rows[n];
    ASSERT_LE(row.best_latency, prev) << "row " << n;
    if (n) {
      ASSERT_GT(row.eval_idx, r.trace.rows[n - 1].eval_idx);
    }
    prev = row.best_latency;
  }
}

}  // namespace

TEST(Genome, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(2);
  for (const auto& w : {make_mm(64, 50, 33), make_cnn(8, 12, 14, 14, 3, 3)}) {
    auto specs = enumerate_specs(w);
    for (int trial = 0; trial < 500; ++trial) {
      DesignPoint p;
      p.spec = specs[trial % specs.size()];
      for (LoopId l = 0; l < kMaxLoops; ++l) {
        p.t1[l] = std::uniform_int_distribution<std::int64_t>(1, 80)(rng);
        p.t2[l] = std::uniform_int_distribution<std::int64_t>(1, 9)(rng);
      }
      p.t3 = std::uniform_int_distribution<std::int64_t>(1, 9)(rng);
      p = repair(w, p);
      auto g = encode(w, p);
      ASSERT_EQ(validate_genome(w, g), "");
      auto q = decode(w, p.spec, g);
      ASSERT_EQ(to_string(w, q), to_string(w, p));
    }
  }
}

TEST(Genome, TextForm) {
  auto w = make_mm(1024, 1024, 1024);
  auto g = mm_genome({8, 43, 3}, {8, 10, 13}, {16, 16, 4});
  EXPECT_EQ(to_string(w, g), "i:8x43x3;j:8x10x13;k:16x16x4");
  EXPECT_EQ(validate_genome(w, g), "");
  EXPECT_EQ(genome_t1(g, 0), 129);
}

TEST(Genome, ValidationCatchesBrokenChains) {
  auto w = make_mm(64, 64, 64);
  EXPECT_NE(validate_genome(w, mm_genome({1, 64, 2}, {1, 64, 1}, {1, 64, 1})), "");  // tile too big
  EXPECT_NE(validate_genome(w, mm_genome({3, 8, 4}, {1, 64, 1}, {1, 64, 1})), "");  // outer not ceil
  EXPECT_NE(validate_genome(w, mm_genome({1, 0, 4}, {1, 64, 1}, {1, 64, 1})), "");
  auto cnn = make_cnn(4, 4, 4, 4, 3, 3);
  auto g = encode(cnn, unit_point(cnn, enumerate_specs(cnn)[0]));
  EXPECT_EQ(validate_genome(cnn, g), "");
  g.chain[cnn.loop_id("p")] = {1, 1, 3};  // p has no third level
  EXPECT_NE(validate_genome(cnn, g), "");
}

TEST(Factorization, MovesAFactorBetweenSiblings) {
  // k chain [2, 4, 8] on K = 64; 8 -> 4 with 4 -> 8 is one of the moves
  auto w = make_mm(1, 1, 64);
  auto g = mm_genome({1, 1, 1}, {1, 1, 1}, {2, 4, 8});
  Rng rng(1);
  bool saw = false;
  std::set<std::array<std::int64_t, 3>> outcomes;
  for (int n = 0; n < 2000; ++n) {
    auto m = mutate_factorization(w, g, rng);
    ASSERT_EQ(validate_genome(w, m), "");
    ASSERT_EQ(chain_product(m, 2), 64);
    ASSERT_EQ(m.chain[0], g.chain[0]);
    outcomes.insert(m.chain[2]);
    saw |= m.chain[2] == std::array<std::int64_t, 3>{2, 8, 4};
  }
  EXPECT_TRUE(saw);
  EXPECT_FALSE(outcomes.count(g.chain[2]));  // a move always changes something
}

TEST(Factorization, AllOnesUnchanged) {
  auto w = make_mm(1, 1, 1);
  auto g = mm_genome({1, 1, 1}, {1, 1, 1}, {1, 1, 1});
  Rng rng(3);
  for (int n = 0; n < 20; ++n) EXPECT_EQ(mutate_factorization(w, g, rng), g);
}

TEST(Factorization, PrimeBoundOnTwoLevelLoop) {
  auto w = make_cnn(1, 1, 1, 1, 7, 1);
  auto g = encode(w, unit_point(w, enumerate_specs(w)[0]));
  const LoopId p = w.loop_id("p");
  g.chain[p] = {1, 7, 1};
  Rng rng(5);
  for (int n = 0; n < 50; ++n) {
    auto m = mutate_factorization(w, g, rng);
    EXPECT_EQ(m.chain[p], (std::array<std::int64_t, 3>{7, 1, 1}));
  }
}

TEST(RandomMutation, NonDivisorExample) {
  // J = 64, j chain [2, 4, 8]: j.2 8 -> 6 gives j.1 = ceil(4*8/6) = 6, T_J1 = 36
  auto w = make_mm(64, 64, 64);
  auto g = mm_genome({1, 64, 1}, {2, 4, 8}, {1, 64, 1});
  auto m = mutate_random_at(w, g, 1, 2, 1, 6);
  EXPECT_EQ(m.chain[1], (std::array<std::int64_t, 3>{2, 6, 6}));
  EXPECT_EQ(genome_t1(m, 1), 36);
  EXPECT_NE(64 % genome_t1(m, 1), 0);
  EXPECT_EQ(validate_genome(w, m), "");
}

TEST(RandomMutation, UnchangedDrawAndCollapse) {
  auto w = make_mm(64, 64, 64);
  auto g = mm_genome({1, 64, 1}, {2, 4, 8}, {1, 64, 1});
  EXPECT_EQ(mutate_random_at(w, g, 1, 2, 1, 8), g);
  auto c = mutate_random_at(w, g, 1, 2, 1, 1);
  EXPECT_EQ(c.chain[1], (std::array<std::int64_t, 3>{2, 32, 1}));
}

TEST(RandomMutation, CoverageKeptAndLevelProductNeverShrinks) {
  auto w = make_mm(100, 37, 64);
  Rng rng(8);
  for (int n = 0; n < 5000; ++n) {
    auto g = random_genome(w, rng, Sampling::uniform);
    auto m = mutate_random(w, g, rng);
    ASSERT_EQ(validate_genome(w, m), "") << to_string(w, m);
    for (LoopId l = 0; l < 3; ++l) ASSERT_GE(m.chain[l][0] * genome_t1(m, l), w.extent(l));
    // between the two tile levels: t1 only grows unless clamped at the extent
    const LoopId l = static_cast<LoopId>(n % 3);
    const std::int64_t s = std::uniform_int_distribution<std::int64_t>(1, g.chain[l][2])(rng);
    auto q = mutate_random_at(w, g, l, 2, 1, s);
    ASSERT_EQ(validate_genome(w, q), "");
    if (ceil_div(g.chain[l][1] * g.chain[l][2], s) * s <= w.extent(l)) {
      ASSERT_GE(genome_t1(q, l), genome_t1(g, l));
    } else {
      ASSERT_LE(genome_t1(q, l), w.extent(l));
    }
  }
}

TEST(Mutate, AlphaSelectsOperator) {
  auto w = make_mm(64, 64, 64);
  Rng rng(13);
  for (int n = 0; n < 500; ++n) {
    auto g = random_genome(w, rng, Sampling::uniform);
    auto m = mutate(w, g, rng, 1.0);
    for (LoopId l = 0; l < 3; ++l) ASSERT_EQ(chain_product(m, l), chain_product(g, l));
  }
}

TEST(Crossover, Masks) {
  auto w = make_mm(64, 64, 64);
  Rng rng(21);
  auto a = random_genome(w, rng, Sampling::uniform);
  auto b = random_genome(w, rng, Sampling::uniform);
  auto [x, y] = crossover_mask(a, b, 0b111);
  EXPECT_EQ(x, b);
  EXPECT_EQ(y, a);
  auto [u, v] = crossover_mask(a, b, 0);
  EXPECT_EQ(u, a);
  EXPECT_EQ(v, b);
  // parents differing only in k exchange exactly T_K1 and t3
  auto c = a;
  c.chain[2] = {1, 16, 4};
  auto [p, q] = crossover_mask(a, c, 0b100);
  EXPECT_EQ(genome_t1(p, 2), 64);
  EXPECT_EQ(p.chain[2][2], 4);
  EXPECT_EQ(q.chain[2], a.chain[2]);
  EXPECT_EQ(p.chain[0], a.chain[0]);
  EXPECT_EQ(p.chain[1], a.chain[1]);
}

TEST(Operators, ClosureOverLongSequences) {
  std::mt19937_64 pick(77);
  for (const auto& w : {make_mm(64, 100, 37), make_cnn(16, 24, 28, 28, 3, 3)}) {
    const auto spec = enumerate_specs(w)[1];
    Rng rng(99);
    for (int seq = 0; seq < 60; ++seq) {
      Genome a = random_genome(w, rng, Sampling::uniform);
      Genome b = random_genome(w, rng, Sampling::log_uniform);
      for (int step = 0; step < 100; ++step) {
        switch (pick() % 3) {
          case 0: {
            auto m = mutate_factorization(w, a, rng);
            for (LoopId l = 0; l < w.num_loops(); ++l) ASSERT_EQ(chain_product(m, l), chain_product(a, l));
            a = m;
            break;
          }
          case 1: a = mutate_random(w, a, rng); break;
          default: std::tie(a, b) = crossover(a, b, rng); break;
        }
        for (const Genome* g : {&a, &b}) {
          ASSERT_EQ(validate_genome(w, *g), "") << to_string(w, *g);
          auto p = decode(w, spec, *g);
          ASSERT_TRUE(is_valid(w, p)) << validate_point(w, p);
          ASSERT_EQ(encode(w, p), *g);  // decode needs no repair
        }
      }
    }
  }
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t g = 0; g < 20; ++g)
    for (std::uint64_t i = 0; i < 20; ++i) firsts.insert(derive_rng(1, g, i)());
  EXPECT_EQ(firsts.size(), 400u);
  EXPECT_EQ(derive_rng(5, 2, 3)(), derive_rng(5, 2, 3)());
}

TEST(Config, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.population_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_evaluations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Evolve, DeterministicMonotoneWithinBudget) {
  auto w = make_mm(64, 64, 64);
  auto dev = small_test();
  auto spec = enumerate_specs(w)[9];
  SearchConfig c;
  c.max_evaluations = 800;
  c.rng_seed = 7;
  auto a = evolve(w, spec, dev, c);
  auto b = evolve(w, spec, dev, c);
  ASSERT_TRUE(a.best.has_value());
  EXPECT_LE(a.evaluations, 800);
  EXPECT_EQ(static_cast<std::int64_t>(a.trace.rows.size()), a.evaluations);
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t n = 0; n < a.trace.rows.size(); ++n) {
    EXPECT_EQ(a.trace.rows[n].genome, b.trace.rows[n].genome);
    EXPECT_EQ(a.trace.rows[n].latency, b.trace.rows[n].latency);
  }
  expect_monotone(a);
  EXPECT_EQ(a.fitness.latency, trace_best(a.trace));
  auto e = evaluate(w, *a.best, dev);
  EXPECT_TRUE(e.feasible);
  EXPECT_EQ(e.latency_cycles, a.fitness.latency);
  EXPECT_EQ(e.dsp_used, a.fitness.dsp);
}

TEST(Evolve, WorkerCountDoesNotChangeResult) {
  auto w = make_mm(256, 256, 256);
  auto dev = u250_like();
  auto spec = enumerate_specs(w)[9];
  SearchConfig c;
  c.max_evaluations = 1500;
  auto one = evolve(w, spec, dev, c);
  c.workers = 4;
  auto four = evolve(w, spec, dev, c);
  EXPECT_EQ(one.fitness, four.fitness);
  EXPECT_EQ(to_string(w, *one.best), to_string(w, *four.best));
}

TEST(Evolve, SeedsEnterFirst) {
  auto w = make_mm(64, 64, 64);
  auto dev = small_test();
  auto spec = enumerate_specs(w)[9];
  auto seed = unit_point(w, spec);
  seed.t1 = {16, 16, 16, 1, 1, 1, 1, 1};
  seed.t2 = {4, 2, 1, 1, 1, 1, 1, 1};
  seed.t3 = 2;
  ASSERT_TRUE(feasible(w, seed, dev));
  SearchConfig c;
  c.max_evaluations = 300;
  auto r = evolve(w, spec, dev, c, {seed});
  ASSERT_FALSE(r.trace.rows.empty());
  EXPECT_EQ(r.trace.rows[0].genome, to_string(w, encode(w, seed)));
  EXPECT_LE(r.fitness.latency, latency(w, seed, dev));
}

TEST(Evolve, MaxModelFitnessReportsFullModelEstimate) {
  auto w = make_mm(64, 64, 64);
  auto dev = small_test();
  auto spec = enumerate_specs(w)[9];
  SearchConfig c;
  c.max_evaluations = 500;
  c.fitness_model = FitnessModel::max_model;
  auto r = evolve(w, spec, dev, c);
  ASSERT_TRUE(r.best);
  auto e = evaluate(w, *r.best, dev);
  EXPECT_EQ(r.estimate.latency_cycles, e.latency_cycles);
  EXPECT_EQ(r.fitness.latency, e.max_model_latency());
  EXPECT_LE(e.max_model_latency(), e.latency_cycles);
}

TEST(Evolve, NoFeasibleDesign) {
  auto w = make_mm(64, 64, 64);
  auto dev = small_test();
  dev.bram_blocks_available = 1;
  SearchConfig c;
  c.max_evaluations = 300;
  auto r = evolve(w, enumerate_specs(w)[0], dev, c);
  EXPECT_FALSE(r.best.has_value());
  EXPECT_FALSE(r.fitness.feasible());
}

TEST(RandomSearch, DeterministicAndMonotone) {
  auto w = make_mm(64, 64, 64);
  auto dev = small_test();
  auto spec = enumerate_specs(w)[3];
  SearchConfig c;
  c.max_evaluations = 400;
  c.rng_seed = 3;
  auto a = random_search(w, spec, dev, c);
  auto b = random_search(w, spec, dev, c);
  EXPECT_EQ(a.evaluations, 400);
  EXPECT_EQ(a.fitness, b.fitness);
  expect_monotone(a);
}

TEST(Oracle, BoundsEveryMethod) {
  auto w = make_mm(16, 16, 16);
  auto dev = small_test();
  for (std::size_t s : {0u, 5u, 9u, 17u}) {
    auto spec = enumerate_specs(w)[s];
    auto o = oracle(w, spec, dev);
    ASSERT_TRUE(o.best.has_value());
    EXPECT_TRUE(feasible(w, *o.best, dev));
    EXPECT_EQ(latency(w, *o.best, dev), o.fitness.latency);
    SearchConfig c;
    c.max_evaluations = 1000;
    EXPECT_LE(o.fitness.latency, evolve(w, spec, dev, c).fitness.latency);
    EXPECT_LE(o.fitness.latency, random_search(w, spec, dev, c).fitness.latency);
    c.max_evaluations = std::numeric_limits<std::int64_t>::max();
    auto full = exhaustive_pruned(w, spec, dev, c, 0.0);
    EXPECT_TRUE(full.complete);
    EXPECT_EQ(full.fitness, o.fitness) << to_string(w, spec);
    EXPECT_LE(o.fitness.latency, exhaustive_pruned(w, spec, dev, c).fitness.latency);
  }
}

TEST(Oracle, SinglePointLattice) {
  auto w = make_mm(1, 1, 1);
  auto dev = small_test();
  EXPECT_EQ(lattice_size(w), 1.0);
  auto o = oracle(w, enumerate_specs(w)[0], dev);
  ASSERT_TRUE(o.best.has_value());
  EXPECT_EQ(o.best->t1[0], 1);
  EXPECT_EQ(o.best->t3, 1);
}

TEST(Oracle, RefusesHugeLattice) {
  auto w = make_mm(1024, 1024, 1024);
  try {
    oracle(w, enumerate_specs(w)[0], u250_like());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lattice"), std::string::npos);
  }
}

TEST(Exhaustive, ThresholdAboveOneFindsNothing) {
  auto w = make_mm(8, 8, 8);
  auto dev = small_test();
  SearchConfig c;
  c.max_evaluations = std::numeric_limits<std::int64_t>::max();
  auto r = exhaustive_pruned(w, enumerate_specs(w)[0], dev, c, 1.01);
  EXPECT_FALSE(r.best.has_value());
  EXPECT_TRUE(r.complete);
  EXPECT_DOUBLE_EQ(static_cast<double>(r.evaluations), lattice_size(w));
}

TEST(Exhaustive, BudgetExhaustionFlagsIncomplete) {
  auto w = make_mm(32, 32, 32);
  auto dev = small_test();
  SearchConfig c;
  c.max_evaluations = 1000;
  auto r = exhaustive_pruned(w, enumerate_specs(w)[9], dev, c, 0.0);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.evaluations, 1000);
  expect_monotone(r);
}
