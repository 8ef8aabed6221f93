#pragma once

// Self-checks behind `sadse validate`: data-movement goldens, the pruned
// ordering dominance grid, latency bounds and search-operator closure.

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sadse/design_space.hpp"
#include "sadse/device.hpp"
#include "sadse/perf_model.hpp"
#include "sadse/search.hpp"

namespace sadse {

struct CheckOutcome {
  std::string name;
  bool passed = true;
  std::string detail;  // first counterexample, or a short summary
};

namespace checks {

inline DesignPoint random_point(const Workload& w, const DesignSpec& s, std::mt19937_64& rng) {
  auto p = unit_point(w, s);
  auto pick = [&](const std::vector<std::int64_t>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    p.t1[l] = std::uniform_int_distribution<std::int64_t>(1, w.extent(l))(rng);
    if (has_latency_hiding(w, l)) p.t2[l] = pick(divisors(p.t1[l]));
  }
  p.t3 = pick(divisors(p.t1[w.simd_loop]));
  return p;
}

inline CheckOutcome dm_goldens() {
  CheckOutcome out{"dm-goldens", true, ""};
  auto w = make_mm(1024, 1024, 1024);
  auto df = make_dataflow(w, {"i", "j"});
  auto flow_inner = parse_ordering(w, "<[i,j],k>");
  auto flow_hoisted = parse_ordering(w, "<[i,k],j>");
  DesignPoint p = unit_point(w, {w.kind, df, flow_inner});
  p.t1 = {129, 130, 64, 1, 1, 1, 1, 1};
  p.t2 = {3, 13, 1, 1, 1, 1, 1, 1};
  p.t3 = 4;
  const auto c = static_cast<std::size_t>(w.array_index("C"));
  if (auto v = data_movement(w, p, c); v != 1073280) return {out.name, false, "DM(C) " + std::to_string(v) + " != 1073280"};
  p.spec.ordering = flow_hoisted;
  if (auto v = data_movement(w, p, c); v != 34344960) return {out.name, false, "DM(C) " + std::to_string(v) + " != 34344960"};

  std::mt19937_64 rng(1);
  auto u = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  for (int n = 0; n < 200; ++n) {
    auto m = make_mm(u(1, 600), u(1, 600), u(1, 600));
    DesignPoint q = unit_point(m, {m.kind, make_dataflow(m, {"i", "j"}), parse_ordering(m, "<[i,j],k>")});
    for (LoopId l = 0; l < 3; ++l) q.t1[l] = u(1, m.extent(l));
    const std::int64_t ti = ceil_div(m.extent(0), q.t1[0]), tj = ceil_div(m.extent(1), q.t1[1]),
                       tk = ceil_div(m.extent(2), q.t1[2]);
    const std::int64_t eq1 = ti * tj * q.t1[0] * q.t1[1];
    const std::int64_t d1 = data_movement(m, q, c);
    q.spec.ordering = parse_ordering(m, "<[i,k],j>");
    const std::int64_t d2 = data_movement(m, q, c);
    // hoisting k re-sends partial sums once per k tile
    const std::int64_t eq2 = 2 * tk * eq1;
    if (d1 != eq1 || d2 != eq2)
      return {out.name, false, to_string(m, q) + ": got " + std::to_string(d1) + "/" + std::to_string(d2)};
  }
  out.detail = "2 goldens, 200 random tilings";
  return out;
}

/// Every permutation of the MM loops is weakly dominated in (latency, BRAM,
/// DSP) by one of the pruned orderings at each sampled tiling.
inline CheckOutcome ordering_dominance(std::size_t points_per_dataflow = 100) {
  CheckOutcome out{"ordering-dominance", true, ""};
  auto w = make_mm(256, 192, 320);
  auto dev = u250_like();
  std::mt19937_64 rng(17);
  auto pruned = prune_orderings(w);
  std::vector<LoopId> perm{0, 1, 2};
  std::vector<LoopOrdering> all;
  do all.push_back(make_permutation(perm));
  while (std::next_permutation(perm.begin(), perm.end()));
  std::size_t compared = 0;
  for (const auto& df : enumerate_dataflows(w)) {
    for (std::size_t n = 0; n < points_per_dataflow; ++n) {
      auto p = random_point(w, {w.kind, df, pruned[0]}, rng);
      for (const auto& o : all) {
        bool covered = false;
        for (const auto& q : pruned) {
          auto d = dominance_witness(w, {w.kind, df, q}, {w.kind, df, o}, p, dev);
          covered |= d == Dominance::a_dominates || d == Dominance::equal;
        }
        ++compared;
        if (!covered) return {out.name, false, to_string(w, o) + " undominated at " + to_string(w, p)};
      }
    }
  }
  out.detail = std::to_string(compared) + " comparisons";
  return out;
}

inline CheckOutcome latency_bounds(std::size_t points = 1000) {
  CheckOutcome out{"latency-bounds", true, ""};
  std::mt19937_64 rng(23);
  auto dev = u250_like();
  for (const auto& w : {make_mm(300, 200, 500), make_cnn(32, 48, 28, 28, 3, 3)}) {
    auto specs = enumerate_specs(w);
    for (std::size_t n = 0; n < points; ++n) {
      auto p = random_point(w, specs[n % specs.size()], rng);
      auto e = evaluate(w, p, dev);
      const auto& b = e.breakdown;
      bool ok = e.latency_cycles >= b.total_compute && e.latency_cycles >= e.max_io_cycles() &&
                e.latency_cycles == b.prologue + b.steady + b.epilogue && b.steady >= b.total_compute;
      if (!ok) return {out.name, false, to_string(w, p)};
    }
  }
  out.detail = std::to_string(2 * points) + " points";
  return out;
}

inline CheckOutcome operator_closure(std::size_t applications = 10000) {
  CheckOutcome out{"operator-closure", true, ""};
  std::mt19937_64 pick(5);
  std::size_t done = 0;
  for (const auto& w : {make_mm(64, 100, 37), make_cnn(16, 24, 28, 28, 3, 3)}) {
    const auto spec = enumerate_specs(w)[0];
    Rng rng(11);
    Genome a = random_genome(w, rng, Sampling::uniform), b = random_genome(w, rng, Sampling::uniform);
    for (std::size_t n = 0; n < applications / 2; ++n, ++done) {
      if (n % 100 == 0) a = random_genome(w, rng, Sampling::log_uniform);
      switch (pick() % 3) {
        case 0: {
          auto m = mutate_factorization(w, a, rng);
          for (LoopId l = 0; l < w.num_loops(); ++l)
            if (chain_product(m, l) != chain_product(a, l)) return {out.name, false, "product changed: " + to_string(w, m)};
          a = m;
          break;
        }
        case 1: a = mutate_random(w, a, rng); break;
        default: std::tie(a, b) = crossover(a, b, rng); break;
      }
      for (const Genome* g : {&a, &b}) {
        if (auto why = validate_genome(w, *g); !why.empty()) return {out.name, false, why + ": " + to_string(w, *g)};
        if (auto why = validate_point(w, decode(w, spec, *g)); !why.empty()) return {out.name, false, why};
      }
    }
  }
  out.detail = std::to_string(done) + " applications";
  return out;
}

inline std::vector<CheckOutcome> run_all() {
  return {dm_goldens(), ordering_dominance(), latency_bounds(), operator_closure()};
}

}  // namespace checks
}  // namespace sadse
