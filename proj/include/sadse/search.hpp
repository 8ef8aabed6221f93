#pragma once

// Evolutionary tiling search with factorization / random mutation and
// per-loop crossover, plus random search, DSP-pruned exhaustive search and
// the full-enumeration oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "sadse/design_space.hpp"
#include "sadse/perf_model.hpp"

namespace sadse {

// ------------------------------------------------------------------ genome

/// Per loop, the bounds of its tiled sub-loops, outermost first:
/// [ceil(E/t1), t1/t2, t2] on latency-hiding loops, [ceil(E/t1), t1/t3, t3]
/// on the SIMD loop, [ceil(E/t1), t1] elsewhere.
struct Genome {
  std::array<std::array<std::int64_t, 3>, kMaxLoops> chain{};
  std::uint8_t num_loops = 0;

  auto operator<=>(const Genome&) const = default;
  bool operator==(const Genome&) const = default;
};

struct GenomeHash {
  std::size_t operator()(const Genome& g) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t l = 0; l < g.num_loops; ++l)
      for (auto v : g.chain[l]) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

inline std::size_t levels(const Workload& w, LoopId l) {
  if (has_latency_hiding(w, l) && l == w.simd_loop)
    throw ValidationError("loop '" + w.loops[l].name + "' cannot be both latency-hiding and SIMD");
  return has_latency_hiding(w, l) || l == w.simd_loop ? 3 : 2;
}

inline std::int64_t genome_t1(const Genome& g, LoopId l) { return g.chain[l][1] * g.chain[l][2]; }

inline Genome encode(const Workload& w, const DesignPoint& p) {
  Genome g;
  g.num_loops = static_cast<std::uint8_t>(w.num_loops());
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    std::int64_t inner = 1;
    if (levels(w, l) == 3) inner = l == w.simd_loop ? p.t3 : p.t2[l];
    g.chain[l] = {ceil_div(w.extent(l), p.t1[l]), p.t1[l] / inner, inner};
  }
  return g;
}

inline DesignPoint decode(const Workload& w, const DesignSpec& spec, const Genome& g) {
  DesignPoint p = unit_point(w, spec);
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    p.t1[l] = genome_t1(g, l);
    if (levels(w, l) == 3) {
      if (l == w.simd_loop) p.t3 = g.chain[l][2];
      else p.t2[l] = g.chain[l][2];
    }
  }
  return repair(w, p);
}

/// Empty when every Genome invariant holds.
inline std::string validate_genome(const Workload& w, const Genome& g) {
  if (g.num_loops != w.num_loops()) return "genome loop count mismatch";
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    const auto& c = g.chain[l];
    const auto& n = w.loops[l].name;
    for (auto v : c)
      if (v < 1) return "non-positive bound on loop " + n;
    if (levels(w, l) == 2 && c[2] != 1) return "unused level set on loop " + n;
    auto t1 = genome_t1(g, l);
    if (t1 > w.extent(l)) return "tile exceeds extent on loop " + n;
    if (c[0] != ceil_div(w.extent(l), t1)) return "outer bound not ceil(E/t1) on loop " + n;
    if (c[0] * t1 < w.extent(l)) return "padded extent does not cover loop " + n;
  }
  return {};
}

inline std::string to_string(const Workload& w, const Genome& g) {
  std::string s;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    if (l) s += ';';
    s += w.loops[l].name + ":";
    auto nl = levels(w, l);
    for (std::size_t k = 0; k < nl; ++k) s += (k ? "x" : "") + std::to_string(g.chain[l][k]);
  }
  return s;
}

inline std::int64_t chain_product(const Genome& g, LoopId l) { return g.chain[l][0] * g.chain[l][1] * g.chain[l][2]; }

// --------------------------------------------------------------- operators

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

template <class T>
T uniform(Rng& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

inline std::int64_t pick(Rng& rng, const std::vector<std::int64_t>& v) { return v[uniform<std::size_t>(rng, 0, v.size() - 1)]; }
}  // namespace detail

/// Independent stream for (seed, generation, index).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t index) {
  std::uint64_t h = detail::splitmix(seed);
  h = detail::splitmix(h ^ generation);
  h = detail::splitmix(h ^ (index * 0x632be59bd9b4e019ull));
  return Rng(h);
}

/// Moves a divisor d > 1 of one bound onto a sibling bound of the same loop.
/// Only moves that conserve the chain product and keep the genome valid are
/// drawn; returns the genome unchanged when there is none.
inline Genome mutate_factorization(const Workload& w, const Genome& g, Rng& rng) {
  struct Move {
    LoopId loop;
    std::uint8_t from, to;
    std::int64_t d;
  };
  std::vector<Move> moves;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    auto nl = levels(w, l);
    for (std::uint8_t from = 0; from < nl; ++from) {
      for (auto d : divisors(g.chain[l][from])) {
        if (d == 1) continue;
        for (std::uint8_t to = 0; to < nl; ++to) {
          if (to == from) continue;
          auto c = g.chain[l];
          c[from] /= d;
          c[to] *= d;
          std::int64_t t1 = c[1] * c[2];
          if (t1 > w.extent(l) || c[0] != ceil_div(w.extent(l), t1)) continue;
          moves.push_back({l, from, to, d});
        }
      }
    }
  }
  if (moves.empty()) return g;
  auto m = moves[detail::uniform<std::size_t>(rng, 0, moves.size() - 1)];
  Genome out = g;
  out.chain[m.loop][m.from] /= m.d;
  out.chain[m.loop][m.to] *= m.d;
  return out;
}

/// Re-derives the outer bound after level-1 values changed; clamps t1 to the
/// extent, snapping the inner level down to a divisor of the extent.
inline void canonicalize(const Workload& w, Genome& g, LoopId l) {
  auto& c = g.chain[l];
  const std::int64_t e = w.extent(l);
  if (c[1] * c[2] > e) {
    if (levels(w, l) == 3) {
      c[2] = largest_divisor_at_most(e, std::min(c[2], e));
      c[1] = e / c[2];
    } else {
      c[1] = e;
    }
  }
  c[0] = ceil_div(e, c[1] * c[2]);
}

/// Sets bound `a` of loop `l` to s and sibling bound `b` to ceil(l_a*l_b/s),
/// so the product never shrinks; then clamps and re-derives the outer bound.
inline Genome mutate_random_at(const Workload& w, const Genome& g, LoopId l, std::size_t a, std::size_t b,
                               std::int64_t s) {
  Genome out = g;
  auto& c = out.chain[l];
  c[b] = ceil_div(c[a] * c[b], s);
  c[a] = s;
  canonicalize(w, out, l);
  return out;
}

/// mutate_random_at with the loop, the two bounds and s in [1, l_a] drawn uniformly.
inline Genome mutate_random(const Workload& w, const Genome& g, Rng& rng) {
  LoopId l = detail::uniform<LoopId>(rng, 0, w.num_loops() - 1);
  auto nl = levels(w, l);
  auto a = detail::uniform<std::size_t>(rng, 0, nl - 1);
  auto b = detail::uniform<std::size_t>(rng, 0, nl - 2);
  if (b >= a) ++b;
  std::int64_t s = detail::uniform<std::int64_t>(rng, 1, g.chain[l][a]);
  return mutate_random_at(w, g, l, a, b, s);
}

inline Genome mutate(const Workload& w, const Genome& g, Rng& rng, double alpha) {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < alpha) return mutate_factorization(w, g, rng);
  return mutate_random(w, g, rng);
}

/// Swaps whole per-loop chains where `mask` has a bit set.
inline std::pair<Genome, Genome> crossover_mask(const Genome& a, const Genome& b, std::uint32_t mask) {
  Genome x = a, y = b;
  for (std::size_t l = 0; l < a.num_loops; ++l)
    if ((mask >> l) & 1u) std::swap(x.chain[l], y.chain[l]);
  return {x, y};
}

inline std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) {
  std::uint32_t mask = 0;
  for (std::size_t l = 0; l < a.num_loops; ++l)
    if (detail::uniform<int>(rng, 0, 1)) mask |= 1u << l;
  return crossover_mask(a, b, mask);
}

/// Uniform t1 per loop (or log-uniform, or divisors of the extent only), with
/// t2/t3 uniform among the divisors of t1.
enum class Sampling { uniform, log_uniform, divisors_only };

inline Genome random_genome(const Workload& w, Rng& rng, Sampling mode) {
  Genome g;
  g.num_loops = static_cast<std::uint8_t>(w.num_loops());
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    const std::int64_t e = w.extent(l);
    std::int64_t t1 = 1;
    switch (mode) {
      case Sampling::uniform: t1 = detail::uniform<std::int64_t>(rng, 1, e); break;
      case Sampling::log_uniform: {
        double x = std::uniform_real_distribution<double>(0.0, std::log(static_cast<double>(e) + 1.0))(rng);
        t1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::exp(x)), 1, e);
        break;
      }
      case Sampling::divisors_only: t1 = detail::pick(rng, divisors(e)); break;
    }
    std::int64_t inner = levels(w, l) == 3 ? detail::pick(rng, divisors(t1)) : 1;
    g.chain[l] = {ceil_div(e, t1), t1 / inner, inner};
  }
  return g;
}

// ------------------------------------------------------------------ config

enum class FitnessModel { full, max_model };

struct SearchConfig {
  std::size_t population_size = 50;
  double elite_fraction = 0.2;
  double alpha = 0.4;
  double crossover_rate = 0.7;
  std::int64_t max_evaluations = 3000;
  double max_seconds = 0;  // 0: no wall-clock limit
  std::uint64_t rng_seed = 1;
  std::size_t workers = 1;
  FitnessModel fitness_model = FitnessModel::full;
  bool record_wall_clock = false;

  void validate() const {
    if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
    if (population_size < 2) throw ConfigError("population must be at least 2");
    if (!(elite_fraction >= 0 && elite_fraction < 1)) throw ConfigError("elite fraction must lie in [0, 1)");
    if (!(crossover_rate >= 0 && crossover_rate <= 1)) throw ConfigError("crossover rate must lie in [0, 1]");
    if (max_evaluations < 1) throw ConfigError("evaluation budget must be positive");
    if (max_seconds < 0) throw ConfigError("time budget must be non-negative");
    if (workers < 1) throw ConfigError("need at least one worker");
  }
};

inline constexpr std::int64_t kInfeasible = std::numeric_limits<std::int64_t>::max();

/// Lower is better; infeasible points sort last.
struct Fitness {
  std::int64_t latency = kInfeasible;
  std::int64_t dsp = 0;
  std::int64_t bram = 0;

  bool feasible() const { return latency != kInfeasible; }
  auto operator<=>(const Fitness&) const = default;
};

struct TraceRow {
  std::int64_t eval_idx = 0;
  std::int64_t ms = 0;
  std::string genome;
  std::int64_t latency = kInfeasible;  // search fitness
  std::int64_t bram = 0;
  std::int64_t dsp = 0;
  std::int64_t best_latency = kInfeasible;
};

struct SearchTrace {
  std::string spec;
  std::vector<TraceRow> rows;
};

struct SearchResult {
  std::optional<DesignPoint> best;
  PerfEstimate estimate;  // full model, even under FitnessModel::max_model
  Fitness fitness;
  SearchTrace trace;
  std::int64_t evaluations = 0;
  bool complete = true;  // exhaustive methods: false when the budget ran out first
  /// first evaluation index at which the final best fitness was reached
  std::int64_t evals_to_best = 0;
};

/// Evaluates candidates for one spec and keeps the best-so-far bookkeeping,
/// the trace and the budget.
class EvalSession {
 public:
  EvalSession(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev, const SearchConfig& cfg)
      : w_(&w), ev_(w, spec, dev), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    trace_.spec = to_string(w, spec);
  }

  const Evaluator& evaluator() const { return ev_; }

  Fitness score(const PerfEstimate& e) const {
    if (!e.feasible) return {kInfeasible, e.dsp_used, e.bram_used};
    auto lat = cfg_.fitness_model == FitnessModel::full ? e.latency_cycles : e.max_model_latency();
    return {lat, e.dsp_used, e.bram_used};
  }

  bool budget_left() const {
    if (evaluations_ >= cfg_.max_evaluations) return false;
    return cfg_.max_seconds <= 0 || elapsed_ms() < cfg_.max_seconds * 1000.0;
  }

  std::int64_t remaining() const { return cfg_.max_evaluations - evaluations_; }

  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

  /// Records one evaluated candidate. `trace_row` false keeps the trace
  /// limited to improvements (used by the enumerating methods).
  void record(const DesignPoint& p, const PerfEstimate& e, const Fitness& f, const std::string& genome,
              bool trace_row = true) {
    ++evaluations_;
    bool improved = better(f, p);
    if (improved) {
      best_ = p;
      best_est_ = e;
      best_fit_ = f;
      evals_to_best_ = evaluations_;
    }
    if (trace_row || improved) {
      TraceRow r;
      r.eval_idx = evaluations_ - 1;
      r.ms = cfg_.record_wall_clock ? static_cast<std::int64_t>(elapsed_ms()) : 0;
      r.genome = genome;
      r.latency = f.latency;
      r.bram = e.bram_used;
      r.dsp = e.dsp_used;
      r.best_latency = best_ ? best_fit_.latency : kInfeasible;
      trace_.rows.push_back(std::move(r));
    }
  }

  void skip() { ++evaluations_; }
  std::int64_t evaluations() const { return evaluations_; }

  const Fitness& best_fitness() const { return best_fit_; }
  bool has_best() const { return best_.has_value(); }

  SearchResult finish(bool complete = true) {
    SearchResult r;
    r.best = best_;
    if (best_) r.estimate = best_est_;
    r.fitness = best_fit_;
    r.trace = std::move(trace_);
    r.evaluations = evaluations_;
    r.complete = complete;
    r.evals_to_best = evals_to_best_;
    return r;
  }

 private:
  bool better(const Fitness& f, const DesignPoint& p) const {
    if (!f.feasible()) return false;
    if (!best_) return true;
    if (f != best_fit_) return f < best_fit_;
    return encode(*w_, p) < encode(*w_, *best_);
  }

  const Workload* w_;
  Evaluator ev_;
  SearchConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  SearchTrace trace_;
  std::int64_t evaluations_ = 0;
  std::int64_t evals_to_best_ = 0;
  std::optional<DesignPoint> best_;
  PerfEstimate best_est_;
  Fitness best_fit_;
};

// ------------------------------------------------------------------ evolve

inline constexpr std::int64_t kRestartAfter = 10;  // generations without improvement

namespace detail {
struct Individual {
  Genome g;
  Fitness f;
  bool operator<(const Individual& o) const { return f != o.f ? f < o.f : g < o.g; }
};

/// Evaluates `items` possibly on several threads; results land in index order.
inline void evaluate_batch(const Evaluator& ev, const std::vector<DesignPoint>& pts, std::vector<PerfEstimate>& out,
                           std::size_t workers) {
  out.resize(pts.size());
  if (workers <= 1 || pts.size() < 2 * workers) {
    for (std::size_t n = 0; n < pts.size(); ++n) out[n] = ev.evaluate(pts[n]);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t n = t; n < pts.size(); n += workers) out[n] = ev.evaluate(pts[n]);
    });
  for (auto& th : pool) th.join();
}
}  // namespace detail

/// Generational search. `seeds` (feasible points, e.g. from the MP seeder)
/// enter the initial population first; random genomes fill the rest.
inline SearchResult evolve(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev,
                           const SearchConfig& cfg, const std::vector<DesignPoint>& seeds = {}) {
  cfg.validate();
  EvalSession session(w, spec, dev, cfg);
  std::unordered_map<Genome, Fitness, GenomeHash> cache;
  const Sampling init_mode = cfg.alpha >= 1.0 ? Sampling::divisors_only : Sampling::log_uniform;

  // Evaluates the genomes not seen before (up to the budget) and returns
  // their fitness; unevaluated genomes come back as infeasible.
  auto assess = [&](const std::vector<Genome>& gs) {
    std::vector<Fitness> fit(gs.size());
    std::vector<std::size_t> fresh;
    std::vector<DesignPoint> pts;
    for (std::size_t n = 0; n < gs.size(); ++n) {
      if (auto it = cache.find(gs[n]); it != cache.end()) {
        fit[n] = it->second;
        continue;
      }
      bool dup = false;
      for (auto m : fresh) dup |= gs[m] == gs[n];
      if (dup || static_cast<std::int64_t>(fresh.size()) >= session.remaining()) continue;
      fresh.push_back(n);
      pts.push_back(decode(w, spec, gs[n]));
    }
    std::vector<PerfEstimate> est;
    detail::evaluate_batch(session.evaluator(), pts, est, cfg.workers);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      auto f = session.score(est[k]);
      cache.emplace(gs[fresh[k]], f);
      session.record(pts[k], est[k], f, to_string(w, gs[fresh[k]]));
    }
    for (std::size_t n = 0; n < gs.size(); ++n)
      if (auto it = cache.find(gs[n]); it != cache.end()) fit[n] = it->second;
    return fit;
  };

  // initial population
  std::vector<detail::Individual> pop;
  std::vector<Genome> seed_genomes;
  for (const auto& s : seeds)
    if (seed_genomes.size() < cfg.population_size) seed_genomes.push_back(encode(w, repair(w, s)));
  {
    std::vector<Genome> init = seed_genomes;
    Rng rng = derive_rng(cfg.rng_seed, 0, 0);
    std::size_t draws = 0;
    while (init.size() < cfg.population_size) {
      init.push_back(random_genome(w, rng, init_mode));
      ++draws;
    }
    auto fit = assess(init);
    for (std::size_t n = 0; n < init.size(); ++n) pop.push_back({init[n], fit[n]});
    // top up infeasible slots while the budget allows
    std::size_t feasible = 0;
    for (const auto& ind : pop) feasible += ind.f.feasible();
    while (feasible < cfg.population_size && draws < 20 * cfg.population_size && session.budget_left()) {
      std::vector<Genome> more;
      for (std::size_t n = 0; n < cfg.population_size - feasible; ++n, ++draws) more.push_back(random_genome(w, rng, init_mode));
      auto mf = assess(more);
      for (std::size_t n = 0; n < more.size(); ++n) {
        if (!mf[n].feasible()) continue;
        auto worst = std::max_element(pop.begin(), pop.end());
        if (worst->f.feasible()) break;
        *worst = {more[n], mf[n]};
        ++feasible;
      }
    }
  }
  std::sort(pop.begin(), pop.end());

  const std::size_t P = cfg.population_size;
  // the fittest fraction breeds
  const std::size_t parents = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(cfg.elite_fraction * P)));
  // one to a few chained mutations per child, geometrically distributed
  auto mutate_child = [&](Genome g, Rng& rng) {
    do g = mutate(w, g, rng, cfg.alpha);
    while (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5);
    return g;
  };
  std::uint64_t gen = 0;
  std::int64_t idle = 0, stagnant = 0;
  Fitness last_best = session.best_fitness();
  while (session.budget_left()) {
    ++gen;
    const std::size_t n = pop.size();
    auto select = [&](Rng& rng) -> const detail::Individual& {
      return pop[detail::uniform<std::size_t>(rng, 0, std::min(n, parents) - 1)];
    };
    // after a long stall the population restarts from random genomes around
    // the single best individual
    const bool restart = stagnant >= kRestartAfter;
    std::vector<Genome> kids;
    for (std::size_t pair = 0; kids.size() < P; ++pair) {
      Rng rng = derive_rng(cfg.rng_seed, gen, pair);
      if (restart) {
        kids.push_back(random_genome(w, rng, init_mode));
        continue;
      }
      Genome a = select(rng).g, b = select(rng).g;
      if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.crossover_rate) std::tie(a, b) = crossover(a, b, rng);
      for (Genome* c : {&a, &b}) {
        Genome m = mutate_child(*c, rng);
        // retry a few times for a genome not already known
        for (int t = 0; t < 4 && cache.count(m); ++t) m = mutate_child(m, rng);
        if (kids.size() < P) kids.push_back(m);
      }
    }
    if (restart) stagnant = 0;
    const auto before = session.evaluations();
    auto fit = assess(kids);
    // parents and children compete for the next population
    std::vector<detail::Individual> next;
    if (!restart) next = pop;
    else next.push_back(pop.front());
    for (std::size_t k = 0; k < kids.size(); ++k) next.push_back({kids[k], fit[k]});
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end(), [](const auto& x, const auto& y) { return x.g == y.g; }),
               next.end());
    if (next.size() > P) next.resize(P);
    pop = std::move(next);
    if (session.evaluations() == before) {
      if (++idle >= 50) break;  // lattice exhausted around the population
    } else {
      idle = 0;
    }
    if (session.best_fitness() < last_best) {
      last_best = session.best_fitness();
      stagnant = 0;
    } else {
      ++stagnant;
    }
  }
  return session.finish();
}

// ------------------------------------------------------------ random search

inline SearchResult random_search(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev,
                                  const SearchConfig& cfg) {
  cfg.validate();
  EvalSession session(w, spec, dev, cfg);
  Rng rng = derive_rng(cfg.rng_seed, 0, 0);
  while (session.budget_left()) {
    Genome g = random_genome(w, rng, Sampling::uniform);
    auto p = decode(w, spec, g);
    auto e = session.evaluator().evaluate(p);
    session.record(p, e, session.score(e), to_string(w, g));
  }
  return session.finish();
}

// ------------------------------------------------------------- enumeration

/// Number of lattice points: t1 in [1, E] per loop, times the divisors of t1
/// on loops with a third level.
inline double lattice_size(const Workload& w) {
  double n = 1;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    double per = 0;
    for (std::int64_t t = 1; t <= w.extent(l); ++t)
      per += levels(w, l) == 3 ? static_cast<double>(divisors(t).size()) : 1.0;
    n *= per;
  }
  return n;
}

namespace detail {
/// Visits every lattice point in lexicographic (t1, then inner level) order.
/// `visit_t1` may return false to skip all inner choices of that t1.
template <class VisitT1, class Visit>
void enumerate_lattice(const Workload& w, const DesignSpec& spec, VisitT1&& visit_t1, Visit&& visit,
                       const std::function<bool()>& keep_going) {
  const std::size_t nl = w.num_loops();
  DesignPoint p = unit_point(w, spec);
  std::vector<std::vector<std::int64_t>> inner(nl);
  std::vector<std::size_t> pos(nl, 0);

  // odometer over t1
  for (;;) {
    if (!keep_going()) return;
    bool go = visit_t1(p);
    if (go) {
      for (LoopId l = 0; l < nl; ++l) {
        inner[l] = levels(w, l) == 3 ? divisors(p.t1[l]) : std::vector<std::int64_t>{1};
        pos[l] = 0;
      }
      for (;;) {
        for (LoopId l = 0; l < nl; ++l) {
          if (levels(w, l) != 3) continue;
          if (l == w.simd_loop) p.t3 = inner[l][pos[l]];
          else p.t2[l] = inner[l][pos[l]];
        }
        if (!visit(p)) return;
        std::size_t l = nl;
        while (l-- > 0) {
          if (++pos[l] < inner[l].size()) break;
          pos[l] = 0;
        }
        if (l == static_cast<std::size_t>(-1)) break;
      }
      p.t2.fill(1);
      p.t3 = 1;
    }
    std::size_t l = nl;
    while (l-- > 0) {
      if (++p.t1[l] <= w.extent(l)) break;
      p.t1[l] = 1;
    }
    if (l == static_cast<std::size_t>(-1)) return;
  }
}
}  // namespace detail

/// Enumerates the lattice, skipping candidates whose DSP use is below
/// `dsp_floor_fraction` of the budget. Every visited candidate counts as an
/// evaluation; only improvements are traced.
inline SearchResult exhaustive_pruned(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev,
                                      const SearchConfig& cfg, double dsp_floor_fraction = 0.25) {
  if (!(dsp_floor_fraction >= 0)) throw ConfigError("DSP floor fraction must be non-negative");
  EvalSession session(w, spec, dev, cfg);
  const auto& ev = session.evaluator();
  const double floor = dsp_floor_fraction * static_cast<double>(dev.dsp_available);
  bool exhausted_budget = false;
  detail::enumerate_lattice(
      w, spec, [](const DesignPoint&) { return true; },
      [&](const DesignPoint& p) {
        if (!session.budget_left()) {
          exhausted_budget = true;
          return false;
        }
        if (static_cast<double>(ev.dsp(p)) < floor) {
          session.skip();
          return true;
        }
        auto e = ev.evaluate(p);
        session.record(p, e, session.score(e), to_string(w, encode(w, p)), false);
        return true;
      },
      [] { return true; });
  return session.finish(!exhausted_budget);
}

inline constexpr double kDefaultLatticeCap = 5e8;

/// True optimum by enumeration with exact bounds: a t1 whose I/O alone
/// exceeds the best latency is skipped, as is any point over the DSP budget
/// or whose compute alone exceeds the best.
inline SearchResult oracle(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev,
                           double lattice_cap = kDefaultLatticeCap) {
  const double size = lattice_size(w);
  if (size > lattice_cap)
    throw ConfigError("oracle lattice has ~" + std::to_string(static_cast<long long>(size)) +
                      " points, above the cap of " + std::to_string(static_cast<long long>(lattice_cap)));
  SearchConfig cfg;
  cfg.max_evaluations = std::numeric_limits<std::int64_t>::max();
  EvalSession session(w, spec, dev, cfg);
  const auto& ev = session.evaluator();
  const std::int64_t mac = ev.mac_dsp();
  TileState state;
  std::int64_t io_bound = 0;
  std::int64_t best = kInfeasible;
  detail::enumerate_lattice(
      w, spec,
      [&](const DesignPoint& p) {
        state = ev.prepare(p.t1);
        io_bound = 0;
        for (std::size_t a = 0; a < w.arrays.size(); ++a) io_bound = std::max(io_bound, state.arrays[a].total_io_cycles);
        return io_bound <= best;
      },
      [&](const DesignPoint& p) {
        if (ev.pe_count(p) * p.t3 * mac > dev.dsp_available) return true;
        LatencyBreakdown b;
        b.tiles = state.tiles;
        ev.compute(p, b);
        if (b.total_compute > best) return true;
        TileState s = state;
        PerfEstimate e;
        e.num_arrays = w.arrays.size();
        e.pe_count = ev.pe_count(p);
        e.dsp_used = e.pe_count * p.t3 * mac;
        e.bram_used = ev.bram(p, s, e.pe_bram);
        if (e.bram_used > dev.bram_blocks_available) return true;
        e.breakdown = b;
        e.latency_cycles = ev.pipeline_latency(s, e.breakdown);
        e.arrays = s.arrays;
        e.feasible = true;
        if (e.latency_cycles > best) return true;
        auto f = session.score(e);
        session.record(p, e, f, to_string(w, encode(w, p)), false);
        best = session.best_fitness().latency;
        return true;
      },
      [] { return true; });
  return session.finish(true);
}

}  // namespace sadse
