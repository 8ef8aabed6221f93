#pragma once

// Relaxed mathematical-programming seeder: minimizes a DSP / data-movement
// objective over continuous tile sizes, then rounds the optima into feasible
// DesignPoints for the evolutionary search's first population.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sadse/design_space.hpp"
#include "sadse/perf_model.hpp"
#include "sadse/search.hpp"

namespace sadse {

enum class Objective { neg_dsp, comm, comm_minus_comp };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::neg_dsp: return "obj1";
    case Objective::comm: return "obj2";
    case Objective::comm_minus_comp: return "obj3";
  }
  return "?";
}

/// "obj1" | "obj2" | "obj3"; "none" yields nullopt.
inline std::optional<Objective> parse_objective(const std::string& s) {
  if (s == "obj1") return Objective::neg_dsp;
  if (s == "obj2") return Objective::comm;
  if (s == "obj3") return Objective::comm_minus_comp;
  if (s == "none") return std::nullopt;
  throw ConfigError("unknown MP objective '" + s + "' (expected obj1, obj2, obj3 or none)");
}

struct ObjectiveScales {
  double dm_scale = 1;
  double dsp_scale = 1;
};

inline ObjectiveScales default_scales(const Workload& w, const DeviceBudget& dev) {
  return {static_cast<double>(w.total_array_elements()), static_cast<double>(dev.dsp_available)};
}

/// Continuous tiling: t1 = mid * inner per loop; `inner` is t2 on
/// latency-hiding loops, t3 on the SIMD loop, and fixed at 1 elsewhere.
struct RelaxedPoint {
  std::array<double, kMaxLoops> mid{};
  std::array<double, kMaxLoops> inner{};
};

struct RelaxedEstimate {
  double dm = 0;
  double dsp = 0;
  double bram = 0;
};

/// Model formulas with ceil replaced by real division, reuse decided by the
/// same structural rule as the discrete model.
class RelaxedModel {
 public:
  RelaxedModel(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev)
      : w_(&w), dev_(&dev), layout_(w, spec), mac_(dev.dsp_cost("mac", w.data_type)) {}

  const SpecLayout& layout() const { return layout_; }

  RelaxedEstimate estimate(const RelaxedPoint& x) const {
    const std::size_t nl = layout_.num_loops;
    std::array<double, kMaxLoops> t1{}, trips{};
    trips.fill(1);
    double tiles = 1;
    for (LoopId l = 0; l < nl; ++l) {
      t1[l] = x.mid[l] * x.inner[l];
      double tr = static_cast<double>(w_->extent(l)) / t1[l];
      trips[l] = tr <= 1 + 1e-9 ? 1.0 : tr;
      tiles *= trips[l];
    }
    auto pe = [&](LoopId l) {
      double v = t1[l];
      if (layout_.parallel.contains(l) || l == layout_.simd_loop) v /= x.inner[l];
      return v;
    };
    const double t3 = x.inner[layout_.simd_loop];
    double pes = 1;
    for (std::size_t s = 0; s < layout_.num_space; ++s) pes *= pe(layout_.space_loops[s]);

    RelaxedEstimate r;
    r.dsp = pes * t3 * static_cast<double>(mac_);
    const double block = static_cast<double>(dev_->bram_block_bits);
    std::span<const double> tiles_span(t1.data(), nl);
    for (std::size_t a = 0; a < layout_.num_arrays; ++a) {
      const auto& info = layout_.arrays[a];
      const double fp = w_->arrays[a].tile_footprint(tiles_span);
      const LoopSet suffix = layout_.reuse_suffix(a);
      double period = 1;
      for (LoopId l = 0; l < nl; ++l)
        if (suffix.contains(l)) period *= trips[l];
      const bool reloads = layout_.reloads(a);
      r.dm += tiles / period * fp * (reloads ? 2.0 : 1.0);
      const double modules = info.io_loop >= 0 ? pe(static_cast<LoopId>(info.io_loop)) : 1.0;
      const double banks = info.simd_banked ? t3 : 1.0;
      const double per_buffer = std::max(banks, fp / modules * info.element_bits / block);
      const double io = modules * 2 * per_buffer;
      r.bram += reloads ? 2 * io : io;
    }
    double acc = 1;
    int acc_bits = 32;
    for (LoopId l = 0; l < nl; ++l)
      if (layout_.acc_loops.contains(l) && layout_.parallel.contains(l)) acc *= x.inner[l];
    for (std::size_t a = 0; a < layout_.num_arrays; ++a)
      if (layout_.arrays[a].output) acc_bits = layout_.arrays[a].element_bits;
    r.bram += pes * std::max(1.0, acc * acc_bits / block);
    return r;
  }

 private:
  const Workload* w_;
  const DeviceBudget* dev_;
  SpecLayout layout_;
  std::int64_t mac_;
};

inline double objective_value(Objective o, double dm, double dsp, const ObjectiveScales& sc) {
  switch (o) {
    case Objective::neg_dsp: return -dsp / sc.dsp_scale;
    case Objective::comm: return dm / sc.dm_scale;
    case Objective::comm_minus_comp: return dm / sc.dm_scale - dsp / sc.dsp_scale;
  }
  return 0;
}

inline double objective_value(const RelaxedModel& m, const RelaxedPoint& x, Objective o, const ObjectiveScales& sc) {
  auto e = m.estimate(x);
  return objective_value(o, e.dm, e.dsp, sc);
}

/// Discrete counterpart used to rank rounded candidates.
inline double objective_value(const PerfEstimate& e, Objective o, const ObjectiveScales& sc) {
  return objective_value(o, static_cast<double>(e.total_dm()), static_cast<double>(e.dsp_used), sc);
}

struct SolveConfig {
  std::size_t starts = 16;
  std::size_t max_sweeps = 200;
  std::size_t grid_points = 17;
  std::size_t keep = 5;
  double initial_penalty = 10;
};

namespace detail {
struct Var {
  LoopId loop;
  bool inner;
};

inline std::vector<Var> relaxed_vars(const Workload& w) {
  std::vector<Var> v;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    v.push_back({l, false});
    if (levels(w, l) == 3) v.push_back({l, true});
  }
  return v;
}

inline double& slot(RelaxedPoint& x, const Var& v) { return v.inner ? x.inner[v.loop] : x.mid[v.loop]; }
inline double sibling(const RelaxedPoint& x, const Var& v) { return v.inner ? x.mid[v.loop] : x.inner[v.loop]; }
}  // namespace detail

/// Multi-start coordinate descent in log space with a quadratic penalty on
/// the DSP and BRAM budgets, then floor/ceil rounding, repair and
/// feasibility filtering. Returns up to `keep` distinct feasible points,
/// best objective first. Deterministic for a given seed.
inline std::vector<DesignPoint> solve(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev,
                                      Objective objective, std::uint64_t seed, const SolveConfig& cfg = {}) {
  if (dev.dsp_available <= 0 || dev.bram_blocks_available <= 0) return {};
  const RelaxedModel model(w, spec, dev);
  const Evaluator ev(w, spec, dev);
  const ObjectiveScales sc = default_scales(w, dev);
  const auto vars = detail::relaxed_vars(w);
  const double dsp_cap = static_cast<double>(dev.dsp_available);
  const double bram_cap = static_cast<double>(dev.bram_blocks_available);

  double penalty = cfg.initial_penalty;
  auto cost = [&](const RelaxedPoint& x) {
    auto e = model.estimate(x);
    double v1 = std::max(0.0, e.dsp / dsp_cap - 1), v2 = std::max(0.0, e.bram / bram_cap - 1);
    return objective_value(objective, e.dm, e.dsp, sc) + penalty * (v1 * v1 + v2 * v2);
  };
  auto violated = [&](const RelaxedPoint& x) {
    auto e = model.estimate(x);
    return e.dsp > dsp_cap || e.bram > bram_cap;
  };

  struct Candidate {
    double obj;
    Genome g;
    DesignPoint p;
    std::size_t start;
  };
  std::vector<Candidate> found;

  for (std::size_t start = 0; start < cfg.starts; ++start) {
    Rng rng = derive_rng(seed, 0x4d50, start);
    RelaxedPoint x;
    x.mid.fill(1);
    x.inner.fill(1);
    for (const auto& v : vars) {
      double hi = static_cast<double>(w.extent(v.loop)) / detail::sibling(x, v);
      detail::slot(x, v) = std::exp(std::uniform_real_distribution<double>(0.0, std::log(hi))(rng));
    }
    double best = cost(x);
    for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      const double before = best;
      for (const auto& v : vars) {
        double& val = detail::slot(x, v);
        const double hi = std::log(static_cast<double>(w.extent(v.loop)) / detail::sibling(x, v));
        if (hi <= 0) {
          val = 1;
          best = cost(x);
          continue;
        }
        double best_u = std::log(val);
        auto at = [&](double u) {
          val = std::exp(std::clamp(u, 0.0, hi));
          return cost(x);
        };
        double cur = at(best_u);
        const double step = hi / static_cast<double>(cfg.grid_points - 1);
        for (std::size_t k = 0; k < cfg.grid_points; ++k) {
          double u = step * static_cast<double>(k);
          double c = at(u);
          if (c < cur) {
            cur = c;
            best_u = u;
          }
        }
        // golden-section refinement inside the neighbouring grid cells
        double lo = std::max(0.0, best_u - step), up = std::min(hi, best_u + step);
        const double phi = 0.6180339887498949;
        double a = up - phi * (up - lo), b = lo + phi * (up - lo);
        double fa = at(a), fb = at(b);
        for (int it = 0; it < 20; ++it) {
          if (fa < fb) {
            up = b;
            b = a;
            fb = fa;
            a = up - phi * (up - lo);
            fa = at(a);
          } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (up - lo);
            fb = at(b);
          }
        }
        if (fa < cur) {
          cur = fa;
          best_u = a;
        }
        if (fb < cur) {
          cur = fb;
          best_u = b;
        }
        best = at(best_u);
      }
      if (before - best <= 1e-12 * std::max(1.0, std::abs(before))) break;
    }
    if (violated(x)) penalty *= 2;

    // round every variable down and up
    const std::size_t V = vars.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << V); ++mask) {
      bool redundant = false;
      DesignPoint p = unit_point(w, spec);
      std::array<std::int64_t, kMaxLoops> mid{}, inner{};
      mid.fill(1);
      inner.fill(1);
      for (std::size_t k = 0; k < V; ++k) {
        double v = detail::slot(x, vars[k]);
        double f = std::floor(v + 1e-9);
        bool up = (mask >> k) & 1u;
        if (up && std::abs(v - f) < 1e-9) redundant = true;  // integral: ceil == floor
        auto r = std::max<std::int64_t>(1, static_cast<std::int64_t>(up ? std::ceil(v - 1e-9) : f));
        (vars[k].inner ? inner : mid)[vars[k].loop] = r;
      }
      if (redundant) continue;
      for (LoopId l = 0; l < w.num_loops(); ++l) {
        p.t1[l] = mid[l] * inner[l];
        if (levels(w, l) == 3) {
          if (l == w.simd_loop) p.t3 = inner[l];
          else p.t2[l] = inner[l];
        }
      }
      p = repair(w, p);
      auto e = ev.evaluate(p);
      if (!e.feasible) continue;
      found.push_back({objective_value(e, objective, sc), encode(w, p), p, start});
    }
  }
  auto by_obj = [](const Candidate& a, const Candidate& b) { return a.obj != b.obj ? a.obj < b.obj : a.g < b.g; };
  std::sort(found.begin(), found.end(), by_obj);
  // the best rounding of each local optimum first, so seeds differ in more
  // than the last digit; remaining slots take the next best overall
  std::vector<const Candidate*> pick;
  auto taken = [&](const Candidate& c) {
    return std::any_of(pick.begin(), pick.end(), [&](const Candidate* q) { return q->g == c.g; });
  };
  std::vector<bool> start_used(cfg.starts, false);
  for (const auto& c : found)
    if (pick.size() < cfg.keep && !start_used[c.start] && !taken(c)) {
      start_used[c.start] = true;
      pick.push_back(&c);
    }
  for (const auto& c : found)
    if (pick.size() < cfg.keep && !taken(c)) pick.push_back(&c);
  std::sort(pick.begin(), pick.end(), [&](const Candidate* a, const Candidate* b) { return by_obj(*a, *b); });
  std::vector<DesignPoint> out;
  for (const auto* c : pick) out.push_back(c->p);
  return out;
}

/// Best rounded point by objective over several specs (the MP-only pipeline).
inline std::optional<DesignPoint> standalone_best(const Workload& w, const std::vector<DesignSpec>& specs,
                                                  const DeviceBudget& dev, Objective objective, std::uint64_t seed,
                                                  const SolveConfig& cfg = {}) {
  const ObjectiveScales sc = default_scales(w, dev);
  std::optional<DesignPoint> best;
  double best_obj = 0;
  std::int64_t best_lat = 0;
  for (const auto& spec : specs) {
    auto pts = solve(w, spec, dev, objective, seed, cfg);
    if (pts.empty()) continue;
    auto e = evaluate(w, pts.front(), dev);
    double o = objective_value(e, objective, sc);
    if (!best || o < best_obj || (o == best_obj && e.latency_cycles < best_lat)) {
      best = pts.front();
      best_obj = o;
      best_lat = e.latency_cycles;
    }
  }
  return best;
}

}  // namespace sadse
