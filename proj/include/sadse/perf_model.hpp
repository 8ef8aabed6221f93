#pragma once

// Analytical latency / data-movement / resource models for one DesignPoint.
//
// Tiles of the array-partitioning band execute in the spec's loop order with
// double buffering: while tile n computes, tile n+1 is loaded and tile n-1 is
// drained. Each array owns an independent off-chip stream. An array's tile
// changes only when a loop outside its reuse suffix advances, so transfers
// happen every `period` tiles, where period is the trip-count product of the
// reuse suffix.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sadse/design_space.hpp"
#include "sadse/device.hpp"
#include "sadse/workload.hpp"

namespace sadse {

inline constexpr std::size_t kMaxArrays = 4;

enum class IoLevel { L1, L2 };

inline const char* to_string(IoLevel l) { return l == IoLevel::L1 ? "L1" : "L2"; }

struct ArrayTraffic {
  std::int64_t footprint = 0;     // elements of one tile
  std::int64_t period = 1;        // tiles between consecutive transfers
  std::int64_t transfers = 0;     // tile loads (or drains) over the whole run
  std::int64_t dm = 0;            // elements moved off-chip, both directions
  std::int64_t load_cycles = 0;   // per inbound transfer (inputs, intermediate reloads)
  std::int64_t drain_cycles = 0;  // per outbound transfer (outputs)
  std::int64_t total_io_cycles = 0;
  bool reloads_intermediate = false;  // needs the extra C(in)-style input module
  IoLevel level = IoLevel::L2;
  std::int64_t io_modules = 1;
  std::int64_t io_bram = 0;
  std::int64_t reload_bram = 0;
};

struct LatencyBreakdown {
  std::int64_t tiles = 0;
  std::int64_t pe_cycles_per_tile = 0;     // inner compute at II=1
  std::int64_t array_drain_per_tile = 0;   // systolic wavefront depth
  std::int64_t compute_per_tile = 0;       // pe_cycles + array_drain
  std::int64_t total_compute = 0;
  std::int64_t prologue = 0;  // first tile load
  std::int64_t steady = 0;    // sum over tiles of max(compute, next load, previous drain)
  std::int64_t epilogue = 0;  // last tile drain
};

struct PerfEstimate {
  std::int64_t latency_cycles = 0;
  std::array<ArrayTraffic, kMaxArrays> arrays{};
  std::size_t num_arrays = 0;
  std::int64_t pe_count = 0;
  std::int64_t pe_bram = 0;
  std::int64_t bram_used = 0;
  std::int64_t dsp_used = 0;
  bool feasible = false;
  LatencyBreakdown breakdown;

  std::int64_t dm(std::size_t a) const { return arrays[a].dm; }
  std::int64_t total_dm() const {
    std::int64_t s = 0;
    for (std::size_t a = 0; a < num_arrays; ++a) s += arrays[a].dm;
    return s;
  }
  std::int64_t max_io_cycles() const {
    std::int64_t m = 0;
    for (std::size_t a = 0; a < num_arrays; ++a) m = std::max(m, arrays[a].total_io_cycles);
    return m;
  }
  /// max(total compute, every array's total I/O): the overlap-only model.
  std::int64_t max_model_latency() const { return std::max(breakdown.total_compute, max_io_cycles()); }
};

/// Ordering/dataflow-dependent structure of one DesignSpec, independent of tiling.
struct SpecLayout {
  struct ArrayInfo {
    LoopSet member;    // RL(a) plus loops not indexing a
    LoopSet indexing;
    LoopSet flow;
    bool output = false;
    bool simd_banked = false;
    int io_loop = -1;  // space loop whose PE count sets the number of I/O modules
    int element_bits = 32;
  };

  std::size_t num_loops = 0;
  std::size_t num_arrays = 0;
  LoopSet space;
  LoopSet parallel;
  LoopId simd_loop = 0;
  std::array<ArrayInfo, kMaxArrays> arrays{};
  std::array<LoopId, kMaxLoops> order{};
  std::array<LoopId, 2> space_loops{};
  std::size_t num_space = 0;
  LoopSet acc_loops;  // loops indexing the output (accumulator buffer dims)

  SpecLayout() = default;
  SpecLayout(const Workload& w, const DesignSpec& spec) {
    num_loops = w.num_loops();
    num_arrays = w.arrays.size();
    if (num_arrays > kMaxArrays) throw ValidationError("too many array references");
    if (spec.ordering.size != num_loops) throw ValidationError("ordering does not cover the workload's loops");
    space = spec.dataflow.set();
    parallel = w.parallel_loops();
    simd_loop = w.simd_loop;
    num_space = spec.dataflow.count;
    for (std::size_t s = 0; s < num_space; ++s) space_loops[s] = spec.dataflow.loops[s];
    for (std::size_t pos = 0; pos < num_loops; ++pos) order[pos] = spec.ordering.order[pos];
    for (std::size_t a = 0; a < num_arrays; ++a) {
      const auto& ref = w.arrays[a];
      auto& info = arrays[a];
      info.indexing = ref.indexing();
      info.member = ref.carried() | w.all_loops().minus(info.indexing);
      info.flow = ref.carried_flow;
      info.output = ref.is_output();
      info.simd_banked = info.indexing.contains(w.simd_loop);
      for (std::size_t s = 0; s < num_space; ++s)
        if (info.indexing.contains(space_loops[s])) info.io_loop = static_cast<int>(space_loops[s]);
      info.element_bits = ref.element_bits;
      if (info.output) acc_loops = acc_loops | info.indexing;
    }
  }

  /// Innermost run of loops that keep array `a`'s tile on chip. Structural:
  /// the generated nest does not specialize on trip counts.
  LoopSet reuse_suffix(std::size_t a) const {
    LoopSet s;
    for (std::size_t pos = num_loops; pos-- > 0;) {
      LoopId l = order[pos];
      if (!arrays[a].member.contains(l)) break;
      s.insert(l);
    }
    return s;
  }

  /// A flow loop above a non-member loop sends partial results off chip
  /// and brings them back.
  bool reloads(std::size_t a) const {
    bool seen_flow = false;
    for (std::size_t pos = 0; pos < num_loops; ++pos) {
      LoopId l = order[pos];
      if (seen_flow && !arrays[a].member.contains(l)) return true;
      if (arrays[a].flow.contains(l)) seen_flow = true;
    }
    return false;
  }
};

/// Tiling-dependent quantities that depend on t1 only.
struct TileState {
  TileVec trips{};
  std::int64_t tiles = 1;
  std::array<ArrayTraffic, kMaxArrays> arrays{};
};

namespace detail {
inline std::int64_t multiples_in(std::int64_t p, std::int64_t lo, std::int64_t hi) {
  if (hi < lo) return 0;
  return hi / p - (lo - 1) / p;
}
}  // namespace detail

/// Precomputed evaluator for one (workload, spec, device).
class Evaluator {
 public:
  Evaluator(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev)
      : w_(&w), spec_(spec), dev_(&dev), layout_(w, spec) {
    auto it = dev.dsp_cost_table.find("mac:" + w.data_type);
    mac_dsp_ = it == dev.dsp_cost_table.end() ? -1 : it->second;
  }

  const SpecLayout& layout() const { return layout_; }
  const DesignSpec& spec() const { return spec_; }
  const Workload& workload() const { return *w_; }
  const DeviceBudget& device() const { return *dev_; }

  TileState prepare(const TileVec& t1) const {
    TileState s;
    s.trips.fill(1);
    for (LoopId l = 0; l < layout_.num_loops; ++l) {
      s.trips[l] = ceil_div(w_->extent(l), t1[l]);
      s.tiles *= s.trips[l];
    }
    std::span<const std::int64_t> tiles(t1.data(), layout_.num_loops);
    const std::int64_t l1_bits = std::min(dev_->dram_port_bits, dev_->l1_pack_bytes * 8);
    const std::int64_t l2_bits = std::min(dev_->dram_port_bits, dev_->l2_pack_bytes * 8);
    for (std::size_t a = 0; a < layout_.num_arrays; ++a) {
      const auto& info = layout_.arrays[a];
      auto& t = s.arrays[a];
      t.footprint = w_->arrays[a].tile_footprint(tiles);
      const LoopSet suffix = layout_.reuse_suffix(a);
      const bool reloads = layout_.reloads(a);
      t.period = 1;
      for (LoopId l = 0; l < layout_.num_loops; ++l)
        if (suffix.contains(l)) t.period *= s.trips[l];
      t.transfers = s.tiles / t.period;
      t.reloads_intermediate = reloads;
      t.level = info.output && reloads ? IoLevel::L1 : IoLevel::L2;
      const std::int64_t bw = t.level == IoLevel::L1 ? l1_bits : l2_bits;
      const std::int64_t cycles = ceil_div(t.footprint * info.element_bits, bw);
      t.load_cycles = (!info.output || reloads) ? cycles : 0;
      t.drain_cycles = info.output ? cycles : 0;
      t.dm = t.transfers * t.footprint * (reloads ? 2 : 1);
      t.total_io_cycles = t.transfers * (t.load_cycles + t.drain_cycles);
    }
    return s;
  }

  std::int64_t space_pe(const DesignPoint& p, LoopId l) const {
    std::int64_t pe = p.t1[l];
    if (layout_.parallel.contains(l)) pe /= p.t2[l];
    if (l == layout_.simd_loop) pe /= p.t3;
    return pe;
  }

  std::int64_t pe_count(const DesignPoint& p) const {
    std::int64_t n = 1;
    for (std::size_t s = 0; s < layout_.num_space; ++s) n *= space_pe(p, layout_.space_loops[s]);
    return n;
  }

  /// DSPs per SIMD lane of the MAC; throws when the device has no entry.
  std::int64_t mac_dsp() const {
    if (mac_dsp_ < 0) return dev_->dsp_cost("mac", w_->data_type);
    return mac_dsp_;
  }

  std::int64_t dsp(const DesignPoint& p) const { return pe_count(p) * p.t3 * mac_dsp(); }

  /// Fills the compute fields of `b` (tiles must already be set).
  void compute(const DesignPoint& p, LatencyBreakdown& b) const {
    std::int64_t pe_cycles = 1, depth = 0;
    for (LoopId l = 0; l < layout_.num_loops; ++l) {
      if (layout_.space.contains(l)) {
        if (layout_.parallel.contains(l)) pe_cycles *= p.t2[l];
        depth += space_pe(p, l);
      } else {
        pe_cycles *= l == layout_.simd_loop ? p.t1[l] / p.t3 : p.t1[l];
      }
    }
    b.pe_cycles_per_tile = pe_cycles;
    b.array_drain_per_tile = depth;
    b.compute_per_tile = pe_cycles + depth;
    b.total_compute = b.compute_per_tile * b.tiles;
  }

  /// BRAM blocks; fills per-array module fields of `s` and returns the PE share in `pe_bram`.
  std::int64_t bram(const DesignPoint& p, TileState& s, std::int64_t& pe_bram) const {
    const std::int64_t block = dev_->bram_block_bits;
    std::int64_t total = 0;
    for (std::size_t a = 0; a < layout_.num_arrays; ++a) {
      const auto& info = layout_.arrays[a];
      auto& t = s.arrays[a];
      t.io_modules = info.io_loop >= 0 ? space_pe(p, static_cast<LoopId>(info.io_loop)) : 1;
      const std::int64_t banks = info.simd_banked ? p.t3 : 1;
      const std::int64_t per_module = ceil_div(t.footprint, t.io_modules);
      const std::int64_t bank_bits = ceil_div(per_module, banks) * info.element_bits;
      const std::int64_t per_buffer = banks * ceil_div(bank_bits, block);
      t.io_bram = t.io_modules * 2 * per_buffer;  // ping-pong
      t.reload_bram = t.reloads_intermediate ? t.io_bram : 0;
      total += t.io_bram + t.reload_bram;
    }
    std::int64_t acc = 1;
    for (LoopId l = 0; l < layout_.num_loops; ++l)
      if (layout_.acc_loops.contains(l) && layout_.parallel.contains(l)) acc *= p.t2[l];
    std::int64_t acc_bits = 0;
    for (std::size_t a = 0; a < layout_.num_arrays; ++a)
      if (layout_.arrays[a].output) acc_bits = acc * layout_.arrays[a].element_bits;
    pe_bram = pe_count(p) * ceil_div(acc_bits, block);
    return total + pe_bram;
  }

  /// Double-buffered tile pipeline latency; fills prologue/steady/epilogue.
  std::int64_t pipeline_latency(const TileState& s, LatencyBreakdown& b) const {
    const std::size_t na = layout_.num_arrays;
    const std::int64_t n = s.tiles;
    // distinct periods, ascending; each divides the next (nested suffixes)
    std::array<std::int64_t, kMaxArrays> periods{};
    std::size_t np = 0;
    for (std::size_t a = 0; a < na; ++a) {
      auto p = s.arrays[a].period;
      if (std::find(periods.begin(), periods.begin() + np, p) == periods.begin() + np) periods[np++] = p;
    }
    std::sort(periods.begin(), periods.begin() + np);
    std::array<std::size_t, kMaxArrays> rank{};
    for (std::size_t a = 0; a < na; ++a)
      rank[a] = static_cast<std::size_t>(std::find(periods.begin(), periods.begin() + np, s.arrays[a].period) -
                                         periods.begin()) + 1;
    // level(m) = largest k with periods[k-1] | m; 0 when none
    auto level = [&](std::int64_t m) -> std::size_t {
      for (std::size_t k = np; k > 0; --k)
        if (m % periods[k - 1] == 0) return k;
      return 0;
    };
    auto step = [&](std::size_t load_level, std::size_t drain_level) {
      std::int64_t c = b.compute_per_tile;
      for (std::size_t a = 0; a < na; ++a) {
        std::int64_t io = 0;
        if (rank[a] <= load_level) io += s.arrays[a].load_cycles;
        if (rank[a] <= drain_level) io += s.arrays[a].drain_cycles;
        c = std::max(c, io);
      }
      return c;
    };

    b.prologue = 0;
    b.epilogue = 0;
    for (std::size_t a = 0; a < na; ++a) {
      b.prologue = std::max(b.prologue, s.arrays[a].load_cycles);
      b.epilogue = std::max(b.epilogue, s.arrays[a].drain_cycles);
    }
    if (n == 1) {
      b.steady = step(0, 0);
    } else {
      const std::size_t base = periods[0] == 1 ? 1 : 0;
      b.steady = step(base, 0) + step(0, level(n - 1));
      if (n >= 3) {
        // middle tiles c in [1, n-2]: load of tile c+1, drain of tile c-1.
        // Two consecutive integers cannot share a period > 1, so at most one
        // side is above the base level.
        std::int64_t rest = n - 2;
        for (std::size_t k = base + 1; k <= np; ++k) {
          auto exact = [&](std::int64_t lo, std::int64_t hi) {
            std::int64_t c = detail::multiples_in(periods[k - 1], lo, hi);
            if (k < np) c -= detail::multiples_in(periods[k], lo, hi);
            return c;
          };
          std::int64_t loads = exact(2, n - 1);
          std::int64_t drains = exact(1, n - 2);
          b.steady += loads * step(k, base) + drains * step(base, k);
          rest -= loads + drains;
        }
        b.steady += rest * step(base, base);
      }
    }
    return b.prologue + b.steady + b.epilogue;
  }

  PerfEstimate evaluate(const DesignPoint& p) const {
    PerfEstimate e;
    TileState s = prepare(p.t1);
    e.num_arrays = layout_.num_arrays;
    e.pe_count = pe_count(p);
    e.dsp_used = e.pe_count * p.t3 * mac_dsp();
    e.bram_used = bram(p, s, e.pe_bram);
    e.breakdown.tiles = s.tiles;
    compute(p, e.breakdown);
    e.latency_cycles = pipeline_latency(s, e.breakdown);
    e.arrays = s.arrays;
    e.feasible = e.bram_used <= dev_->bram_blocks_available && e.dsp_used <= dev_->dsp_available;
    return e;
  }

 private:
  const Workload* w_;
  DesignSpec spec_;
  const DeviceBudget* dev_;
  SpecLayout layout_;
  std::int64_t mac_dsp_;
};

// ------------------------------------------------------------ free functions

inline PerfEstimate evaluate(const Workload& w, const DesignPoint& p, const DeviceBudget& dev) {
  return Evaluator(w, p.spec, dev).evaluate(p);
}

/// Off-chip elements moved for array `a`. Independent of device widths.
inline std::int64_t data_movement(const Workload& w, const DesignPoint& p, std::size_t a) {
  const DeviceBudget dev = u250_like();
  return Evaluator(w, p.spec, dev).prepare(p.t1).arrays[a].dm;
}

inline std::int64_t data_movement(const Workload& w, const DesignPoint& p, std::string_view array) {
  return data_movement(w, p, w.array_index(array));
}

inline LatencyBreakdown compute_latency(const Workload& w, const DesignPoint& p) {
  const DeviceBudget dev = u250_like();
  Evaluator ev(w, p.spec, dev);
  LatencyBreakdown b;
  b.tiles = ev.prepare(p.t1).tiles;
  ev.compute(p, b);
  return b;
}

struct IoLatency {
  std::int64_t load_cycles_per_transfer = 0;
  std::int64_t drain_cycles_per_transfer = 0;
  std::int64_t period = 1;
  std::int64_t total = 0;
  IoLevel level = IoLevel::L2;
};

inline IoLatency io_latency(const Workload& w, const DesignPoint& p, const DeviceBudget& dev, std::size_t a) {
  auto t = Evaluator(w, p.spec, dev).prepare(p.t1).arrays[a];
  return {t.load_cycles, t.drain_cycles, t.period, t.total_io_cycles, t.level};
}

/// I/O cycles of array `a` attributed to tile `tile`: loading it (if its
/// data changed) plus draining it (if it closes a reuse block). Zero when
/// the tile reuses on-chip data.
inline std::int64_t io_cycles_for_tile(const Workload& w, const DesignPoint& p, const DeviceBudget& dev,
                                       std::size_t a, std::int64_t tile) {
  auto io = io_latency(w, p, dev, a);
  std::int64_t c = 0;
  if (tile % io.period == 0) c += io.load_cycles_per_transfer;
  if ((tile + 1) % io.period == 0) c += io.drain_cycles_per_transfer;
  return c;
}

inline std::int64_t latency(const Workload& w, const DesignPoint& p, const DeviceBudget& dev) {
  return evaluate(w, p, dev).latency_cycles;
}

struct Resources {
  std::int64_t bram_used = 0;
  std::int64_t dsp_used = 0;
};

inline Resources resources(const Workload& w, const DesignPoint& p, const DeviceBudget& dev) {
  auto e = evaluate(w, p, dev);
  return {e.bram_used, e.dsp_used};
}

/// Both resource inequalities of the device hold.
inline bool feasible(const Workload& w, const DesignPoint& p, const DeviceBudget& dev) {
  auto r = resources(w, p, dev);
  return r.bram_used <= dev.bram_blocks_available && r.dsp_used <= dev.dsp_available;
}

// --------------------------------------------------------------- dominance

enum class Dominance { a_dominates, b_dominates, incomparable, equal };

inline const char* to_string(Dominance d) {
  switch (d) {
    case Dominance::a_dominates: return "a_dominates";
    case Dominance::b_dominates: return "b_dominates";
    case Dominance::incomparable: return "incomparable";
    case Dominance::equal: return "equal";
  }
  return "?";
}

/// Pareto comparison on (latency, BRAM, DSP) of one tiling under two specs.
inline Dominance dominance_witness(const Workload& w, const DesignSpec& a, const DesignSpec& b, DesignPoint point,
                                   const DeviceBudget& dev) {
  point.spec = a;
  auto ea = evaluate(w, point, dev);
  point.spec = b;
  auto eb = evaluate(w, point, dev);
  std::array<std::int64_t, 3> va{ea.latency_cycles, ea.bram_used, ea.dsp_used};
  std::array<std::int64_t, 3> vb{eb.latency_cycles, eb.bram_used, eb.dsp_used};
  bool a_le = true, b_le = true;
  for (std::size_t i = 0; i < 3; ++i) {
    a_le &= va[i] <= vb[i];
    b_le &= vb[i] <= va[i];
  }
  if (a_le && b_le) return Dominance::equal;
  if (a_le) return Dominance::a_dominates;
  if (b_le) return Dominance::b_dominates;
  return Dominance::incomparable;
}

}  // namespace sadse
