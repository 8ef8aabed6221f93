#pragma once

// Dataflows, pruned array-partitioning loop orderings, and the tiled
// DesignPoint with its legality rules.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sadse/error.hpp"
#include "sadse/workload.hpp"

namespace sadse {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// Ascending divisors of n (n >= 1).
inline std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> lo, hi;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    lo.push_back(d);
    if (d != n / d) hi.push_back(n / d);
  }
  lo.insert(lo.end(), hi.rbegin(), hi.rend());
  return lo;
}

/// Largest divisor of n that is <= cap (at least 1).
inline std::int64_t largest_divisor_at_most(std::int64_t n, std::int64_t cap) {
  if (cap >= n) return n;
  for (std::int64_t d = std::max<std::int64_t>(cap, 1); d > 1; --d)
    if (n % d == 0) return d;
  return 1;
}

/// Loops mapped to the spatial dimensions of the array, outermost first.
struct Dataflow {
  std::array<LoopId, 2> loops{};
  std::uint8_t count = 0;

  std::span<const LoopId> space() const { return {loops.data(), count}; }
  LoopSet set() const {
    LoopSet s;
    for (auto l : space()) s.insert(l);
    return s;
  }
  bool operator==(const Dataflow& o) const {
    return count == o.count && std::equal(space().begin(), space().end(), o.space().begin());
  }
};

/// Full array-partitioning loop order (outermost first). Orderings produced by
/// `prune_orderings` also carry the group split and the reference whose RL(r)
/// sits innermost; `defining_array < 0` marks an arbitrary permutation.
struct LoopOrdering {
  std::array<LoopId, kMaxLoops> order{};
  std::uint8_t size = 0;
  std::uint8_t inner_size = 0;
  int defining_array = -1;

  std::span<const LoopId> loops() const { return {order.data(), size}; }
  std::span<const LoopId> outer_group() const { return {order.data(), static_cast<std::size_t>(size - inner_size)}; }
  std::span<const LoopId> inner_group() const {
    return {order.data() + (size - inner_size), inner_size};
  }
  bool same_order(const LoopOrdering& o) const {
    return size == o.size && std::equal(loops().begin(), loops().end(), o.loops().begin());
  }
};

struct DesignSpec {
  WorkloadKind kind = WorkloadKind::MM;
  Dataflow dataflow;
  LoopOrdering ordering;
};

struct DesignPoint {
  DesignSpec spec;
  TileVec t1{};  // array partitioning, any value in [1, extent]
  TileVec t2{};  // latency hiding on parallel loops, divides t1; 1 elsewhere
  std::int64_t t3 = 1;  // SIMD lanes on the workload's SIMD loop, divides t1
};

inline Dataflow make_dataflow(const Workload& w, std::initializer_list<std::string_view> names) {
  Dataflow d;
  for (auto n : names) d.loops[d.count++] = w.loop_id(n);
  return d;
}

/// The unique dataflows of each workload kind, in a fixed order.
inline std::vector<Dataflow> enumerate_dataflows(const Workload& w) {
  if (w.kind == WorkloadKind::MM) {
    return {make_dataflow(w, {"i"}),      make_dataflow(w, {"j"}),      make_dataflow(w, {"k"}),
            make_dataflow(w, {"i", "j"}), make_dataflow(w, {"i", "k"}), make_dataflow(w, {"j", "k"})};
  }
  return {make_dataflow(w, {"o"}),      make_dataflow(w, {"h"}),      make_dataflow(w, {"w"}),
          make_dataflow(w, {"i"}),      make_dataflow(w, {"o", "h"}), make_dataflow(w, {"o", "w"}),
          make_dataflow(w, {"o", "i"}), make_dataflow(w, {"h", "w"}), make_dataflow(w, {"h", "i"}),
          make_dataflow(w, {"w", "i"})};
}

/// <NRL(r), RL(r)> with both groups in declaration order.
inline LoopOrdering ordering_for_array(const Workload& w, std::size_t array_idx) {
  LoopSet rl = w.arrays[array_idx].carried();
  LoopOrdering o;
  for (LoopId l = 0; l < w.num_loops(); ++l)
    if (!rl.contains(l)) o.order[o.size++] = l;
  for (LoopId l = 0; l < w.num_loops(); ++l)
    if (rl.contains(l)) o.order[o.size++] = l;
  o.inner_size = static_cast<std::uint8_t>(rl.size());
  o.defining_array = static_cast<int>(array_idx);
  return o;
}

/// Orderings not dominated in latency and resources: one <NRL(r), RL(r)>
/// per array reference (outputs first), duplicates removed.
inline std::vector<LoopOrdering> prune_orderings(const Workload& w) {
  std::vector<LoopOrdering> out;
  for (std::size_t r = w.arrays.size(); r-- > 0;) {
    auto o = ordering_for_array(w, r);
    bool dup = std::any_of(out.begin(), out.end(), [&](const LoopOrdering& x) { return x.same_order(o); });
    if (!dup) out.push_back(o);
  }
  return out;
}

inline LoopOrdering make_permutation(std::span<const LoopId> order) {
  LoopOrdering o;
  for (auto l : order) o.order[o.size++] = l;
  return o;
}

inline std::vector<DesignSpec> enumerate_specs(const Workload& w) {
  std::vector<DesignSpec> out;
  auto orderings = prune_orderings(w);
  for (const auto& df : enumerate_dataflows(w))
    for (const auto& o : orderings) out.push_back({w.kind, df, o});
  return out;
}

// ---------------------------------------------------------------- legality

inline bool has_latency_hiding(const Workload& w, LoopId l) { return w.loops[l].parallel; }

inline TileVec trip_counts(const Workload& w, const DesignPoint& p) {
  TileVec t{};
  t.fill(1);
  for (LoopId l = 0; l < w.num_loops(); ++l) t[l] = ceil_div(w.extent(l), p.t1[l]);
  return t;
}

inline TileVec padded_extents(const Workload& w, const DesignPoint& p) {
  auto t = trip_counts(w, p);
  for (LoopId l = 0; l < w.num_loops(); ++l) t[l] *= p.t1[l];
  return t;
}

/// Empty string when the point satisfies every DesignPoint invariant.
inline std::string validate_point(const Workload& w, const DesignPoint& p) {
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    const auto& name = w.loops[l].name;
    if (p.t1[l] < 1 || p.t1[l] > w.extent(l)) return "t1[" + name + "] out of [1, extent]";
    if (has_latency_hiding(w, l)) {
      if (p.t2[l] < 1 || p.t1[l] % p.t2[l]) return "t2[" + name + "] does not divide t1";
    } else if (p.t2[l] != 1) {
      return "t2[" + name + "] set on a loop without latency hiding";
    }
  }
  if (p.t3 < 1 || p.t1[w.simd_loop] % p.t3) return "t3 does not divide t1[" + w.loops[w.simd_loop].name + "]";
  return {};
}

inline bool is_valid(const Workload& w, const DesignPoint& p) { return validate_point(w, p).empty(); }

/// Clamps t1 into range, then snaps t2/t3 down to the largest divisor of t1
/// not above their incoming values.
inline DesignPoint repair(const Workload& w, DesignPoint p) {
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    p.t1[l] = std::clamp<std::int64_t>(p.t1[l], 1, w.extent(l));
    p.t2[l] = has_latency_hiding(w, l) ? largest_divisor_at_most(p.t1[l], p.t2[l]) : 1;
  }
  for (LoopId l = w.num_loops(); l < kMaxLoops; ++l) p.t1[l] = p.t2[l] = 1;
  p.t3 = largest_divisor_at_most(p.t1[w.simd_loop], p.t3);
  return p;
}

/// Point with every level at its smallest value.
inline DesignPoint unit_point(const Workload& w, const DesignSpec& spec) {
  DesignPoint p;
  p.spec = spec;
  p.t1.fill(1);
  p.t2.fill(1);
  p.t3 = 1;
  (void)w;
  return p;
}

// ---------------------------------------------------------- serialization

namespace detail {
inline std::string join_names(const Workload& w, std::span<const LoopId> ls) {
  std::string s;
  for (auto l : ls) {
    if (!s.empty()) s += ',';
    s += w.loops[l].name;
  }
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::int64_t parse_int(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    auto v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ParseError("bad integer '" + s + "' in " + std::string(what));
}
}  // namespace detail

inline std::string to_string(const Workload& w, const Dataflow& d) {
  return "[" + detail::join_names(w, d.space()) + "]";
}

inline std::string to_string(const Workload& w, const LoopOrdering& o) {
  if (o.defining_array < 0) return "<" + detail::join_names(w, o.loops()) + ">";
  std::string s = "<[" + detail::join_names(w, o.outer_group()) + "]";
  if (o.inner_size == 1) s += "," + w.loops[o.inner_group()[0]].name;
  else if (o.inner_size > 1) s += ",[" + detail::join_names(w, o.inner_group()) + "]";
  return s + ">";
}

inline std::string to_string(const Workload& w, const DesignSpec& s) {
  return std::string(to_string(s.kind)) + "/df=" + to_string(w, s.dataflow) + "/ord=" + to_string(w, s.ordering);
}

inline std::string to_string(const Workload& w, const DesignPoint& p) {
  std::string s = to_string(w, p.spec) + "/t1=";
  for (LoopId l = 0; l < w.num_loops(); ++l) s += (l ? "," : "") + std::to_string(p.t1[l]);
  s += "/t2=";
  bool first = true;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    if (!has_latency_hiding(w, l)) continue;
    s += (first ? "" : ",") + std::to_string(p.t2[l]);
    first = false;
  }
  return s + "/t3=" + std::to_string(p.t3);
}

inline Dataflow parse_dataflow(const Workload& w, std::string_view text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']')
    throw ParseError("dataflow must look like [i,j]: '" + std::string(text) + "'");
  Dataflow d;
  for (const auto& n : detail::split(text.substr(1, text.size() - 2), ',')) {
    if (d.count == 2) throw ParseError("dataflow with more than 2 space loops");
    d.loops[d.count++] = w.loop_id(n);
  }
  return d;
}

inline LoopOrdering parse_ordering(const Workload& w, std::string_view text) {
  if (text.size() < 2 || text.front() != '<' || text.back() != '>')
    throw ParseError("ordering must look like <[i,j],k>: '" + std::string(text) + "'");
  std::string_view body = text.substr(1, text.size() - 2);
  LoopOrdering o;
  if (body.find('[') == std::string_view::npos) {
    for (const auto& n : detail::split(body, ',')) o.order[o.size++] = w.loop_id(n);
  } else {
    // groups: "[a,b],c" or "[a,b],[c,d]" or "[a,b,c]"
    std::vector<std::vector<std::string>> groups;
    std::size_t pos = 0;
    while (pos < body.size()) {
      if (body[pos] == ',') {
        ++pos;
        continue;
      }
      if (body[pos] == '[') {
        auto close = body.find(']', pos);
        if (close == std::string_view::npos) throw ParseError("unbalanced '[' in ordering");
        groups.push_back(detail::split(body.substr(pos + 1, close - pos - 1), ','));
        pos = close + 1;
      } else {
        auto end = body.find(',', pos);
        if (end == std::string_view::npos) end = body.size();
        groups.push_back({std::string(body.substr(pos, end - pos))});
        pos = end;
      }
    }
    if (groups.empty() || groups.size() > 2) throw ParseError("ordering needs one or two groups");
    for (const auto& g : groups)
      for (const auto& n : g) o.order[o.size++] = w.loop_id(n);
    o.inner_size = groups.size() == 2 ? static_cast<std::uint8_t>(groups[1].size()) : 0;
  }
  if (o.size != w.num_loops()) throw ParseError("ordering must name every loop exactly once");
  LoopSet seen;
  for (auto l : o.loops()) seen.insert(l);
  if (seen.size() != w.num_loops()) throw ParseError("ordering repeats a loop");
  for (const auto& pruned : prune_orderings(w)) {
    if (pruned.same_order(o)) return pruned;
  }
  o.defining_array = -1;
  o.inner_size = 0;
  return o;
}

inline DesignSpec parse_spec(const Workload& w, std::string_view text) {
  auto parts = detail::split(text, '/');
  if (parts.size() < 3) throw ParseError("spec needs kind/df=.../ord=...: '" + std::string(text) + "'");
  if (parts[0] != to_string(w.kind)) throw ParseError("spec kind '" + parts[0] + "' does not match workload");
  if (parts[1].rfind("df=", 0) != 0 || parts[2].rfind("ord=", 0) != 0) throw ParseError("spec fields out of order");
  return {w.kind, parse_dataflow(w, parts[1].substr(3)), parse_ordering(w, parts[2].substr(4))};
}

inline DesignPoint parse_point(const Workload& w, std::string_view text) {
  auto parts = detail::split(text, '/');
  if (parts.size() != 6) throw ParseError("design point needs 6 '/'-separated fields: '" + std::string(text) + "'");
  DesignPoint p;
  p.spec = parse_spec(w, text);
  p.t1.fill(1);
  p.t2.fill(1);
  auto field = [&](std::size_t idx, const char* key) {
    std::string k = std::string(key) + "=";
    if (parts[idx].rfind(k, 0) != 0) throw ParseError(std::string("expected field ") + key);
    return detail::split(parts[idx].substr(k.size()), ',');
  };
  auto t1 = field(3, "t1");
  if (t1.size() != w.num_loops()) throw ParseError("t1 needs one value per loop");
  for (LoopId l = 0; l < w.num_loops(); ++l) p.t1[l] = detail::parse_int(t1[l], "t1");
  auto t2 = field(4, "t2");
  std::size_t idx = 0;
  for (LoopId l = 0; l < w.num_loops(); ++l) {
    if (!has_latency_hiding(w, l)) continue;
    if (idx >= t2.size()) throw ParseError("t2 needs one value per parallel loop");
    p.t2[l] = detail::parse_int(t2[idx++], "t2");
  }
  if (idx != t2.size()) throw ParseError("t2 needs one value per parallel loop");
  auto t3 = field(5, "t3");
  if (t3.size() != 1) throw ParseError("t3 takes one value");
  p.t3 = detail::parse_int(t3[0], "t3");
  if (auto err = validate_point(w, p); !err.empty()) throw ValidationError(err);
  return p;
}

}  // namespace sadse
