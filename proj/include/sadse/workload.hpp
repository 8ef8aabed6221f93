#pragma once

// Rectangular loop-nest workloads (MM and single CNN layers) with the
// per-array dependence metadata consumed by the design space and models.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sadse/error.hpp"

namespace sadse {

inline constexpr std::size_t kMaxLoops = 8;

using LoopId = std::size_t;
using TileVec = std::array<std::int64_t, kMaxLoops>;

/// Small set of loop ids packed in a bitmask.
class LoopSet {
 public:
  constexpr LoopSet() = default;
  constexpr explicit LoopSet(std::uint32_t bits) : bits_(bits) {}
  constexpr LoopSet(std::initializer_list<LoopId> ids) {
    for (auto id : ids) insert(id);
  }

  constexpr void insert(LoopId id) { bits_ |= 1u << id; }
  constexpr bool contains(LoopId id) const { return (bits_ >> id) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr std::uint32_t bits() const { return bits_; }

  constexpr LoopSet operator|(LoopSet o) const { return LoopSet(bits_ | o.bits_); }
  constexpr LoopSet operator&(LoopSet o) const { return LoopSet(bits_ & o.bits_); }
  constexpr LoopSet minus(LoopSet o) const { return LoopSet(bits_ & ~o.bits_); }
  constexpr bool operator==(const LoopSet&) const = default;

  /// Members in ascending id order.
  std::vector<LoopId> ids() const {
    std::vector<LoopId> out;
    for (LoopId i = 0; i < 32; ++i)
      if (contains(i)) out.push_back(i);
    return out;
  }

 private:
  std::uint32_t bits_ = 0;
};

enum class WorkloadKind { MM, CNN };

inline std::string_view to_string(WorkloadKind k) { return k == WorkloadKind::MM ? "mm" : "cnn"; }

struct Loop {
  std::string name;
  std::int64_t extent = 1;
  bool parallel = false;  // carries no dependence of the output
};

/// One array reference. Each footprint dimension is indexed by the sum of
/// one or more loop iterators (fi[i][h+p][w+q] has dims {i}, {h,p}, {w,q}).
struct ArrayRef {
  std::string name;
  int element_bits = 32;
  std::vector<std::vector<LoopId>> dims;
  LoopSet carried_read;
  LoopSet carried_flow;

  bool is_output() const { return !carried_flow.empty(); }

  LoopSet indexing() const {
    LoopSet s;
    for (const auto& d : dims)
      for (auto l : d) s.insert(l);
    return s;
  }

  /// RL(r): loops carrying a read or flow dependence of this reference.
  LoopSet carried() const { return carried_read | carried_flow; }

  /// Elements of one on-chip tile; a dim indexed by x+y spans t_x + t_y - 1.
  std::int64_t tile_footprint(std::span<const std::int64_t> tiles) const {
    std::int64_t n = 1;
    for (const auto& d : dims) {
      std::int64_t span = 1;
      for (auto l : d) span += tiles[l] - 1;
      n *= span;
    }
    return n;
  }

  double tile_footprint(std::span<const double> tiles) const {
    double n = 1.0;
    for (const auto& d : dims) {
      double span = 1.0;
      for (auto l : d) span += tiles[l] - 1.0;
      n *= span;
    }
    return n;
  }
};

struct Workload {
  WorkloadKind kind = WorkloadKind::MM;
  std::vector<Loop> loops;
  std::vector<ArrayRef> arrays;
  LoopId simd_loop = 0;
  std::string data_type = "fp32";

  std::size_t num_loops() const { return loops.size(); }
  std::int64_t extent(LoopId l) const { return loops[l].extent; }

  LoopSet all_loops() const { return LoopSet((1u << loops.size()) - 1u); }

  LoopSet parallel_loops() const {
    LoopSet s;
    for (LoopId l = 0; l < loops.size(); ++l)
      if (loops[l].parallel) s.insert(l);
    return s;
  }

  LoopId loop_id(std::string_view name) const {
    for (LoopId l = 0; l < loops.size(); ++l)
      if (loops[l].name == name) return l;
    throw ValidationError("unknown loop '" + std::string(name) + "'");
  }

  const ArrayRef& array(std::string_view name) const {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw ValidationError("unknown array '" + std::string(name) + "'");
  }

  std::size_t array_index(std::string_view name) const {
    for (std::size_t i = 0; i < arrays.size(); ++i)
      if (arrays[i].name == name) return i;
    throw ValidationError("unknown array '" + std::string(name) + "'");
  }

  TileVec extents() const {
    TileVec e{};
    e.fill(1);
    for (LoopId l = 0; l < loops.size(); ++l) e[l] = loops[l].extent;
    return e;
  }

  /// Total iterations of the full nest (MACs).
  std::int64_t iterations() const {
    std::int64_t n = 1;
    for (const auto& l : loops) n *= l.extent;
    return n;
  }

  /// Sum of full array sizes in elements.
  std::int64_t total_array_elements() const {
    auto e = extents();
    std::int64_t n = 0;
    for (const auto& a : arrays) n += a.tile_footprint(std::span<const std::int64_t>(e.data(), loops.size()));
    return n;
  }

  std::string dims_string() const {
    std::string s;
    for (const auto& l : loops) {
      if (!s.empty()) s += ',';
      s += std::to_string(l.extent);
    }
    return s;
  }
};

namespace detail {
inline void check_extent(std::string_view name, std::int64_t v) {
  if (v < 1) throw ValidationError("extent " + std::string(name) + " must be >= 1, got " + std::to_string(v));
}
}  // namespace detail

/// C[i][j] += A[i][k] * B[k][j].
inline Workload make_mm(std::int64_t I, std::int64_t J, std::int64_t K, int element_bits = 32) {
  detail::check_extent("I", I);
  detail::check_extent("J", J);
  detail::check_extent("K", K);
  enum : LoopId { i, j, k };
  Workload w;
  w.kind = WorkloadKind::MM;
  w.loops = {{"i", I, true}, {"j", J, true}, {"k", K, false}};
  w.arrays = {
      {"A", element_bits, {{i}, {k}}, LoopSet{j}, LoopSet{}},
      {"B", element_bits, {{k}, {j}}, LoopSet{i}, LoopSet{}},
      {"C", element_bits, {{i}, {j}}, LoopSet{}, LoopSet{k}},
  };
  w.simd_loop = k;
  return w;
}

/// fo[o][h][w] += fi[i][h+p][w+q] * weights[o][i][p][q]; stride and batch 1.
inline Workload make_cnn(std::int64_t I, std::int64_t O, std::int64_t H, std::int64_t W, std::int64_t P,
                         std::int64_t Q, int element_bits = 32) {
  detail::check_extent("I", I);
  detail::check_extent("O", O);
  detail::check_extent("H", H);
  detail::check_extent("W", W);
  detail::check_extent("P", P);
  detail::check_extent("Q", Q);
  enum : LoopId { i, o, h, w, p, q };
  Workload wl;
  wl.kind = WorkloadKind::CNN;
  wl.loops = {{"i", I, false}, {"o", O, true}, {"h", H, true}, {"w", W, true}, {"p", P, false}, {"q", Q, false}};
  wl.arrays = {
      {"fi", element_bits, {{i}, {h, p}, {w, q}}, LoopSet{o}, LoopSet{}},
      {"weights", element_bits, {{o}, {i}, {p}, {q}}, LoopSet{h, w}, LoopSet{}},
      {"fo", element_bits, {{o}, {h}, {w}}, LoopSet{}, LoopSet{i, p, q}},
  };
  wl.simd_loop = i;
  return wl;
}

struct CnnLayer {
  std::string name;
  std::array<std::int64_t, 6> dims{};  // I O H W P Q

  Workload workload() const { return make_cnn(dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]); }
};

struct NetworkFile {
  std::string name;
  std::vector<CnnLayer> layers;
};

/// Parses `name I O H W P Q` records; `#` starts a comment.
inline NetworkFile parse_network(std::istream& in, std::string name = {}) {
  NetworkFile net;
  net.name = std::move(name);
  std::set<std::string> seen;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ss(line);
    CnnLayer layer;
    if (!(ss >> layer.name)) continue;
    for (auto& d : layer.dims) {
      std::string tok;
      if (!(ss >> tok)) throw ParseError("record '" + raw + "': expected 6 extents after name", lineno);
      try {
        std::size_t used = 0;
        d = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw ParseError("record '" + raw + "': bad extent '" + tok + "'", lineno);
      }
    }
    std::string extra;
    if (ss >> extra) throw ParseError("record '" + raw + "': trailing token '" + extra + "'", lineno);
    try {
      (void)layer.workload();
    } catch (const ValidationError& e) {
      throw ParseError("record '" + raw + "': " + e.what(), lineno);
    }
    if (!seen.insert(layer.name).second) throw ParseError("duplicate layer name '" + layer.name + "'", lineno);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline NetworkFile load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  auto stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find('.'));
  return parse_network(in, stem);
}

}  // namespace sadse
