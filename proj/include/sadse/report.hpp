#pragma once

// Run configuration, the study drivers behind the CLI subcommands, and the
// report/trace writers.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sadse/design_space.hpp"
#include "sadse/device.hpp"
#include "sadse/error.hpp"
#include "sadse/mp_seed.hpp"
#include "sadse/perf_model.hpp"
#include "sadse/search.hpp"
#include "sadse/workload.hpp"

#ifndef SADSE_DATA_DIR
#define SADSE_DATA_DIR "data"
#endif

namespace sadse {

inline constexpr const char* kToolName = "sadse";
inline constexpr const char* kToolVersion = "0.1.0";

using ojson = nlohmann::ordered_json;

// ------------------------------------------------------------------ config

enum class Method { evolve, random, exhaustive_pruned, oracle };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::evolve: return "evolve";
    case Method::random: return "random";
    case Method::exhaustive_pruned: return "exhaustive-pruned";
    case Method::oracle: return "oracle";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (auto m : {Method::evolve, Method::random, Method::exhaustive_pruned, Method::oracle})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + s + "' (evolve|random|exhaustive-pruned|oracle)");
}

/// `*` and `?` wildcards only; everything else is literal, brackets included.
inline bool glob_match(std::string_view pat, std::string_view s) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < s.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == s[t])) {
      ++p;
      ++t;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

struct RunConfig {
  std::vector<std::int64_t> mm;   // I J K
  std::vector<std::int64_t> cnn;  // I O H W P Q
  std::string network;            // preset name or path
  std::string device = "u250-like";
  Method method = Method::evolve;
  std::optional<Objective> mp_objective = Objective::comm_minus_comp;
  SearchConfig search;
  std::optional<std::uint64_t> seed;
  std::string seed_source;  // flag | config | entropy, filled by resolve_seed
  std::string out_dir;
  std::string trace_dir;
  std::string dataflow_glob = "*";
  std::string ordering_glob = "*";
  double dsp_floor = 0.25;
  double lattice_cap = kDefaultLatticeCap;
  std::string study = "all";

  int selectors() const { return !mm.empty() + !cnn.empty() + !network.empty(); }
};

/// Fields of a JSON config file; same names as the long flags.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto ints = [&](const char* key, std::size_t n, std::vector<std::int64_t>& out) {
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != n) throw ConfigError(std::string("config: '") + key + "' needs " + std::to_string(n) + " integers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw ConfigError(std::string("config: '") + key + "' needs integers");
      out.push_back(x.get<std::int64_t>());
    }
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mm") ints("mm", 3, c.mm);
      else if (key == "cnn") ints("cnn", 6, c.cnn);
      else if (key == "network") c.network = v.get<std::string>();
      else if (key == "device") c.device = v.get<std::string>();
      else if (key == "method") c.method = parse_method(v.get<std::string>());
      else if (key == "mp_objective") c.mp_objective = parse_objective(v.get<std::string>());
      else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
        c.seed_source = "config";
      }
      else if (key == "budget_evals") c.search.max_evaluations = v.get<std::int64_t>();
      else if (key == "budget_seconds") c.search.max_seconds = v.get<double>();
      else if (key == "alpha") c.search.alpha = v.get<double>();
      else if (key == "population") c.search.population_size = v.get<std::size_t>();
      else if (key == "elite_fraction") c.search.elite_fraction = v.get<double>();
      else if (key == "crossover_rate") c.search.crossover_rate = v.get<double>();
      else if (key == "workers") c.search.workers = v.get<std::size_t>();
      else if (key == "wall_clock") c.search.record_wall_clock = v.get<bool>();
      else if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "trace_dir") c.trace_dir = v.get<std::string>();
      else if (key == "dataflow") c.dataflow_glob = v.get<std::string>();
      else if (key == "ordering") c.ordering_glob = v.get<std::string>();
      else if (key == "dsp_floor") c.dsp_floor = v.get<double>();
      else if (key == "lattice_cap") c.lattice_cap = v.get<double>();
      else if (key == "study") c.study = v.get<std::string>();
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  apply_config_json(c, j);
}

/// An explicit seed wins; CI runs must pass one; otherwise OS entropy,
/// logged in the report.
inline void resolve_seed(RunConfig& c) {
  if (c.seed) {
    if (c.seed_source.empty()) c.seed_source = "flag";
  } else {
    if (const char* ci = std::getenv("CI"); ci && *ci && std::string(ci) != "0" && std::string(ci) != "false")
      throw ConfigError("--seed is required when CI is set");
    std::random_device rd;
    c.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    c.seed_source = "entropy";
  }
  c.search.rng_seed = *c.seed;
}

inline std::string network_path(const std::string& name) {
  if (name == "vgg16" || name == "resnet50") return std::string(SADSE_DATA_DIR) + "/" + name + ".layers";
  return name;
}

/// The workloads a config names: one for --mm / --cnn, one per layer for --network.
struct WorkloadSet {
  std::string kind;  // mm | cnn | network
  std::string network;
  std::vector<std::string> names;  // layer names; empty string for a single workload
  std::vector<Workload> workloads;
};

inline WorkloadSet resolve_workloads(const RunConfig& c) {
  if (c.selectors() != 1) throw ConfigError("exactly one of --mm, --cnn, --network is required");
  WorkloadSet s;
  try {
    if (!c.mm.empty()) {
      if (c.mm.size() != 3) throw ConfigError("--mm takes I J K");
      s.kind = "mm";
      s.names.push_back("");
      s.workloads.push_back(make_mm(c.mm[0], c.mm[1], c.mm[2]));
    } else if (!c.cnn.empty()) {
      if (c.cnn.size() != 6) throw ConfigError("--cnn takes I O H W P Q");
      s.kind = "cnn";
      s.names.push_back("");
      s.workloads.push_back(make_cnn(c.cnn[0], c.cnn[1], c.cnn[2], c.cnn[3], c.cnn[4], c.cnn[5]));
    } else {
      auto net = load_network(network_path(c.network));
      if (net.layers.empty()) throw ConfigError("network '" + c.network + "' has no layers");
      s.kind = "network";
      s.network = net.name;
      for (const auto& l : net.layers) {
        s.names.push_back(l.name);
        s.workloads.push_back(l.workload());
      }
    }
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("workload: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("network file: ") + e.what());
  }
  return s;
}

inline std::vector<DesignSpec> filtered_specs(const Workload& w, const RunConfig& c) {
  std::vector<DesignSpec> out;
  for (const auto& s : enumerate_specs(w))
    if (glob_match(c.dataflow_glob, to_string(w, s.dataflow)) && glob_match(c.ordering_glob, to_string(w, s.ordering)))
      out.push_back(s);
  if (out.empty())
    throw ConfigError("no spec matches --dataflow '" + c.dataflow_glob + "' and --ordering '" + c.ordering_glob + "'");
  return out;
}

// ------------------------------------------------------------------ report

struct ArrayEntry {
  std::string name;
  ArrayTraffic t;
};

struct SpecEntry {
  std::string spec;
  std::string layer;    // normalization group; empty for single workloads
  std::string variant;  // ablation variant name
  std::optional<std::string> design;
  PerfEstimate est;  // meaningful only with a design
  std::vector<std::string> array_names;
  std::int64_t evaluations = 0;
  std::int64_t evals_to_best = 0;
  bool complete = true;
  std::vector<std::string> mp_seeds;
  SearchTrace trace;  // written as CSV, not part of the JSON

  bool has_design() const { return design.has_value(); }
};

struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::string> row_labels;
  std::vector<std::vector<double>> values;  // NaN where missing
};

struct Report {
  std::string command;
  ojson workload;  // descriptor as written; interpreted via WorkloadSet on load
  ojson device;
  std::string method;
  std::string mp_objective;
  std::uint64_t seed = 0;
  std::string seed_source;
  ojson search;
  std::string dataflow_filter = "*", ordering_filter = "*";
  std::vector<SpecEntry> specs;
  std::optional<Table> table;

  /// Index of the lowest-latency entry with a design.
  std::optional<std::size_t> best() const {
    std::optional<std::size_t> b;
    for (std::size_t n = 0; n < specs.size(); ++n)
      if (specs[n].has_design() && (!b || specs[n].est.latency_cycles < specs[*b].est.latency_cycles)) b = n;
    return b;
  }
  bool any_feasible() const { return best().has_value(); }
};

namespace detail {

inline ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson traffic_json(const ArrayEntry& a) {
  const auto& t = a.t;
  return ojson{{"name", a.name},
               {"footprint", t.footprint},
               {"period", t.period},
               {"transfers", t.transfers},
               {"dm", t.dm},
               {"load_cycles", t.load_cycles},
               {"drain_cycles", t.drain_cycles},
               {"total_io_cycles", t.total_io_cycles},
               {"reloads_intermediate", t.reloads_intermediate},
               {"level", to_string(t.level)},
               {"io_modules", t.io_modules},
               {"io_bram", t.io_bram},
               {"reload_bram", t.reload_bram}};
}

inline ArrayEntry traffic_from(const ojson& j) {
  ArrayEntry a;
  a.name = j.at("name").get<std::string>();
  auto& t = a.t;
  t.footprint = j.at("footprint");
  t.period = j.at("period");
  t.transfers = j.at("transfers");
  t.dm = j.at("dm");
  t.load_cycles = j.at("load_cycles");
  t.drain_cycles = j.at("drain_cycles");
  t.total_io_cycles = j.at("total_io_cycles");
  t.reloads_intermediate = j.at("reloads_intermediate");
  t.level = j.at("level").get<std::string>() == "L1" ? IoLevel::L1 : IoLevel::L2;
  t.io_modules = j.at("io_modules");
  t.io_bram = j.at("io_bram");
  t.reload_bram = j.at("reload_bram");
  return a;
}

inline ojson breakdown_json(const LatencyBreakdown& b) {
  return ojson{{"tiles", b.tiles},
               {"pe_cycles_per_tile", b.pe_cycles_per_tile},
               {"array_drain_per_tile", b.array_drain_per_tile},
               {"compute_per_tile", b.compute_per_tile},
               {"total_compute", b.total_compute},
               {"prologue", b.prologue},
               {"steady", b.steady},
               {"epilogue", b.epilogue}};
}

inline LatencyBreakdown breakdown_from(const ojson& j) {
  LatencyBreakdown b;
  b.tiles = j.at("tiles");
  b.pe_cycles_per_tile = j.at("pe_cycles_per_tile");
  b.array_drain_per_tile = j.at("array_drain_per_tile");
  b.compute_per_tile = j.at("compute_per_tile");
  b.total_compute = j.at("total_compute");
  b.prologue = j.at("prologue");
  b.steady = j.at("steady");
  b.epilogue = j.at("epilogue");
  return b;
}

inline ojson table_json(const Table& t) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    ojson vals = ojson::array();
    for (double v : t.values[r]) vals.push_back(number_or_null(v));
    rows.push_back(ojson{{"label", t.row_labels[r]}, {"values", vals}});
  }
  return ojson{{"title", t.title}, {"columns", t.columns}, {"rows", rows}};
}

inline Table table_from(const ojson& j) {
  Table t;
  t.title = j.at("title");
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    t.row_labels.push_back(r.at("label"));
    std::vector<double> vals;
    for (const auto& v : r.at("values")) vals.push_back(v.is_null() ? std::nan("") : v.get<double>());
    t.values.push_back(std::move(vals));
  }
  return t;
}

}  // namespace detail

inline ojson to_json(const Report& r) {
  // normalized throughput is relative to the best latency of the entry's group
  std::map<std::string, std::int64_t> anchor;
  for (const auto& e : r.specs) {
    if (!e.has_design()) continue;
    auto [it, fresh] = anchor.emplace(e.layer, e.est.latency_cycles);
    if (!fresh) it->second = std::min(it->second, e.est.latency_cycles);
  }
  const double dsp_avail = r.device.value("dsp", 0.0), bram_avail = r.device.value("bram_blocks", 0.0);
  ojson specs = ojson::array();
  for (const auto& e : r.specs) {
    ojson s;
    s["spec"] = e.spec;
    if (!e.layer.empty()) s["layer"] = e.layer;
    if (!e.variant.empty()) s["variant"] = e.variant;
    s["design"] = e.design ? ojson(*e.design) : ojson(nullptr);
    if (e.has_design()) {
      const auto& est = e.est;
      s["feasible"] = est.feasible;
      s["latency"] = est.latency_cycles;
      s["normalized_throughput"] = static_cast<double>(anchor.at(e.layer)) / static_cast<double>(est.latency_cycles);
      s["dsp_used"] = est.dsp_used;
      s["bram_used"] = est.bram_used;
      s["dsp_utilization"] = dsp_avail > 0 ? est.dsp_used / dsp_avail : 0.0;
      s["bram_utilization"] = bram_avail > 0 ? est.bram_used / bram_avail : 0.0;
      s["pe_count"] = est.pe_count;
      s["pe_bram"] = est.pe_bram;
      s["total_dm"] = est.total_dm();
      ojson io = ojson::array();
      for (std::size_t a = 0; a < est.num_arrays; ++a) io.push_back(detail::traffic_json({e.array_names.at(a), est.arrays[a]}));
      s["arrays"] = io;
      s["breakdown"] = detail::breakdown_json(est.breakdown);
    } else {
      s["feasible"] = false;
      s["latency"] = nullptr;
    }
    s["search"] = ojson{{"evaluations", e.evaluations}, {"evals_to_best", e.evals_to_best}, {"complete", e.complete}};
    s["mp_seeds"] = e.mp_seeds;
    specs.push_back(std::move(s));
  }
  ojson j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = r.command;
  j["workload"] = r.workload;
  j["device"] = r.device;
  j["method"] = r.method;
  j["mp_objective"] = r.mp_objective;
  j["seed"] = r.seed;
  j["seed_source"] = r.seed_source;
  j["search"] = r.search;
  j["filters"] = ojson{{"dataflow", r.dataflow_filter}, {"ordering", r.ordering_filter}};
  j["specs"] = specs;
  if (auto b = r.best()) {
    const auto& e = r.specs[*b];
    ojson best{{"index", *b}, {"spec", e.spec}};
    if (!e.layer.empty()) best["layer"] = e.layer;
    if (!e.variant.empty()) best["variant"] = e.variant;
    best["design"] = *e.design;
    best["latency"] = e.est.latency_cycles;
    j["best"] = best;
  } else {
    j["best"] = nullptr;
  }
  if (r.table) j["table"] = detail::table_json(*r.table);
  return j;
}

inline std::string dump(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline Report report_from_json(const ojson& j) {
  Report r;
  try {
    r.command = j.at("command");
    r.workload = j.at("workload");
    r.device = j.at("device");
    r.method = j.at("method");
    r.mp_objective = j.at("mp_objective");
    r.seed = j.at("seed");
    r.seed_source = j.at("seed_source");
    r.search = j.at("search");
    r.dataflow_filter = j.at("filters").at("dataflow");
    r.ordering_filter = j.at("filters").at("ordering");
    for (const auto& s : j.at("specs")) {
      SpecEntry e;
      e.spec = s.at("spec");
      e.layer = s.value("layer", "");
      e.variant = s.value("variant", "");
      if (!s.at("design").is_null()) {
        e.design = s.at("design").get<std::string>();
        auto& est = e.est;
        est.feasible = s.at("feasible");
        est.latency_cycles = s.at("latency");
        est.dsp_used = s.at("dsp_used");
        est.bram_used = s.at("bram_used");
        est.pe_count = s.at("pe_count");
        est.pe_bram = s.at("pe_bram");
        const auto& io = s.at("arrays");
        if (io.size() > kMaxArrays) throw ParseError("report: too many arrays in an entry");
        est.num_arrays = io.size();
        for (std::size_t a = 0; a < io.size(); ++a) {
          auto t = detail::traffic_from(io[a]);
          e.array_names.push_back(t.name);
          est.arrays[a] = t.t;
        }
        est.breakdown = detail::breakdown_from(s.at("breakdown"));
      }
      const auto& st = s.at("search");
      e.evaluations = st.at("evaluations");
      e.evals_to_best = st.at("evals_to_best");
      e.complete = st.at("complete");
      e.mp_seeds = s.at("mp_seeds").get<std::vector<std::string>>();
      r.specs.push_back(std::move(e));
    }
    if (j.contains("table")) r.table = detail::table_from(j.at("table"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return r;
}

inline Report parse_report(const std::string& text) {
  try {
    return report_from_json(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

/// Workloads named by a report's descriptor, in entry-layer order.
inline WorkloadSet report_workloads(const Report& r) {
  WorkloadSet s;
  const auto& d = r.workload;
  s.kind = d.at("kind");
  for (const auto& l : d.at("layers")) {
    auto dims = l.at("dims").get<std::vector<std::int64_t>>();
    s.names.push_back(l.value("name", ""));
    s.workloads.push_back(dims.size() == 3 ? make_mm(dims[0], dims[1], dims[2])
                                           : make_cnn(dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]));
  }
  s.network = d.value("network", "");
  return s;
}

inline ojson workload_json(const WorkloadSet& s) {
  ojson layers = ojson::array();
  for (std::size_t n = 0; n < s.workloads.size(); ++n) {
    const auto& w = s.workloads[n];
    ojson dims = ojson::array();
    for (LoopId l = 0; l < w.num_loops(); ++l) dims.push_back(w.extent(l));
    ojson l{{"name", s.names[n]}, {"dims", dims}};
    layers.push_back(l);
  }
  ojson j{{"kind", s.kind}};
  if (!s.network.empty()) j["network"] = s.network;
  j["layers"] = layers;
  return j;
}

inline ojson search_json(const SearchConfig& c) {
  return ojson{{"population", c.population_size}, {"elite_fraction", c.elite_fraction},
               {"alpha", c.alpha},                {"crossover_rate", c.crossover_rate},
               {"budget_evals", c.max_evaluations}, {"budget_seconds", c.max_seconds},
               {"workers", c.workers},            {"wall_clock", c.record_wall_clock}};
}

// ------------------------------------------------------------------ traces

inline std::string latency_text(std::int64_t v) { return v == kInfeasible ? "inf" : std::to_string(v); }

inline void write_trace_csv(std::ostream& out, const SearchTrace& t) {
  out << "eval_idx,ms,spec,genome,latency,bram,dsp,best_latency\n";
  for (const auto& r : t.rows)
    out << r.eval_idx << ',' << r.ms << ",\"" << t.spec << "\"," << r.genome << ',' << latency_text(r.latency) << ','
        << r.bram << ',' << r.dsp << ',' << latency_text(r.best_latency) << '\n';
}

inline void write_table_csv(std::ostream& out, const Table& t) {
  out << "label";
  for (const auto& c : t.columns) out << ",\"" << c << '"';
  out << '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out << t.row_labels[r];
    for (double v : t.values[r]) {
      out << ',';
      if (std::isfinite(v)) out << nlohmann::json(v).dump();
    }
    out << '\n';
  }
}

inline std::string trace_file_name(const SpecEntry& e, std::size_t index) {
  std::string stem = e.variant.empty() ? (e.layer.empty() ? "trace" : e.layer) : e.variant;
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu.csv", index);
  return stem + buf;
}

/// Writes report.json (and table.csv) under `out_dir`, traces under
/// `trace_dir` (defaulting to `out_dir`). Without an out dir the report goes
/// to `fallback`.
inline void write_outputs(const Report& r, const RunConfig& c, std::ostream& fallback) {
  namespace fs = std::filesystem;
  auto open = [](const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    return f;
  };
  try {
    if (!c.out_dir.empty()) {
      fs::create_directories(c.out_dir);
      open(fs::path(c.out_dir) / "report.json") << dump(r);
      if (r.table) {
        auto f = open(fs::path(c.out_dir) / "table.csv");
        write_table_csv(f, *r.table);
      }
    } else {
      fallback << dump(r);
    }
    const std::string tdir = c.trace_dir.empty() ? c.out_dir : c.trace_dir;
    if (!tdir.empty()) {
      fs::create_directories(tdir);
      for (std::size_t n = 0; n < r.specs.size(); ++n) {
        if (r.specs[n].trace.rows.empty() && r.specs[n].evaluations == 0) continue;
        auto f = open(fs::path(tdir) / trace_file_name(r.specs[n], n));
        write_trace_csv(f, r.specs[n].trace);
      }
    }
  } catch (const fs::filesystem_error& e) {
    throw ConfigError(e.what());
  }
}

// ------------------------------------------------------------------ drivers

struct RunContext {
  RunConfig cfg;
  WorkloadSet set;
  DeviceBudget dev;
};

inline RunContext prepare_run(RunConfig c) {
  c.search.validate();
  if (!(c.dsp_floor >= 0)) throw ConfigError("DSP floor must be non-negative");
  resolve_seed(c);
  RunContext ctx{c, resolve_workloads(c), load_device(c.device)};
  for (const auto& w : ctx.set.workloads) (void)ctx.dev.dsp_cost("mac", w.data_type);
  return ctx;
}

inline Report report_header(const RunContext& ctx, const std::string& command) {
  Report r;
  r.command = command;
  r.workload = workload_json(ctx.set);
  r.device = device_to_json(ctx.dev);
  r.method = to_string(ctx.cfg.method);
  r.mp_objective = ctx.cfg.mp_objective ? to_string(*ctx.cfg.mp_objective) : "none";
  r.seed = *ctx.cfg.seed;
  r.seed_source = ctx.cfg.seed_source;
  r.search = search_json(ctx.cfg.search);
  r.dataflow_filter = ctx.cfg.dataflow_glob;
  r.ordering_filter = ctx.cfg.ordering_glob;
  return r;
}

inline SpecEntry entry_from(const Workload& w, const DesignSpec& spec, SearchResult res) {
  SpecEntry e;
  e.spec = to_string(w, spec);
  for (const auto& a : w.arrays) e.array_names.push_back(a.name);
  if (res.best) {
    e.design = to_string(w, *res.best);
    e.est = res.estimate;
  }
  e.evaluations = res.evaluations;
  e.evals_to_best = res.evals_to_best;
  e.complete = res.complete;
  e.trace = std::move(res.trace);
  return e;
}

/// MP seeding (evolve only) followed by the configured search on one spec.
inline SpecEntry run_spec(const Workload& w, const DesignSpec& spec, const DeviceBudget& dev, const RunConfig& c) {
  std::vector<DesignPoint> seeds;
  SearchResult res;
  switch (c.method) {
    case Method::evolve:
      if (c.mp_objective) seeds = solve(w, spec, dev, *c.mp_objective, c.search.rng_seed);
      res = evolve(w, spec, dev, c.search, seeds);
      break;
    case Method::random: res = random_search(w, spec, dev, c.search); break;
    case Method::exhaustive_pruned: res = exhaustive_pruned(w, spec, dev, c.search, c.dsp_floor); break;
    case Method::oracle: res = oracle(w, spec, dev, c.lattice_cap); break;
  }
  auto e = entry_from(w, spec, std::move(res));
  for (const auto& s : seeds) e.mp_seeds.push_back(to_string(w, s));
  return e;
}

inline Report cmd_tune(const RunConfig& cfg, const std::string& command = "tune") {
  if (!cfg.network.empty()) throw ConfigError(command + " takes --mm or --cnn; use sweep-network for --network");
  auto ctx = prepare_run(cfg);
  Report r = report_header(ctx, command);
  const auto& w = ctx.set.workloads.front();
  for (const auto& spec : filtered_specs(w, ctx.cfg)) r.specs.push_back(run_spec(w, spec, ctx.dev, ctx.cfg));
  return r;
}

inline double geo_mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0;
  for (double x : v) {
    if (!(x > 0) || !std::isfinite(x)) return std::nan("");
    s += std::log(x);
  }
  return std::exp(s / static_cast<double>(v.size()));
}

/// Every layer x every matching spec; the table holds, per layer and
/// dataflow, the best over orderings normalized to the layer's best, plus a
/// geometric-mean row.
inline Report cmd_sweep_network(const RunConfig& cfg) {
  auto ctx = prepare_run(cfg);
  if (ctx.set.kind != "network") throw ConfigError("sweep-network needs --network");
  Report r = report_header(ctx, "sweep-network");
  Table t;
  t.title = "normalized throughput per layer and dataflow";
  const auto& first = ctx.set.workloads.front();
  std::vector<Dataflow> dfs;
  for (const auto& s : filtered_specs(first, ctx.cfg)) {
    bool seen = false;
    for (const auto& d : dfs) seen |= to_string(first, d) == to_string(first, s.dataflow);
    if (!seen) dfs.push_back(s.dataflow);
  }
  for (const auto& d : dfs) t.columns.push_back(to_string(first, d));
  for (std::size_t n = 0; n < ctx.set.workloads.size(); ++n) {
    const auto& w = ctx.set.workloads[n];
    std::vector<std::int64_t> best(dfs.size(), kInfeasible);
    for (const auto& spec : filtered_specs(w, ctx.cfg)) {
      auto e = run_spec(w, spec, ctx.dev, ctx.cfg);
      e.layer = ctx.set.names[n];
      for (std::size_t d = 0; d < dfs.size(); ++d)
        if (e.has_design() && to_string(w, spec.dataflow) == t.columns[d])
          best[d] = std::min(best[d], e.est.latency_cycles);
      r.specs.push_back(std::move(e));
    }
    const auto anchor = *std::min_element(best.begin(), best.end());
    std::vector<double> row;
    for (auto b : best)
      row.push_back(b == kInfeasible ? std::nan("") : static_cast<double>(anchor) / static_cast<double>(b));
    t.row_labels.push_back(ctx.set.names[n]);
    t.values.push_back(std::move(row));
  }
  std::vector<double> gm;
  for (std::size_t d = 0; d < dfs.size(); ++d) {
    std::vector<double> col;
    for (const auto& row : t.values) col.push_back(row[d]);
    gm.push_back(geo_mean(col));
  }
  t.row_labels.push_back("geo-mean");
  t.values.push_back(std::move(gm));
  r.table = std::move(t);
  return r;
}

inline const std::vector<std::string>& ablation_studies() {
  static const std::vector<std::string> names{"divisor-only", "mp-only-obj1", "mp-only-obj2",
                                              "mp-only-obj3", "max-latency-model", "full"};
  return names;
}

/// Best entry of one restricted pipeline over all matching specs.
inline SpecEntry run_variant(const RunContext& ctx, const std::string& name) {
  const auto& w = ctx.set.workloads.front();
  const auto specs = filtered_specs(w, ctx.cfg);
  const auto& dev = ctx.dev;
  RunConfig c = ctx.cfg;
  c.method = Method::evolve;
  if (name.rfind("mp-only-", 0) == 0) {
    auto o = *parse_objective(name.substr(8));
    SpecEntry e;
    if (auto p = standalone_best(w, specs, dev, o, c.search.rng_seed)) {
      SearchResult res;
      res.best = *p;
      res.estimate = evaluate(w, *p, dev);
      e = entry_from(w, p->spec, std::move(res));
    } else {
      e.spec = "none";
    }
    e.variant = name;
    return e;
  }
  if (name == "divisor-only") {
    c.search.alpha = 1.0;
    c.mp_objective.reset();
  } else if (name == "max-latency-model") {
    c.search.fitness_model = FitnessModel::max_model;
  } else if (name != "full") {
    throw ConfigError("unknown study '" + name + "'");
  }
  // the winner is picked by the search's own fitness, then reported under the full model
  std::optional<SpecEntry> best;
  std::int64_t best_fit = kInfeasible;
  std::int64_t total_evals = 0;
  for (const auto& spec : specs) {
    std::vector<DesignPoint> seeds;
    if (c.mp_objective) seeds = solve(w, spec, dev, *c.mp_objective, c.search.rng_seed);
    auto res = evolve(w, spec, dev, c.search, seeds);
    total_evals += res.evaluations;
    const auto fit = res.fitness.latency;
    if (res.best && (!best || fit < best_fit)) {
      best_fit = fit;
      best = entry_from(w, spec, std::move(res));
      for (const auto& s : seeds) best->mp_seeds.push_back(to_string(w, s));
    }
  }
  SpecEntry e = best ? std::move(*best) : SpecEntry{};
  if (!best) e.spec = "none";
  e.variant = name;
  e.evaluations = total_evals;
  return e;
}

inline Report cmd_ablate(const RunConfig& cfg) {
  std::vector<std::string> names;
  if (cfg.study == "all") names = ablation_studies();
  else if (std::find(ablation_studies().begin(), ablation_studies().end(), cfg.study) != ablation_studies().end())
    names = {cfg.study};
  else throw ConfigError("unknown study '" + cfg.study + "'");
  if (!cfg.network.empty()) throw ConfigError("ablate takes --mm or --cnn");
  auto ctx = prepare_run(cfg);
  Report r = report_header(ctx, "ablate");
  for (const auto& n : names) r.specs.push_back(run_variant(ctx, n));
  Table t;
  t.title = "ablation: latency, throughput and DSP per variant";
  t.columns = {"latency", "normalized_throughput", "dsp", "dsp_utilization"};
  std::int64_t anchor = kInfeasible;
  for (const auto& e : r.specs)
    if (e.has_design()) anchor = std::min(anchor, e.est.latency_cycles);
  const double dsp = static_cast<double>(ctx.dev.dsp_available);
  for (const auto& e : r.specs) {
    t.row_labels.push_back(e.variant);
    if (!e.has_design()) {
      t.values.push_back(std::vector<double>(4, std::nan("")));
      continue;
    }
    const double lat = static_cast<double>(e.est.latency_cycles);
    t.values.push_back({lat, static_cast<double>(anchor) / lat, static_cast<double>(e.est.dsp_used),
                        static_cast<double>(e.est.dsp_used) / dsp});
  }
  r.table = std::move(t);
  return r;
}

}  // namespace sadse
