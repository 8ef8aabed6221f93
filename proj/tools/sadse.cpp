// sadse: tune, sweep and validate systolic-array mappings.
//
// Exit codes: 0 ok, 1 no feasible design, 2 configuration error,
// 3 validation failure.

#include <iostream>

#include <CLI11.hpp>

#include "sadse/checks.hpp"
#include "sadse/report.hpp"

using namespace sadse;

namespace {

enum Exit { kOk = 0, kNoFeasible = 1, kConfig = 2, kValidation = 3 };

// Flag values; applied over the config file only when given.
struct Flags {
  std::vector<std::int64_t> mm, cnn;
  std::string network, device, method, mp_objective, trace_dir, out, dataflow, ordering, config, study;
  std::uint64_t seed = 0;
  std::int64_t budget_evals = 0;
  double budget_seconds = 0, alpha = 0;
  std::size_t population = 0, workers = 1;
  bool wall_clock = false;
  std::map<std::string, CLI::Option*> opt;

  bool given(const std::string& name) const {
    auto it = opt.find(name);
    return it != opt.end() && it->second->count() > 0;
  }
};

void add_run_flags(CLI::App* app, Flags& f, bool network, bool study) {
  auto& o = f.opt;
  if (network) {
    o["network"] = app->add_option("--network", f.network, "Layer file, or vgg16 / resnet50");
  } else {
    o["mm"] = app->add_option("--mm", f.mm, "MM extents I J K")->expected(3);
    o["cnn"] = app->add_option("--cnn", f.cnn, "CNN extents I O H W P Q")->expected(6);
    // accepted so that the wrong subcommand gets a clear message
    o["network"] = app->add_option("--network", f.network, "Not valid here; use sweep-network");
  }
  o["device"] = app->add_option("--device", f.device, "Device preset (u250-like, small-test) or JSON file");
  o["method"] = app->add_option("--method", f.method, "evolve | random | exhaustive-pruned | oracle");
  o["mp-objective"] = app->add_option("--mp-objective", f.mp_objective, "obj1 | obj2 | obj3 | none");
  o["seed"] = app->add_option("--seed", f.seed, "RNG seed (required when CI is set)");
  o["budget-evals"] = app->add_option("--budget-evals", f.budget_evals, "Evaluations per spec search");
  o["budget-seconds"] = app->add_option("--budget-seconds", f.budget_seconds, "Wall-clock limit per spec search");
  o["alpha"] = app->add_option("--alpha", f.alpha, "Factorization-mutation probability");
  o["population"] = app->add_option("--population", f.population, "Population size");
  o["workers"] = app->add_option("--workers", f.workers, "Evaluation threads");
  o["trace-dir"] = app->add_option("--trace-dir", f.trace_dir, "Directory for per-spec trace CSVs");
  o["out"] = app->add_option("--out", f.out, "Output directory (report.json); stdout if absent");
  o["dataflow"] = app->add_option("--dataflow", f.dataflow, "Dataflow filter, * and ? wildcards");
  o["ordering"] = app->add_option("--ordering", f.ordering, "Ordering filter, * and ? wildcards");
  o["config"] = app->add_option("--config", f.config, "JSON config file; flags override it");
  o["wall-clock"] = app->add_flag("--wall-clock", f.wall_clock, "Fill the ms trace column");
  if (study) o["study"] = app->add_option("--study", f.study, "divisor-only | mp-only-obj1..3 | max-latency-model | full | all");
}

RunConfig build_config(const Flags& f) {
  RunConfig c;
  if (f.given("config")) load_config_file(c, f.config);
  if (f.given("mm") + f.given("cnn") + f.given("network") > 1)
    throw ConfigError("exactly one of --mm, --cnn, --network is required");
  // a workload flag replaces whatever workload the config file named
  if (f.given("mm") || f.given("cnn") || f.given("network")) {
    c.mm = f.given("mm") ? f.mm : std::vector<std::int64_t>{};
    c.cnn = f.given("cnn") ? f.cnn : std::vector<std::int64_t>{};
    c.network = f.given("network") ? f.network : std::string{};
  }
  if (f.given("device")) c.device = f.device;
  if (f.given("method")) c.method = parse_method(f.method);
  if (f.given("mp-objective")) c.mp_objective = parse_objective(f.mp_objective);
  if (f.given("seed")) {
    c.seed = f.seed;
    c.seed_source = "flag";
  }
  if (f.given("budget-evals")) c.search.max_evaluations = f.budget_evals;
  if (f.given("budget-seconds")) c.search.max_seconds = f.budget_seconds;
  if (f.given("alpha")) c.search.alpha = f.alpha;
  if (f.given("population")) c.search.population_size = f.population;
  if (f.given("workers")) c.search.workers = f.workers;
  if (f.given("trace-dir")) c.trace_dir = f.trace_dir;
  if (f.given("out")) c.out_dir = f.out;
  if (f.given("dataflow")) c.dataflow_glob = f.dataflow;
  if (f.given("ordering")) c.ordering_glob = f.ordering;
  if (f.given("wall-clock")) c.search.record_wall_clock = f.wall_clock;
  if (f.given("study")) c.study = f.study;
  return c;
}

int finish(const Report& r, const RunConfig& c) {
  write_outputs(r, c, std::cout);
  if (!r.any_feasible()) {
    std::cerr << "sadse: no feasible design in any spec\n";
    return kNoFeasible;
  }
  if (auto b = r.best()) std::cerr << "best: " << *r.specs[*b].design << " latency " << r.specs[*b].est.latency_cycles << "\n";
  return kOk;
}

int run_validate(const std::string& device) {
  if (!device.empty()) (void)load_device(device);
  bool ok = true;
  for (const auto& c : checks::run_all()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    ok &= c.passed;
  }
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-space exploration for systolic-array mappings"};
  app.require_subcommand(1);
  Flags tune_f, oracle_f, sweep_f, ablate_f;
  auto* tune = app.add_subcommand("tune", "Seed and search every matching spec of one workload");
  add_run_flags(tune, tune_f, false, false);
  auto* orc = app.add_subcommand("oracle", "Exact optimum per spec by pruned enumeration");
  add_run_flags(orc, oracle_f, false, false);
  auto* sweep = app.add_subcommand("sweep-network", "Per-layer, per-dataflow sweep of a CNN");
  add_run_flags(sweep, sweep_f, true, false);
  auto* ablate = app.add_subcommand("ablate", "Compare restricted pipelines against the full one");
  add_run_flags(ablate, ablate_f, false, true);
  std::string validate_device;
  auto* validate = app.add_subcommand("validate", "Run the bundled invariant checks");
  validate->add_option("--device", validate_device, "Also load and check this device description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*validate) return run_validate(validate_device);
    if (*tune) {
      auto c = build_config(tune_f);
      return finish(cmd_tune(c), c);
    }
    if (*orc) {
      auto c = build_config(oracle_f);
      c.method = Method::oracle;
      return finish(cmd_tune(c, "oracle"), c);
    }
    if (*sweep) {
      auto c = build_config(sweep_f);
      return finish(cmd_sweep_network(c), c);
    }
    if (*ablate) {
      auto c = build_config(ablate_f);
      return finish(cmd_ablate(c), c);
    }
  } catch (const ConfigError& e) {
    std::cerr << "sadse: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "sadse: parse error: " << e.what() << "\n";
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "sadse: invalid input: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
