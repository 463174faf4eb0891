// ccbo: benchmark, simulate, init, suggest, serve, fixtures.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "ccbo/ccbo.hpp"
#include "ccbo/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

/// Thrown for anything the user can fix by changing arguments or inputs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

ccbo::DesignSpace load_space(const std::string& path) {
  if (path.empty()) return ccbo::electrospray_space();
  try {
    return ccbo::design_space_from_json(read_json_file(path));
  } catch (const ccbo::DomainError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

ccbo::SimConfig load_sim(const std::string& path) {
  if (path.empty()) return {};
  try {
    return ccbo::sim_config_from_json(read_json_file(path));
  } catch (const ccbo::DomainError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// ---- bench ------------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::string out = "bench-out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism, repetitions, iterations;
  std::vector<double> targets;
  std::vector<std::string> strategies;
  bool quiet = false;
};

int run_bench(const BenchArgs& a) {
  ccbo::BenchmarkConfig cfg;
  try {
    if (!a.config.empty()) cfg = ccbo::benchmark_config_from_json(read_json_file(a.config));
    if (a.seed) cfg.base_seed = *a.seed;
    if (a.parallelism) cfg.parallelism = *a.parallelism;
    if (a.repetitions) cfg.repetitions = *a.repetitions;
    if (a.iterations) cfg.iterations = *a.iterations;
    if (!a.targets.empty()) cfg.targets = a.targets;
    if (!a.strategies.empty()) {
      cfg.strategies.clear();
      for (const auto& s : a.strategies) cfg.strategies.push_back(ccbo::parse_strategy(s));
    }
    cfg.validate();
  } catch (const ccbo::DomainError& e) {
    throw UsageError((a.config.empty() ? std::string("config") : a.config) + ": " + e.what());
  }

  const auto results = ccbo::run_benchmark(
      cfg, [&](const ccbo::RunResult& r, std::size_t done, std::size_t total) {
        if (a.quiet) return;
        std::cerr << "[" << done << "/" << total << "] " << ccbo::to_string(r.strategy)
                  << " target=" << ccbo::format_number(r.target) << " rep=" << r.repetition;
        if (r.ok()) {
          std::cerr << " auc=" << ccbo::format_number(r.auc);
        } else {
          std::cerr << " FAILED: " << *r.error;
        }
        std::cerr << '\n';
      });
  const auto paths = ccbo::export_results(results, a.out);

  std::cout << "target,strategy,auc (mean ± sd),n\n";
  for (const auto& s : ccbo::summarize_auc(results)) {
    std::cout << ccbo::format_number(s.target) << ',' << ccbo::to_string(s.strategy) << ','
              << ccbo::format_mean_sd(s.mean, s.sd) << ',' << s.n << '\n';
  }
  std::size_t failures = 0;
  for (const auto& r : results.runs) failures += r.ok() ? 0 : 1;
  std::cerr << "wrote " << paths.summary.parent_path().string() << " (" << results.runs.size()
            << " runs, " << failures << " failed)\n";
  return failures == results.runs.size() ? kRuntime : kOk;
}

// ---- simulate -----------------------------------------------------------------------

struct SimArgs {
  double c = 0, q = 0, u = 0;
  std::string solvent;
  std::string sim_config;
  std::optional<double> size_log_base, feas_log_base;
  bool json = false;
};

int run_simulate(const SimArgs& a) {
  ccbo::SimConfig sim = load_sim(a.sim_config);
  if (a.size_log_base) sim.size_log_base = *a.size_log_base;
  if (a.feas_log_base) sim.feas_log_base = *a.feas_log_base;
  const ccbo::DesignSpace space = ccbo::electrospray_space();
  ccbo::SimResult r;
  try {
    sim.validate();
    const ccbo::ElectrosprayInput in{a.c, a.q, a.u, ccbo::canonical_solvent(a.solvent)};
    r = ccbo::run_experiment(in.to_point(), space, sim);
  } catch (const ccbo::DomainError& e) {
    throw UsageError(e.what());
  }
  if (a.json) {
    std::cout << nlohmann::json{{"size", r.size}, {"feasible", r.feasible}, {"config", ccbo::to_json(sim)}}.dump(2)
              << '\n';
    return kOk;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r.size);
  std::cout << "size: " << buf << " um\n"
            << "feasible: " << (r.feasible ? "true" : "false") << '\n'
            << "config: " << ccbo::to_json(sim).dump() << '\n';
  return kOk;
}

// ---- init / suggest / fixtures ------------------------------------------------------

int run_init(std::size_t n, std::uint64_t seed, const std::string& space_path) {
  const ccbo::DesignSpace space = load_space(space_path);
  if (n < 1) throw UsageError("-n must be >= 1");
  std::vector<ccbo::CsvRow> rows;
  std::size_t k = 0;
  for (const auto& p : ccbo::sobol_sample(space, n, seed)) {
    rows.push_back({"0-" + std::to_string(++k), p, std::nullopt, std::nullopt});
  }
  ccbo::write_csv(std::cout, space, rows);
  return kOk;
}

struct SuggestArgs {
  std::string history;
  std::optional<double> target;
  std::string strategy = "ccbo";
  std::size_t q = 2;
  std::uint64_t seed = 0;
  std::string space;
  std::size_t mc_samples = 512;
};

int run_suggest(const SuggestArgs& a) {
  ccbo::CampaignState st;
  st.space = load_space(a.space);
  try {
    st.strategy = ccbo::parse_strategy(a.strategy);
  } catch (const ccbo::DomainError& e) {
    throw UsageError(e.what());
  }
  std::ifstream f(a.history);
  if (!f) throw UsageError("cannot read '" + a.history + "'");
  try {
    st.observations = ccbo::to_observations(ccbo::read_csv(f, st.space, true));
  } catch (const ccbo::CsvError& e) {
    throw UsageError(a.history + ": " + e.what());
  }
  if (a.target) {
    st.target = *a.target;
  } else if (st.strategy == ccbo::StrategyKind::Random) {
    st.target = 1.0;  // unused by random sampling
  } else {
    throw UsageError("--target is required for model-based strategies");
  }
  st.seed = a.seed;
  try {
    st.validate();
  } catch (const ccbo::DomainError& e) {
    throw UsageError(e.what());
  }
  if (a.q < 1) throw UsageError("-q must be >= 1");
  ccbo::StrategyOptions opt;
  opt.mc_samples = a.mc_samples;
  ccbo::Suggestion s;
  try {
    s = ccbo::suggest(st, a.q, opt);
  } catch (const ccbo::StateError& e) {
    throw UsageError(e.what());
  }
  std::vector<ccbo::CsvRow> rows;
  for (std::size_t j = 0; j < s.points.size(); ++j) {
    rows.push_back({"s-" + std::to_string(j + 1), s.points[j], std::nullopt, std::nullopt});
  }
  ccbo::write_csv(std::cout, st.space, rows);
  return kOk;
}

int run_fixtures(const std::string& name, bool evaluate) {
  if (name.empty()) {
    for (const auto& n : ccbo::fixture_names()) std::cout << n << '\n';
    return kOk;
  }
  std::vector<ccbo::FixtureRow> rows;
  try {
    rows = ccbo::load_fixture(name);
  } catch (const ccbo::LookupError& e) {
    throw UsageError(e.what());
  }
  const ccbo::DesignSpace space = ccbo::electrospray_space();
  std::vector<ccbo::CsvRow> out;
  for (const auto& r : rows) {
    ccbo::CsvRow row{r.label, r.input.to_point(), r.size, r.feasible};
    if (evaluate) {
      const auto res = ccbo::run_experiment(row.point, space);
      row.size = res.size;
      row.feasible = res.feasible;
    }
    out.push_back(std::move(row));
  }
  ccbo::write_csv(std::cout, space, out);
  return kOk;
}

// ---- serve --------------------------------------------------------------------------

ccbo::CampaignService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int run_serve(ccbo::ServiceConfig cfg) {
  std::unique_ptr<ccbo::CampaignService> svc;
  try {
    svc = std::make_unique<ccbo::CampaignService>(cfg);
  } catch (const std::exception& e) {
    std::cerr << "ccbo serve: " << e.what() << '\n';
    return kRuntime;
  }
  for (const auto& err : svc->campaigns().load_errors()) {
    std::cerr << "ccbo serve: skipped log " << err << '\n';
  }
  if (!svc->bind()) {
    std::cerr << "ccbo serve: cannot bind " << cfg.host << ":" << cfg.port << '\n';
    return kRuntime;
  }
  g_service = svc.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "ccbo serve: listening on http://" << cfg.host << ":" << svc->port() << " (data "
            << cfg.data_dir.string() << ")" << std::endl;
  const bool ok = svc->listen_after_bind();
  g_service = nullptr;
  std::cerr << "ccbo serve: stopped" << std::endl;
  return ok ? kOk : kRuntime;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch Bayesian optimization of electrospray particle size"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "run the four-strategy benchmark and write reports");
  b->add_option("--config", bench.config, "benchmark config (JSON)")->check(CLI::ExistingFile);
  b->add_option("--out,-o", bench.out, "output directory")->capture_default_str();
  b->add_option("--seed", bench.seed, "base seed (repetition r uses base + r)");
  b->add_option("--parallelism,-j", bench.parallelism, "worker threads (0 = all cores)");
  b->add_option("--repetitions", bench.repetitions, "repetitions per (target, strategy)");
  b->add_option("--iterations", bench.iterations, "iterations per run");
  b->add_option("--targets", bench.targets, "target sizes (um)")->delimiter(',');
  b->add_option("--strategies", bench.strategies, "random,vanilla,constrained,ccbo")->delimiter(',');
  b->add_flag("--quiet", bench.quiet, "no per-run progress");

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "evaluate the synthetic oracle at one condition");
  s->add_option("-c,--concentration", sim.c, "polymer concentration (% w/v)")->required();
  s->add_option("-q,--flow-rate", sim.q, "flow rate (uL/min)")->required();
  s->add_option("-u,--voltage", sim.u, "voltage (kV)")->required();
  s->add_option("-s,--solvent", sim.solvent, "CHCl3 or DMAc")->required();
  s->add_option("--sim-config", sim.sim_config, "oracle constants (JSON)");
  s->add_option("--size-log-base", sim.size_log_base, "log base of the voltage term");
  s->add_option("--feas-log-base", sim.feas_log_base, "log base of the feasibility term");
  s->add_flag("--json", sim.json, "machine-readable output");

  std::size_t init_n = 8;
  std::uint64_t init_seed = 0;
  std::string init_space;
  auto* in = app.add_subcommand("init", "print a Sobol initial design as CSV");
  in->add_option("-n", init_n, "number of points")->capture_default_str();
  in->add_option("--seed", init_seed, "scrambling seed (0 = unscrambled)")->capture_default_str();
  in->add_option("--space", init_space, "design space (JSON); default electrospray space");

  SuggestArgs sug;
  auto* sg = app.add_subcommand("suggest", "print the next q candidates for a CSV history");
  sg->add_option("--history", sug.history, "history CSV (fixture schema)")->required();
  sg->add_option("--target,-t", sug.target, "target size (um)");
  sg->add_option("--strategy", sug.strategy, "random, vanilla, constrained or ccbo")->capture_default_str();
  sg->add_option("-q", sug.q, "batch size")->capture_default_str();
  sg->add_option("--seed", sug.seed, "seed")->capture_default_str();
  sg->add_option("--space", sug.space, "design space (JSON)");
  sg->add_option("--mc-samples", sug.mc_samples, "Monte-Carlo samples")->capture_default_str();

  ccbo::ServiceConfig svc = ccbo::ServiceConfig::from_env();
  std::string data_dir = svc.data_dir.string();
  auto* sv = app.add_subcommand("serve", "run the campaign service");
  sv->add_option("--host", svc.host, "bind address (env CCBO_BIND)")->capture_default_str();
  sv->add_option("--port,-p", svc.port, "port, 0 for any free port (env CCBO_PORT)")->capture_default_str();
  sv->add_option("--data-dir", data_dir, "event-log directory (env CCBO_DATA_DIR)")->capture_default_str();
  sv->add_option("-q,--default-q", svc.default_q, "default batch size (env CCBO_DEFAULT_Q)")->capture_default_str();
  sv->add_option("--mc-samples", svc.mc_samples, "Monte-Carlo samples (env CCBO_MC_SAMPLES)")->capture_default_str();
  sv->add_flag("--verify-replay", svc.verify_replay, "replay the event log after every mutation");

  std::string fixture;
  bool evaluate = false;
  auto* fx = app.add_subcommand("fixtures", "list bundled tables or print one as CSV");
  fx->add_option("name", fixture, "fixture name");
  fx->add_flag("--evaluate", evaluate, "fill size/feasible from the oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*b) return run_bench(bench);
    if (*s) return run_simulate(sim);
    if (*in) return run_init(init_n, init_seed, init_space);
    if (*sg) return run_suggest(sug);
    if (*sv) {
      svc.data_dir = data_dir;
      return run_serve(svc);
    }
    if (*fx) return run_fixtures(fixture, evaluate);
  } catch (const UsageError& e) {
    std::cerr << "ccbo: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "ccbo: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
