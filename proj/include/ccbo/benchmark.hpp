#pragma once

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ccbo/csv.hpp"
#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/simulator.hpp"
#include "ccbo/stats.hpp"
#include "ccbo/strategy.hpp"

namespace ccbo {

struct BenchmarkConfig {
  std::vector<double> targets{0.6, 3.0, 6.0, 18.0};
  std::size_t iterations = 10;
  std::size_t q = 2;
  std::size_t repetitions = 20;
  std::vector<StrategyKind> strategies = all_strategies();
  std::uint64_t base_seed = 0;
  std::string start = "table2-start";
  std::size_t mc_samples = 512;
  bool feasible_only_regret = true;
  /// Record the objective model's training residual on every iteration.
  bool verify_interpolation = false;
  /// Worker threads; 0 means one per hardware thread. Not part of the echo
  /// or the hash, since it cannot change results.
  std::size_t parallelism = 0;
  SimConfig sim;

  void validate() const {
    if (targets.empty()) throw DomainError("targets: need at least one target");
    for (double t : targets) {
      if (!(t > 0.0 && t <= kMaxTarget)) throw DomainError("targets: each must lie in (0, 100]");
    }
    if (iterations < 1) throw DomainError("iterations: must be >= 1");
    if (repetitions < 1) throw DomainError("repetitions: must be >= 1");
    if (q < 1) throw DomainError("q: must be >= 1");
    if (mc_samples < 1) throw DomainError("mc_samples: must be >= 1");
    if (strategies.empty()) throw DomainError("strategies: need at least one strategy");
    const auto& names = fixture_names();
    if (std::find(names.begin(), names.end(), start) == names.end()) {
      throw DomainError("start: unknown fixture '" + start + "'");
    }
    sim.validate();
  }
};

inline nlohmann::json to_json(const BenchmarkConfig& c) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  return {{"targets", c.targets},
          {"iterations", c.iterations},
          {"q", c.q},
          {"repetitions", c.repetitions},
          {"strategies", strategies},
          {"base_seed", c.base_seed},
          {"start", c.start},
          {"mc_samples", c.mc_samples},
          {"feasible_only_regret", c.feasible_only_regret},
          {"sim", to_json(c.sim)}};
}

/// Missing keys keep defaults; unknown keys are rejected by name.
inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("benchmark config must be an object");
  static const std::set<std::string> known{
      "targets", "iterations", "q", "repetitions", "strategies", "base_seed", "start",
      "mc_samples", "feasible_only_regret", "verify_interpolation", "parallelism", "sim"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw DomainError(key + ": unknown field");
  }
  BenchmarkConfig c;
  auto field = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    } catch (const nlohmann::json::exception&) {
      throw DomainError(std::string(key) + ": wrong type");
    }
  };
  auto count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw DomainError(std::string(key) + ": expected a non-negative integer");
    }
    dst = v.get<std::size_t>();
  };
  field("targets", c.targets);
  count("iterations", c.iterations);
  count("q", c.q);
  count("repetitions", c.repetitions);
  count("mc_samples", c.mc_samples);
  count("parallelism", c.parallelism);
  field("base_seed", c.base_seed);
  field("start", c.start);
  field("feasible_only_regret", c.feasible_only_regret);
  field("verify_interpolation", c.verify_interpolation);
  if (j.contains("strategies")) {
    std::vector<std::string> names;
    field("strategies", names);
    c.strategies.clear();
    for (const auto& n : names) {
      try {
        c.strategies.push_back(parse_strategy(n));
      } catch (const DomainError& e) {
        throw DomainError(std::string("strategies: ") + e.what());
      }
    }
  }
  if (j.contains("sim")) {
    try {
      c.sim = sim_config_from_json(j.at("sim"));
    } catch (const DomainError& e) {
      throw DomainError(std::string("sim: ") + e.what());
    }
  }
  c.validate();
  return c;
}

/// Content hash in the form git uses for blobs: SHA-1 of "blob <len>\0<data>".
inline std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw NumericError("sha1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

/// Canonical text of the config echo, the input to the config hash.
inline std::string canonical_config_text(const BenchmarkConfig& c) {
  return to_json(c).dump(2) + "\n";
}

/// Starting observations from a fixture; every row is evaluated with the
/// oracle so start data and campaign data come from the same function.
inline std::vector<Observation> start_observations(const std::string& fixture,
                                                   const DesignSpace& space, const SimConfig& sim) {
  std::vector<Observation> out;
  for (const auto& row : load_fixture(fixture)) {
    const DesignPoint p = row.input.to_point();
    const SimResult r = run_experiment(p, space, sim);
    out.push_back({p, r.size, r.feasible, row.label});
  }
  return out;
}

struct RunResult {
  double target = 0.0;
  StrategyKind strategy = StrategyKind::Random;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  /// Indices 0 (after the start data) through iterations. Infinite entries
  /// mean no feasible observation yet.
  std::vector<double> regret;
  std::size_t feasible_count = 0;    // proposed experiments only
  std::size_t infeasible_count = 0;
  double auc = 0.0;
  std::optional<double> max_interpolation_error;
  std::size_t exploration_fallbacks = 0;
  std::optional<std::string> error;
  std::vector<Observation> observations;

  bool ok() const { return !error.has_value(); }
};

struct BenchmarkResults {
  BenchmarkConfig config;
  double sentinel_cap = 0.0;
  std::vector<RunResult> runs;  // ordered by (target, strategy, repetition) as in config

  std::vector<const RunResult*> select(double target, StrategyKind s) const {
    std::vector<const RunResult*> out;
    for (const auto& r : runs) {
      if (r.target == target && r.strategy == s && r.ok()) out.push_back(&r);
    }
    return out;
  }

  std::vector<double> auc(double target, StrategyKind s) const {
    std::vector<double> out;
    for (const auto* r : select(target, s)) out.push_back(r->auc);
    return out;
  }

  std::vector<double> infeasible(double target, StrategyKind s) const {
    std::vector<double> out;
    for (const auto* r : select(target, s)) out.push_back(static_cast<double>(r->infeasible_count));
    return out;
  }

  /// Regret at one iteration index across successful repetitions.
  std::vector<double> regret_at(double target, StrategyKind s, std::size_t iteration) const {
    std::vector<double> out;
    for (const auto* r : select(target, s)) out.push_back(r->regret.at(iteration));
    return out;
  }
};

/// One campaign against the oracle. Failures are caught and recorded.
inline RunResult run_single(const BenchmarkConfig& cfg, const DesignSpace& space, double target,
                            StrategyKind strategy, std::size_t repetition, double sentinel_cap) {
  RunResult run;
  run.target = target;
  run.strategy = strategy;
  run.repetition = repetition;
  run.seed = cfg.base_seed + repetition;

  CampaignState state;
  state.space = space;
  state.target = target;
  state.strategy = strategy;
  state.seed = run.seed;
  state.feasible_only_regret = cfg.feasible_only_regret;

  StrategyOptions opt;
  opt.mc_samples = cfg.mc_samples;
  opt.verify_interpolation = cfg.verify_interpolation;

  try {
    state.observations = start_observations(cfg.start, space, cfg.sim);
    run.regret.push_back(regret(state));
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      const Suggestion sug = suggest(state, cfg.q, opt);
      if (sug.interpolation_error) {
        run.max_interpolation_error =
            std::max(run.max_interpolation_error.value_or(0.0), *sug.interpolation_error);
      }
      if (sug.exploration_fallback) ++run.exploration_fallbacks;
      for (std::size_t j = 0; j < sug.points.size(); ++j) {
        const SimResult r = run_experiment(sug.points[j], space, cfg.sim);
        (r.feasible ? run.feasible_count : run.infeasible_count)++;
        state.observations.push_back({sug.points[j], r.size, r.feasible,
                                      std::to_string(it + 1) + "-" + std::to_string(j + 1)});
      }
      ++state.iteration;
      run.regret.push_back(regret(state));
    }
    run.auc = auc_trapezoid(run.regret, sentinel_cap);
  } catch (const std::exception& e) {
    run.error = to_string(strategy) + " target " + format_number(target) + " repetition " +
                std::to_string(repetition) + ": " + e.what();
  }
  run.observations = std::move(state.observations);
  return run;
}

using ProgressFn = std::function<void(const RunResult&, std::size_t done, std::size_t total)>;

/// All (target, strategy, repetition) campaigns on a worker pool. Results are
/// keyed by position, so they do not depend on scheduling.
inline BenchmarkResults run_benchmark(const BenchmarkConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  const DesignSpace space = electrospray_space();
  BenchmarkResults res;
  res.config = cfg;
  res.sentinel_cap = 2.0 * max_attainable_size(space, cfg.sim);

  struct Job {
    double target;
    StrategyKind strategy;
    std::size_t repetition;
  };
  std::vector<Job> jobs;
  for (double t : cfg.targets) {
    for (auto s : cfg.strategies) {
      for (std::size_t r = 0; r < cfg.repetitions; ++r) jobs.push_back({t, s, r});
    }
  }
  res.runs.resize(jobs.size());

  std::size_t workers = cfg.parallelism;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());

  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      res.runs[i] = run_single(cfg, space, jobs[i].target, jobs[i].strategy, jobs[i].repetition,
                               res.sentinel_cap);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(res.runs[i], ++done, jobs.size());
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return res;
}

// ---- reports ----------------------------------------------------------------------

struct AucSummary {
  double target = 0.0;
  StrategyKind strategy = StrategyKind::Random;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

inline std::vector<AucSummary> summarize_auc(const BenchmarkResults& res) {
  std::vector<AucSummary> out;
  for (double t : res.config.targets) {
    for (auto s : res.config.strategies) {
      const auto a = res.auc(t, s);
      out.push_back({t, s, mean_of(a), sd_of(a), a.size()});
    }
  }
  return out;
}

/// "2.47 ± 0.85"
inline std::string format_mean_sd(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, sd);
  return buf;
}

struct PairwiseTest {
  double target = 0.0;
  std::string metric;  // "auc" or "infeasible"
  StrategyKind treatment = StrategyKind::CCBO;
  StrategyKind baseline = StrategyKind::Random;
  double u = 0.0;
  double p = 1.0;
  bool exact = false;
};

/// One-tailed tests that `treatment` has smaller AUC / fewer infeasible runs
/// than each other strategy. Constrained BO is also tested as a treatment on
/// the infeasible counts.
inline std::vector<PairwiseTest> pairwise_tests(const BenchmarkResults& res) {
  std::vector<PairwiseTest> out;
  const auto& strategies = res.config.strategies;
  auto has = [&](StrategyKind k) {
    return std::find(strategies.begin(), strategies.end(), k) != strategies.end();
  };
  auto add = [&](double t, const std::string& metric, StrategyKind a, StrategyKind b,
                 const std::vector<double>& xa, const std::vector<double>& xb) {
    if (xa.empty() || xb.empty()) return;
    const auto mw = mann_whitney_u_one_tailed(xa, xb, Alternative::less);
    out.push_back({t, metric, a, b, mw.u, mw.p, mw.exact});
  };
  for (double t : res.config.targets) {
    if (has(StrategyKind::CCBO)) {
      for (auto b : strategies) {
        if (b == StrategyKind::CCBO) continue;
        add(t, "auc", StrategyKind::CCBO, b, res.auc(t, StrategyKind::CCBO), res.auc(t, b));
      }
    }
    for (auto a : {StrategyKind::CCBO, StrategyKind::ConstrainedBO}) {
      if (!has(a)) continue;
      for (auto b : {StrategyKind::VanillaBO, StrategyKind::Random}) {
        if (!has(b)) continue;
        add(t, "infeasible", a, b, res.infeasible(t, a), res.infeasible(t, b));
      }
    }
  }
  return out;
}

struct ExportPaths {
  std::filesystem::path regret_curves, auc_summary, p_values, feasibility, summary;
};

inline nlohmann::json summary_json(const BenchmarkResults& res) {
  nlohmann::json j;
  j["config"] = to_json(res.config);
  j["config_hash"] = git_blob_sha1(canonical_config_text(res.config));
  j["regret_sentinel_cap"] = res.sentinel_cap;
  j["regret_sentinel_rule"] =
      "regret before any feasible observation is written and integrated as regret_sentinel_cap "
      "(2 x the largest attainable size)";
  nlohmann::json auc = nlohmann::json::array();
  for (const auto& a : summarize_auc(res)) {
    auc.push_back({{"target", a.target},
                   {"strategy", to_string(a.strategy)},
                   {"auc_mean", a.mean},
                   {"auc_sd", a.sd},
                   {"n", a.n},
                   {"display", format_mean_sd(a.mean, a.sd)}});
  }
  j["auc"] = auc;
  nlohmann::json pv = nlohmann::json::object();
  for (const auto& t : pairwise_tests(res)) {
    pv[t.metric][format_number(t.target)][to_string(t.treatment)][to_string(t.baseline)] = t.p;
  }
  j["p_values"] = pv;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : res.runs) {
    if (r.error) failures.push_back(*r.error);
  }
  j["failures"] = failures;
  j["runs"] = res.runs.size();
  return j;
}

/// Writes regret_curves.csv, auc_summary.csv, p_values.csv,
/// feasibility_counts.csv and summary.json into `dir`.
inline ExportPaths export_results(const BenchmarkResults& res, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  ExportPaths paths{dir / "regret_curves.csv", dir / "auc_summary.csv", dir / "p_values.csv",
                    dir / "feasibility_counts.csv", dir / "summary.json"};
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    return f;
  };
  auto cap = [&](double r) { return std::isfinite(r) ? r : res.sentinel_cap; };

  {
    auto f = open(paths.regret_curves);
    f << "target,strategy,repetition,iteration,regret\n";
    for (const auto& r : res.runs) {
      for (std::size_t i = 0; i < r.regret.size(); ++i) {
        f << format_number(r.target) << ',' << to_string(r.strategy) << ',' << r.repetition << ','
          << i << ',' << format_number(cap(r.regret[i])) << '\n';
      }
    }
  }
  {
    auto f = open(paths.auc_summary);
    f << "target,strategy,auc_mean,auc_sd,n\n";
    for (const auto& a : summarize_auc(res)) {
      f << format_number(a.target) << ',' << to_string(a.strategy) << ',' << format_number(a.mean)
        << ',' << format_number(a.sd) << ',' << a.n << '\n';
    }
  }
  {
    auto f = open(paths.p_values);
    f << "target,metric,treatment,baseline,u,p\n";
    for (const auto& t : pairwise_tests(res)) {
      f << format_number(t.target) << ',' << t.metric << ',' << to_string(t.treatment) << ','
        << to_string(t.baseline) << ',' << format_number(t.u) << ',' << format_number(t.p) << '\n';
    }
  }
  {
    auto f = open(paths.feasibility);
    f << "target,strategy,repetition,feasible,infeasible\n";
    for (const auto& r : res.runs) {
      if (!r.ok()) continue;
      f << format_number(r.target) << ',' << to_string(r.strategy) << ',' << r.repetition << ','
        << r.feasible_count << ',' << r.infeasible_count << '\n';
    }
  }
  {
    auto f = open(paths.summary);
    f << summary_json(res).dump(2) << '\n';
  }
  return paths;
}

} // namespace ccbo
