#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccbo/benchmark.hpp"

using namespace ccbo;
namespace fs = std::filesystem;

namespace {

BenchmarkConfig small_config() {
  BenchmarkConfig c;
  c.targets = {3.0};
  c.iterations = 2;
  c.repetitions = 2;
  c.mc_samples = 64;
  c.parallelism = 1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const BenchmarkResults& small_results() {
  static const BenchmarkResults r = run_benchmark(small_config());
  return r;
}

} // namespace

TEST(Benchmark, GitBlobHashKnownValues) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Benchmark, ConfigDefaultsAndJsonRoundTrip) {
  const BenchmarkConfig d;
  EXPECT_EQ(d.targets, (std::vector<double>{0.6, 3.0, 6.0, 18.0}));
  EXPECT_EQ(d.iterations, 10u);
  EXPECT_EQ(d.q, 2u);
  EXPECT_EQ(d.repetitions, 20u);
  EXPECT_EQ(d.strategies.size(), 4u);
  const BenchmarkConfig back = benchmark_config_from_json(to_json(d));
  EXPECT_EQ(canonical_config_text(back), canonical_config_text(d));
  BenchmarkConfig p = d;
  p.parallelism = 7;
  EXPECT_EQ(canonical_config_text(p), canonical_config_text(d));
}

TEST(Benchmark, ConfigErrorsNameTheField) {
  auto message = [](const nlohmann::json& j) -> std::string {
    try {
      benchmark_config_from_json(j);
    } catch (const DomainError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message({{"iterations", -1}}).find("iterations"), std::string::npos);
  EXPECT_NE(message({{"iterations", 0}}).find("iterations"), std::string::npos);
  EXPECT_NE(message({{"targets", {0.0}}}).find("targets"), std::string::npos);
  EXPECT_NE(message({{"strategies", {"annealing"}}}).find("annealing"), std::string::npos);
  EXPECT_NE(message({{"repetitons", 3}}).find("repetitons"), std::string::npos);
  EXPECT_NE(message({{"start", "nowhere"}}).find("start"), std::string::npos);
  EXPECT_NE(message({{"q", "two"}}).find("q"), std::string::npos);
  EXPECT_NE(message(nlohmann::json::array()), "");
}

TEST(Benchmark, StartDataIsEvaluatedByTheOracle) {
  const auto obs = start_observations("table2-start", electrospray_space(), SimConfig{});
  ASSERT_EQ(obs.size(), 5u);
  for (const auto& o : obs) {
    const auto r = run_experiment(o.point, electrospray_space());
    EXPECT_EQ(o.size, r.size);
    EXPECT_EQ(o.feasible, r.feasible);
  }
}

TEST(Benchmark, RunShapeAndRegretMonotone) {
  const auto& res = small_results();
  ASSERT_EQ(res.runs.size(), 8u);
  for (const auto& r : res.runs) {
    ASSERT_TRUE(r.ok()) << *r.error;
    EXPECT_EQ(r.observations.size(), 5u + 2u * 2u);
    EXPECT_EQ(r.feasible_count + r.infeasible_count, 4u);
    ASSERT_EQ(r.regret.size(), 3u);
    for (std::size_t i = 1; i < r.regret.size(); ++i) EXPECT_LE(r.regret[i], r.regret[i - 1]);
    const double r0 = std::isfinite(r.regret[0]) ? r.regret[0] : res.sentinel_cap;
    EXPECT_LE(r.auc, r0 * 2.0 + 1e-12);
  }
}

TEST(Benchmark, TwentyFiveExperimentsPerDefaultRun) {
  BenchmarkConfig c = small_config();
  c.iterations = 10;
  c.strategies = {StrategyKind::Random};
  c.repetitions = 1;
  const auto res = run_benchmark(c);
  ASSERT_TRUE(res.runs[0].ok());
  EXPECT_EQ(res.runs[0].observations.size(), 25u);
  EXPECT_EQ(res.runs[0].regret.size(), 11u);
}

TEST(Benchmark, ExportIsByteIdenticalAcrossRunsAndThreads) {
  const fs::path base = fs::temp_directory_path() / "ccbo_bench_test";
  fs::remove_all(base);
  const auto a = export_results(small_results(), base / "a");
  BenchmarkConfig c = small_config();
  c.parallelism = 3;
  const auto b = export_results(run_benchmark(c), base / "b");
  for (auto member : {&ExportPaths::regret_curves, &ExportPaths::auc_summary, &ExportPaths::p_values,
                      &ExportPaths::feasibility, &ExportPaths::summary}) {
    EXPECT_EQ(slurp(a.*member), slurp(b.*member)) << (a.*member).filename();
    EXPECT_FALSE(slurp(a.*member).empty());
  }
  EXPECT_TRUE(slurp(a.regret_curves).starts_with("target,strategy,repetition,iteration,regret\n3,"));
  const auto summary = nlohmann::json::parse(slurp(a.summary));
  EXPECT_EQ(summary["config_hash"], git_blob_sha1(canonical_config_text(small_config())));
  EXPECT_TRUE(summary["p_values"]["auc"]["3"]["ccbo"].contains("random"));
  fs::remove_all(base);
}

TEST(Benchmark, PairwiseTestsCoverEveryBaseline) {
  const auto tests = pairwise_tests(small_results());
  std::size_t auc = 0, infeasible = 0;
  for (const auto& t : tests) {
    EXPECT_GE(t.p, 0.0);
    EXPECT_LE(t.p, 1.0);
    (t.metric == "auc" ? auc : infeasible)++;
  }
  EXPECT_EQ(auc, 3u);
  EXPECT_EQ(infeasible, 4u);
}

TEST(Benchmark, MeanSdDisplay) { EXPECT_EQ(format_mean_sd(2.4666, 0.851), "2.47 ± 0.85"); }
