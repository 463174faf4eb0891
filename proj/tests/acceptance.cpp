// Acceptance run: one PASS/FAIL line per criterion 1-11.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "ccbo/ccbo.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "support/process.hpp"

using namespace ccbo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared benchmark runs ------------------------------------------------------

BenchmarkResults& runs_at_18() {
  static BenchmarkResults res = [] {
    BenchmarkConfig c;
    c.targets = {18.0};
    c.verify_interpolation = true;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_benchmark(c);
    std::cerr << "  [benchmark target 18: " << r.runs.size() << " runs, "
              << fmt("%.0f", elapsed_since(t0)) << " s]\n";
    return r;
  }();
  return res;
}

BenchmarkResults& ccbo_short_runs() {
  static BenchmarkResults res = [] {
    BenchmarkConfig c;
    c.targets = {0.6, 3.0, 6.0};
    c.strategies = {StrategyKind::CCBO};
    c.iterations = 5;
    c.verify_interpolation = true;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_benchmark(c);
    std::cerr << "  [benchmark CCBO targets 0.6/3/6: " << r.runs.size() << " runs, "
              << fmt("%.0f", elapsed_since(t0)) << " s]\n";
    return r;
  }();
  return res;
}

std::string failures(const BenchmarkResults& r) {
  std::string out;
  for (const auto& run : r.runs) {
    if (run.error) out += " " + *run.error + ";";
  }
  return out;
}

// ---- criteria -----------------------------------------------------------------------

Outcome strategy_ordering() {
  const auto& res = runs_at_18();
  if (const auto f = failures(res); !f.empty()) return {false, "run failures:" + f};
  const auto ccbo = res.auc(18.0, StrategyKind::CCBO);
  bool ok = ccbo.size() == 20;
  std::string d = "AUC ccbo " + format_mean_sd(mean_of(ccbo), sd_of(ccbo));
  for (auto b : {StrategyKind::Random, StrategyKind::VanillaBO, StrategyKind::ConstrainedBO}) {
    const auto base = res.auc(18.0, b);
    const auto mw = mann_whitney_u_one_tailed(ccbo, base);
    const bool lower = mean_of(ccbo) < mean_of(base);
    ok = ok && lower && mw.p < 0.01 && base.size() == 20;
    d += "; " + to_string(b) + " " + format_mean_sd(mean_of(base), sd_of(base)) +
         fmt(" (p=%.2g)", mw.p);
  }
  return {ok, d};
}

Outcome fast_convergence() {
  if (const auto f = failures(ccbo_short_runs()); !f.empty()) return {false, "run failures:" + f};
  auto median_at_5 = [](const BenchmarkResults& res, double target) {
    const auto r5 = res.regret_at(target, StrategyKind::CCBO, 5);
    return r5.size() == 20 ? median_of(r5) : std::numeric_limits<double>::infinity();
  };
  bool ok = true;
  std::string d = "median regret at iteration 5 / limit:";
  for (double t : {0.6, 3.0, 6.0, 18.0}) {
    const double med = median_at_5(t == 18.0 ? runs_at_18() : ccbo_short_runs(), t);
    ok = ok && med <= 0.05 * t;
    d += fmt(" %g um %.4g/%.4g;", t, med, 0.05 * t);
  }
  d.pop_back();
  return {ok, d};
}

Outcome feasibility_benefit() {
  const auto& res = runs_at_18();
  bool ok = true;
  std::string d = "target 18, mean infeasible:";
  for (auto s : all_strategies()) d += " " + to_string(s) + "=" + fmt("%.2f", mean_of(res.infeasible(18.0, s)));
  for (auto a : {StrategyKind::CCBO, StrategyKind::ConstrainedBO}) {
    for (auto b : {StrategyKind::VanillaBO, StrategyKind::Random}) {
      const auto xa = res.infeasible(18.0, a);
      const auto xb = res.infeasible(18.0, b);
      const auto mw = mann_whitney_u_one_tailed(xa, xb);
      ok = ok && mean_of(xa) < mean_of(xb) && mw.p < 0.05;
      d += "; " + to_string(a) + "<" + to_string(b) + fmt(" p=%.2g", mw.p);
    }
  }
  return {ok, d};
}

double closed_form_ei(double mu, double sigma, double best) {
  const double z = (mu - best) / sigma;
  return sigma * normal_pdf(z) + (mu - best) * normal_cdf(z);
}

Outcome qei_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int fails = 0;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    PosteriorGaussian post;
    post.mean = Eigen::VectorXd::Constant(1, 4.0 * u(rng) - 2.0);
    const double sigma = 0.05 + 2.0 * u(rng);
    post.covariance = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    const double best = post.mean[0] + sigma * (3.0 * u(rng) - 1.5);
    std::vector<double> est;
    for (int r = 0; r < 50; ++r) {
      const auto draws = sample_posterior(post, sobol_normal_samples(512, 1, 1000 * t + r + 1));
      est.push_back(qei(draws, best));
    }
    const double se = sd_of(est) / std::sqrt(50.0);
    const double ei = closed_form_ei(post.mean[0], sigma, best);
    const double z = std::abs(mean_of(est) - ei) / std::max(se, 1e-15);
    worst = std::max(worst, z);
    if (z > 3.0) ++fails;
  }
  return {fails <= 2, fmt("%.0f/20 outside 3 MC standard errors (worst %.2f SE)", fails, worst)};
}

Outcome qeicf_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int fails = 0;
  double worst_rel = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double s0 = 0.5 + 10.0 * u(rng);
    const double mu = s0 + 3.0 * (u(rng) - 0.5);
    const double sigma = 0.1 + 1.5 * u(rng);
    const double g = -(0.05 + 2.0 * u(rng));
    const double r = std::sqrt(-g);
    auto integrand = [&](double s) {
      const double z = (s - mu) / sigma;
      return (-(s - s0) * (s - s0) - g) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    };
    const double exact =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, s0 - r, s0 + r, 15, 1e-12);
    PosteriorGaussian post;
    post.mean = Eigen::VectorXd::Constant(1, mu);
    post.covariance = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    const double mc = qei_cf(sample_posterior(post, sobol_normal_samples(512, 1, 500 + t)), s0, g);
    const double err = std::abs(mc - exact);
    const bool ok = err <= 0.02 * std::abs(exact) || err <= 1e-4;
    if (!ok) ++fails;
    if (exact > 1e-4) worst_rel = std::max(worst_rel, err / exact);
  }
  return {fails == 0, fmt("%.0f/20 outside tolerance (worst relative error %.3g)", fails, worst_rel)};
}

Outcome gp_interpolation() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto* res : {&runs_at_18(), &ccbo_short_runs()}) {
    for (const auto& r : res->runs) {
      if (r.strategy == StrategyKind::Random) continue;
      if (!r.ok() || !r.max_interpolation_error) return {false, "run without interpolation record"};
      worst = std::max(worst, *r.max_interpolation_error);
      ++checked;
    }
  }
  return {worst < 1e-3, fmt("max residual %.3g standardized units over %.0f model-based runs", worst,
                            static_cast<double>(checked))};
}

Outcome classifier_sanity() {
  bool ok = true;
  std::string d;
  for (double v : {0.0, 0.3, 7.0}) ok = ok && probit_probability(0.0, v) == 0.5;
  const double phi1 = normal_cdf(1.0);
  ok = ok && std::abs(phi1 - 0.8413) <= 5e-5;
  d += fmt("Phi(1)=%.6f", phi1);
  EncodedBatch x;
  x.continuous.resize(10, 1);
  x.categorical.resize(10, 0);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x.continuous(i, 0) = i < 5 ? 0.1 * i : 0.1 * i + 0.1;
    y[i] = i < 5 ? -1.0 : 1.0;
  }
  const VGPModel m = fit_classifier(x, y);
  EncodedBatch q;
  q.continuous.resize(2, 1);
  q.categorical.resize(2, 0);
  q.continuous << 0.0, 1.0;
  const Eigen::VectorXd p = m.prob_feasible(q);
  ok = ok && p[0] < 0.1 && p[1] > 0.9;
  d += fmt("; deep sides %.3f / %.3f; P(mean 0)=0.5 exactly", p[0], p[1]);
  return {ok, d};
}

Outcome statistics_kernel() {
  std::size_t cases = 0, bad = 0;
  for (std::size_t m = 1; m <= 6; ++m) {
    for (std::size_t n = 1; n <= 6; ++n) {
      const std::size_t total = m + n;
      std::vector<double> all_u;
      for (unsigned mask = 0; mask < (1u << total); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        double rs = 0;
        for (std::size_t i = 0; i < total; ++i) rs += (mask >> i & 1u) ? double(i + 1) : 0.0;
        all_u.push_back(rs - double(m * (m + 1)) / 2.0);
      }
      for (unsigned mask = 0; mask < (1u << total); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < total; ++i) ((mask >> i & 1u) ? a : b).push_back(double(i));
        const auto r = mann_whitney_u_one_tailed(a, b);
        const double brute = double(std::count_if(all_u.begin(), all_u.end(),
                                                  [&](double v) { return v <= r.u; })) /
                             double(all_u.size());
        ++cases;
        if (!r.exact || std::abs(r.p - brute) > 1e-12) ++bad;
      }
    }
  }
  const double a1 = auc_trapezoid(std::vector<double>{4, 2, 0});
  const double a2 = auc_trapezoid(std::vector<double>(11, 2.0));
  const bool ok = bad == 0 && a1 == 4.0 && a2 == 20.0;
  return {ok, fmt("%.0f exhaustive cases, %.0f mismatches; AUC [4,2,0]=%g, constant 2=%g", double(cases),
                  double(bad), a1, a2)};
}

Outcome simulator_spots() {
  const auto r = run_experiment(ElectrosprayInput{3.62, 30.0, 18.0, "CHCl3"});
  bool ok = std::abs(r.size - 18.0) <= 0.01 && r.feasible;
  const double off = particle_size({2.0, 5.0, 12.0, "CHCl3"}) - particle_size({2.0, 5.0, 12.0, "DMAc"});
  ok = ok && std::abs(off - 1.0) < 1e-12;
  const double lo = std::exp(-1.4), hi = std::exp(1.4);
  const bool th = !feasible({1, lo * 0.999, 12, "CHCl3"}) && feasible({1, lo * 1.001, 12, "CHCl3"}) &&
                  feasible({1, hi * 0.999, 12, "DMAc"}) && !feasible({1, hi * 1.001, 12, "DMAc"});
  ok = ok && th;
  return {ok, fmt("size %.4f um; solvent offset %.12g; thresholds %.4f / %.4f", r.size, off, lo, hi)};
}

Outcome service_durability() {
  const fs::path data = fs::temp_directory_path() / "ccbo_acceptance_durability";
  fs::remove_all(data);
  const std::vector<std::string> cmd{CCBO_BINARY, "serve", "--port", "0", "--data-dir", data.string(),
                                     "--mc-samples", "128"};
  auto srv = testproc::Server::start(cmd, "durable1");
  if (!srv) return {false, "server did not start"};
  httplib::Client c("127.0.0.1", srv->port);
  c.set_read_timeout(300, 0);
  auto post = [&](const std::string& path, const json& body) {
    auto r = c.Post(path, body.dump(), "application/json");
    return r ? json::parse(r->body) : json();
  };
  const json created = post("/campaigns", {{"target", 18.0}, {"strategy", "ccbo"}, {"seed", 12}});
  const std::string id = created.value("id", "");
  const json init = post("/campaigns/" + id + "/initialize", {{"n", 8}});
  const DesignSpace space = electrospray_space();
  // Record 6 of 8 so pending points survive too.
  for (std::size_t i = 0; i < 6 && i < init["points"].size(); ++i) {
    const auto p = design_point_from_json(init["points"][i], space);
    const auto r = run_experiment(p, space);
    post("/campaigns/" + id + "/observations",
         {{"point", init["points"][i]}, {"size", r.size}, {"feasible", r.feasible}});
  }
  post("/campaigns/" + id + "/suggest?q=2", json::object());
  auto before_res = c.Get("/campaigns/" + id);
  if (!before_res) return {false, "snapshot request failed"};
  const json before = json::parse(before_res->body);
  srv->stop(SIGKILL);

  auto again = testproc::Server::start(cmd, "durable2");
  if (!again) return {false, "server did not restart"};
  httplib::Client c2("127.0.0.1", again->port);
  auto after_res = c2.Get("/campaigns/" + id);
  const json after = after_res ? json::parse(after_res->body) : json();
  again->stop(SIGTERM);
  fs::remove_all(data);

  std::vector<std::string> differ;
  std::set<std::string> keys;
  for (const auto& [k, _] : before.items()) keys.insert(k);
  for (const auto& [k, _] : after.items()) keys.insert(k);
  for (const auto& k : keys) {
    if (!before.contains(k) || !after.contains(k) || before[k] != after[k]) differ.push_back(k);
  }
  std::string d = fmt("%.0f fields compared", double(keys.size())) +
                  fmt(", %.0f observations, %.0f pending", double(before["history"].size()),
                      double(before["pending"].size()));
  for (const auto& k : differ) d += "; differs: " + k;
  return {differ.empty() && !keys.empty() && before["history"].size() == 6, d};
}

Outcome stopping_rule() {
  CampaignStore store;
  CreateCampaignRequest req;
  req.target = 3.0;
  const std::string id = store.create(req)["id"];
  ObservationRequest o;
  o.point = ElectrosprayInput{0.57, 3.74, 16.5, "CHCl3"}.to_point();
  o.size = 3.29;
  o.feasible = true;
  o.manual = true;
  const json v = store.observe(id, o);
  const bool ok = v["status"] == "stopped" && v["stop_reason"] == "target-reached";
  return {ok, "3.29 um vs target 3.0 -> status " + v["status"].get<std::string>()};
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"strategy ordering (AUC, target 18)", strategy_ordering},
      {"fast convergence (median regret at iteration 5)", fast_convergence},
      {"feasibility benefit (infeasible counts)", feasibility_benefit},
      {"qEI vs closed-form EI", qei_oracle},
      {"qEICF vs quadrature", qeicf_oracle},
      {"GP interpolation on every iteration", gp_interpolation},
      {"classifier sanity", classifier_sanity},
      {"statistics kernel", statistics_kernel},
      {"simulator spot values", simulator_spots},
      {"service durability across kill -9", service_durability},
      {"stopping rule", stopping_rule},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << criteria[i].first << " -- "
              << o.detail << std::endl;
  }
  if (only.empty() || only.count(1)) {
    const auto r10 = runs_at_18().regret_at(18.0, StrategyKind::CCBO, 10);
    std::cout << "INFO CCBO target 18 median regret at iteration 10: "
              << (r10.empty() ? std::string("n/a") : fmt("%.4g um", median_of(r10))) << std::endl;
  }
  std::cout << "INFO wall time " << fmt("%.0f", elapsed_since(t0)) << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
