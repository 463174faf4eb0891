// Short CCBO campaign against the synthetic oracle: bundled five-point start data,
// target 3 um, three batches of two.

#include <cstdio>

#include "ccbo/ccbo.hpp"

int main() {
  const ccbo::DesignSpace space = ccbo::electrospray_space();

  ccbo::CampaignState state;
  state.space = space;
  state.target = 3.0;
  state.strategy = ccbo::StrategyKind::CCBO;
  state.seed = 7;
  state.observations = ccbo::start_observations("table2-start", space, {});

  std::printf("start regret %.3f um\n", ccbo::regret(state));
  for (int it = 0; it < 3 && !ccbo::check_stopping(state); ++it) {
    const ccbo::Suggestion s = ccbo::suggest(state, 2);
    for (const auto& p : s.points) {
      const ccbo::SimResult r = ccbo::run_experiment(p, space);
      const auto in = ccbo::ElectrosprayInput::from(p, space);
      std::printf("  c=%.2f Q=%.3f U=%.1f %-5s -> %.2f um %s\n", in.concentration, in.flow_rate,
                  in.voltage, in.solvent.c_str(), r.size, r.feasible ? "ok" : "infeasible");
      state.observations.push_back({p, r.size, r.feasible, ""});
    }
    ++state.iteration;
    std::printf("iteration %d regret %.3f um\n", state.iteration, ccbo::regret(state));
  }
  return 0;
}
