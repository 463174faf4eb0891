#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"

namespace ccbo {

/// Constants of the synthetic electrospray oracle.
///
///   size:     s = 2 sqrt(Q c) / log_b(U) + alpha_size(solvent) + size_offset
///   feasible: log_e(Q) * alpha_feas(solvent) + feas_offset > 0
///
/// Defaults: size log base 10 (keeps an 18 um target reachable inside the
/// bounds; natural log caps s near 16.4 um) and feasibility signs CHCl3 +1,
/// DMAc -1 (CHCl3 clogs at low flow, DMAc fails at high flow). Both are
/// config fields.
struct SimConfig {
  std::map<std::string, double> alpha_size{{"CHCl3", 1.0}, {"DMAc", 0.0}};
  std::map<std::string, double> alpha_feas{{"CHCl3", 1.0}, {"DMAc", -1.0}};
  double size_offset = 0.4;
  double feas_offset = 1.4;
  double size_log_base = 10.0;
  double feas_log_base = std::exp(1.0);

  void validate() const {
    if (!(size_log_base > 1.0) || !(feas_log_base > 1.0)) {
      throw DomainError("sim config: log bases must be > 1");
    }
    if (!std::isfinite(size_offset) || !std::isfinite(feas_offset)) {
      throw DomainError("sim config: offsets must be finite");
    }
    if (alpha_size.empty() || alpha_feas.empty()) {
      throw DomainError("sim config: alpha tables must be non-empty");
    }
  }

  double size_alpha(const std::string& solvent) const { return lookup(alpha_size, solvent); }
  double feas_alpha(const std::string& solvent) const { return lookup(alpha_feas, solvent); }

private:
  static double lookup(const std::map<std::string, double>& m, const std::string& solvent) {
    const auto it = m.find(solvent);
    if (it == m.end()) throw DomainError("sim config: unknown solvent '" + solvent + "'");
    return it->second;
  }
};

inline nlohmann::json to_json(const SimConfig& c) {
  return {{"alpha_size", c.alpha_size}, {"alpha_feas", c.alpha_feas},
          {"size_offset", c.size_offset}, {"feas_offset", c.feas_offset},
          {"size_log_base", c.size_log_base}, {"feas_log_base", c.feas_log_base}};
}

/// Missing keys keep their defaults.
inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    if (j.contains("alpha_size")) c.alpha_size = j["alpha_size"].get<std::map<std::string, double>>();
    if (j.contains("alpha_feas")) c.alpha_feas = j["alpha_feas"].get<std::map<std::string, double>>();
    c.size_offset = j.value("size_offset", c.size_offset);
    c.feas_offset = j.value("feas_offset", c.feas_offset);
    c.size_log_base = j.value("size_log_base", c.size_log_base);
    c.feas_log_base = j.value("feas_log_base", c.feas_log_base);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("sim config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Accepts the spellings used in the printed tables.
inline std::string canonical_solvent(const std::string& s) {
  if (s == "CHCl3" || s == "CHCl_3" || s == "CHCl₃" || s == "chloroform") return "CHCl3";
  if (s == "DMAc" || s == "dmac") return "DMAc";
  return s;
}

struct ElectrosprayInput {
  double concentration = 0.0;  // % w/v
  double flow_rate = 0.0;      // uL/min
  double voltage = 0.0;        // kV
  std::string solvent;

  static ElectrosprayInput from(const DesignPoint& p, const DesignSpace& space) {
    return {space.continuous_value(p, "concentration"), space.continuous_value(p, "flow_rate"),
            space.continuous_value(p, "voltage"),
            canonical_solvent(space.categorical_value(p, "solvent"))};
  }

  DesignPoint to_point() const {
    return DesignPoint{{concentration, flow_rate, voltage, canonical_solvent(solvent)}};
  }
};

struct SimResult {
  double size = 0.0;
  bool feasible = false;
};

inline double particle_size(const ElectrosprayInput& in, const SimConfig& cfg = {}) {
  if (!(in.voltage > 1.0)) throw DomainError("particle_size: voltage must be > 1 kV");
  if (in.flow_rate < 0.0 || in.concentration < 0.0) {
    throw DomainError("particle_size: flow rate and concentration must be >= 0");
  }
  const double log_u = std::log(in.voltage) / std::log(cfg.size_log_base);
  return 2.0 * std::sqrt(in.flow_rate * in.concentration) / log_u +
         cfg.size_alpha(canonical_solvent(in.solvent)) + cfg.size_offset;
}

inline bool feasible(const ElectrosprayInput& in, const SimConfig& cfg = {}) {
  if (!(in.flow_rate > 0.0)) throw DomainError("feasible: flow rate must be > 0");
  const double log_q = std::log(in.flow_rate) / std::log(cfg.feas_log_base);
  return log_q * cfg.feas_alpha(canonical_solvent(in.solvent)) + cfg.feas_offset > 0.0;
}

inline SimResult run_experiment(const ElectrosprayInput& in, const SimConfig& cfg = {}) {
  return {particle_size(in, cfg), feasible(in, cfg)};
}

inline SimResult run_experiment(const DesignPoint& p, const DesignSpace& space,
                                const SimConfig& cfg = {}) {
  space.validate(p);
  return run_experiment(ElectrosprayInput::from(p, space), cfg);
}

/// Largest size the oracle can produce in the space (size is monotone in each
/// continuous input, so a corner attains it).
inline double max_attainable_size(const DesignSpace& space, const SimConfig& cfg = {}) {
  const auto& c = space.variables()[space.index_of("concentration")];
  const auto& q = space.variables()[space.index_of("flow_rate")];
  const auto& u = space.variables()[space.index_of("voltage")];
  double best = 0.0;
  for (const auto& solvent : space.variables()[space.index_of("solvent")].categories) {
    best = std::max(best, particle_size({c.upper, q.upper, u.lower, solvent}, cfg));
  }
  return best;
}

// ---- bundled fixture tables ----------------------------------------------------

/// One printed row. Starting-design rows carry no measurement.
struct FixtureRow {
  std::string label;
  ElectrosprayInput input;
  std::optional<double> size;
  std::optional<bool> feasible;
};

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"table2-start", "table1-lab-init", "supp1-300nm",
                                              "supp2-3um"};
  return names;
}

inline std::vector<FixtureRow> load_fixture(const std::string& name) {
  using R = FixtureRow;
  if (name == "table2-start") {
    return {
        R{"S-1", {0.50, 15.00, 10.0, "DMAc"}, {}, {}},
        R{"S-2", {0.50, 0.10, 10.0, "CHCl3"}, {}, {}},
        R{"S-3", {3.00, 20.00, 15.0, "DMAc"}, {}, {}},
        R{"S-4", {1.00, 20.00, 10.0, "CHCl3"}, {}, {}},
        R{"S-5", {0.20, 0.02, 10.0, "CHCl3"}, {}, {}},
    };
  }
  if (name == "table1-lab-init") {
    return {
        R{"0-1", {2.40, 1.73, 14.0, "DMAc"}, 0.56, true},
        R{"0-2", {4.06, 0.44, 15.7, "CHCl3"}, 1.00, false},
        R{"0-3", {2.88, 49.11, 11.8, "DMAc"}, 15.00, false},
        R{"0-4", {0.76, 0.01, 17.6, "CHCl3"}, 1.20, false},
        R{"0-5", {0.11, 10.43, 14.5, "CHCl3"}, 6.26, true},
        R{"0-6", {3.55, 0.06, 12.8, "DMAc"}, 0.15, true},
        R{"0-7", {4.55, 2.39, 16.7, "CHCl3"}, 5.24, true},
        R{"0-8", {1.88, 0.21, 11.0, "DMAc"}, 1.12, true},
    };
  }
  if (name == "supp1-300nm") {
    return {
        R{"1-1", {2.32, 0.09, 12.0, "DMAc"}, 0.48, true},
        R{"1-2", {1.33, 0.74, 13.9, "DMAc"}, 0.47, true},
        R{"2-1", {1.89, 0.43, 13.9, "DMAc"}, 0.53, true},
        R{"2-2", {3.52, 0.10, 12.3, "DMAc"}, 0.27, true},
        R{"3-1", {0.58, 0.84, 14.0, "DMAc"}, 0.30, true},
        R{"3-2", {4.61, 0.07, 12.4, "DMAc"}, 0.30, true},
    };
  }
  if (name == "supp2-3um") {
    return {
        R{"1-1", {1.66, 0.80, 10.7, "DMAc"}, 0.30, true},
        R{"1-2", {0.36, 3.65, 14.6, "CHCl3"}, 2.69, true},
        R{"2-1", {0.57, 3.74, 16.5, "CHCl3"}, 4.69, true},
        R{"2-2", {0.05, 3.55, 14.5, "CHCl3"}, 10.64, false},
        R{"3-1", {1.63, 1.92, 16.2, "CHCl3"}, 4.14, true},
        R{"3-2", {4.51, 1.38, 14.9, "CHCl3"}, 4.05, true},
        R{"4-1", {4.45, 1.30, 17.4, "CHCl3"}, 3.58, true},
        R{"4-2", {4.02, 1.08, 16.3, "CHCl3"}, 3.29, true},
    };
  }
  throw LookupError("unknown fixture '" + name + "'");
}

} // namespace ccbo
