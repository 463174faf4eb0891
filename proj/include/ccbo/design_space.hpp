#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ccbo/error.hpp"
#include "ccbo/sobol.hpp"

namespace ccbo {

enum class VariableKind { continuous, categorical };
enum class Transform { none, log };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<std::string> categories;
  Transform transform = Transform::none;
  std::string unit;

  static VariableSpec continuous(std::string name, double lower, double upper,
                                 Transform transform = Transform::none,
                                 std::string unit = {}) {
    VariableSpec v;
    v.name = std::move(name);
    v.kind = VariableKind::continuous;
    v.lower = lower;
    v.upper = upper;
    v.transform = transform;
    v.unit = std::move(unit);
    v.validate();
    return v;
  }

  static VariableSpec categorical(std::string name,
                                  std::vector<std::string> categories) {
    VariableSpec v;
    v.name = std::move(name);
    v.kind = VariableKind::categorical;
    v.categories = std::move(categories);
    v.validate();
    return v;
  }

  bool is_continuous() const { return kind == VariableKind::continuous; }

  void validate() const {
    if (name.empty()) {
      throw DomainError("variable name must not be empty");
    }
    if (is_continuous()) {
      if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
        throw DomainError("variable '" + name + "': require lower < upper");
      }
      if (transform == Transform::log && !(lower > 0.0)) {
        throw DomainError("variable '" + name +
                          "': log transform requires lower > 0");
      }
    } else {
      if (categories.empty()) {
        throw DomainError("variable '" + name + "': categories must be non-empty");
      }
      std::set<std::string> seen(categories.begin(), categories.end());
      if (seen.size() != categories.size()) {
        throw DomainError("variable '" + name + "': categories must be unique");
      }
    }
  }

  // Forward warping used before normalization. Base 10 for log; any base gives
  // the same unit coordinate.
  double warp(double v) const {
    return transform == Transform::log ? std::log10(v) : v;
  }
  double unwarp(double t) const {
    return transform == Transform::log ? std::pow(10.0, t) : t;
  }
};

/// One physical-unit value per variable: real for continuous, label for
/// categorical.
using Value = std::variant<double, std::string>;

struct DesignPoint {
  std::vector<Value> values;

  bool operator==(const DesignPoint&) const = default;
};

struct EncodedPoint {
  Eigen::VectorXd continuous;
  std::vector<int> categorical;

  bool operator==(const EncodedPoint& o) const {
    return continuous.size() == o.continuous.size() &&
           continuous == o.continuous && categorical == o.categorical;
  }
};

class DesignSpace {
public:
  DesignSpace() = default;

  explicit DesignSpace(std::vector<VariableSpec> variables)
      : variables_(std::move(variables)) {
    if (variables_.empty()) {
      throw DomainError("design space needs at least one variable");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& v = variables_[i];
      v.validate();
      if (!names.insert(v.name).second) {
        throw DomainError("duplicate variable name '" + v.name + "'");
      }
      (v.is_continuous() ? continuous_ : categorical_).push_back(i);
    }
  }

  const std::vector<VariableSpec>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  std::size_t continuous_dims() const { return continuous_.size(); }
  std::size_t categorical_dims() const { return categorical_.size(); }
  const std::vector<std::size_t>& continuous_indices() const { return continuous_; }
  const std::vector<std::size_t>& categorical_indices() const { return categorical_; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      if (variables_[i].name == name) return i;
    }
    throw LookupError("unknown variable '" + name + "'");
  }

  int category_index(std::size_t var, const std::string& label) const {
    const auto& cats = variables_.at(var).categories;
    const auto it = std::find(cats.begin(), cats.end(), label);
    if (it == cats.end()) {
      throw DomainError("variable '" + variables_[var].name +
                        "': unknown category '" + label + "'");
    }
    return static_cast<int>(it - cats.begin());
  }

  /// Throws DomainError naming the first offending variable.
  void validate(const DesignPoint& p) const {
    if (p.values.size() != variables_.size()) {
      throw DomainError("design point has " + std::to_string(p.values.size()) +
                        " values, space has " + std::to_string(variables_.size()));
    }
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& v = variables_[i];
      if (v.is_continuous()) {
        const double* x = std::get_if<double>(&p.values[i]);
        if (x == nullptr) {
          throw DomainError("variable '" + v.name + "' expects a number");
        }
        if (!std::isfinite(*x) || *x < v.lower - slack(v) || *x > v.upper + slack(v)) {
          throw DomainError("variable '" + v.name + "' value " + std::to_string(*x) +
                            " outside [" + std::to_string(v.lower) + ", " +
                            std::to_string(v.upper) + "]");
        }
      } else {
        const auto* s = std::get_if<std::string>(&p.values[i]);
        if (s == nullptr) {
          throw DomainError("variable '" + v.name + "' expects a category label");
        }
        category_index(i, *s);
      }
    }
  }

  bool contains(const DesignPoint& p) const {
    try {
      validate(p);
      return true;
    } catch (const DomainError&) {
      return false;
    }
  }

  double continuous_value(const DesignPoint& p, const std::string& name) const {
    return std::get<double>(p.values.at(index_of(name)));
  }
  const std::string& categorical_value(const DesignPoint& p,
                                       const std::string& name) const {
    return std::get<std::string>(p.values.at(index_of(name)));
  }

  bool operator==(const DesignSpace& o) const {
    if (variables_.size() != o.variables_.size()) return false;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& a = variables_[i];
      const auto& b = o.variables_[i];
      if (a.name != b.name || a.kind != b.kind || a.transform != b.transform ||
          a.categories != b.categories ||
          (a.is_continuous() && (a.lower != b.lower || a.upper != b.upper))) {
        return false;
      }
    }
    return true;
  }

  static double slack(const VariableSpec& v) { return 1e-9 * (v.upper - v.lower); }

private:
  std::vector<VariableSpec> variables_;
  std::vector<std::size_t> continuous_;
  std::vector<std::size_t> categorical_;
};

/// Concentration [0.05, 5] % w/v, flow rate [0.01, 60] uL/min (log),
/// voltage [10, 18] kV, solvent {CHCl3, DMAc}.
inline DesignSpace electrospray_space() {
  return DesignSpace({
      VariableSpec::continuous("concentration", 0.05, 5.00, Transform::none, "% w/v"),
      VariableSpec::continuous("flow_rate", 0.01, 60.00, Transform::log, "uL/min"),
      VariableSpec::continuous("voltage", 10.0, 18.0, Transform::none, "kV"),
      VariableSpec::categorical("solvent", {"CHCl3", "DMAc"}),
  });
}

inline EncodedPoint to_unit(const DesignPoint& p, const DesignSpace& space) {
  space.validate(p);
  EncodedPoint e;
  e.continuous.resize(static_cast<Eigen::Index>(space.continuous_dims()));
  Eigen::Index k = 0;
  for (std::size_t i : space.continuous_indices()) {
    const auto& v = space.variables()[i];
    const double x = std::clamp(std::get<double>(p.values[i]), v.lower, v.upper);
    e.continuous[k++] = (v.warp(x) - v.warp(v.lower)) / (v.warp(v.upper) - v.warp(v.lower));
  }
  for (std::size_t i : space.categorical_indices()) {
    e.categorical.push_back(space.category_index(i, std::get<std::string>(p.values[i])));
  }
  return e;
}

inline DesignPoint from_unit(const EncodedPoint& e, const DesignSpace& space) {
  if (static_cast<std::size_t>(e.continuous.size()) != space.continuous_dims() ||
      e.categorical.size() != space.categorical_dims()) {
    throw DomainError("encoded point does not match design space dimensions");
  }
  DesignPoint p;
  p.values.resize(space.size());
  Eigen::Index k = 0;
  for (std::size_t i : space.continuous_indices()) {
    const auto& v = space.variables()[i];
    const double u = e.continuous[k++];
    if (!(u >= -1e-12 && u <= 1.0 + 1e-12)) {
      throw DomainError("encoded coordinate for '" + v.name + "' outside [0,1]");
    }
    const double t = v.warp(v.lower) + std::clamp(u, 0.0, 1.0) * (v.warp(v.upper) - v.warp(v.lower));
    p.values[i] = std::clamp(v.unwarp(t), v.lower, v.upper);
  }
  std::size_t c = 0;
  for (std::size_t i : space.categorical_indices()) {
    const auto& v = space.variables()[i];
    const int idx = e.categorical[c++];
    if (idx < 0 || static_cast<std::size_t>(idx) >= v.categories.size()) {
      throw DomainError("encoded category index for '" + v.name + "' out of range");
    }
    p.values[i] = v.categories[static_cast<std::size_t>(idx)];
  }
  return p;
}

namespace detail {

inline EncodedPoint encode_unit_draw(const std::vector<double>& u, const DesignSpace& space) {
  EncodedPoint e;
  const std::size_t dc = space.continuous_dims();
  e.continuous.resize(static_cast<Eigen::Index>(dc));
  for (std::size_t k = 0; k < dc; ++k) {
    e.continuous[static_cast<Eigen::Index>(k)] = u[k];
  }
  for (std::size_t k = 0; k < space.categorical_dims(); ++k) {
    const auto n_cat = space.variables()[space.categorical_indices()[k]].categories.size();
    const auto bin = static_cast<std::size_t>(u[dc + k] * static_cast<double>(n_cat));
    e.categorical.push_back(static_cast<int>(std::min(bin, n_cat - 1)));
  }
  return e;
}

} // namespace detail

/// Quasi-random initial design. Categorical variables take a Sobol coordinate
/// binned into equal intervals.
inline std::vector<DesignPoint> sobol_sample(const DesignSpace& space, std::size_t n,
                                             std::uint64_t seed) {
  if (n == 0) {
    throw DomainError("sobol_sample: n must be at least 1");
  }
  ScrambledSobol sobol(space.size(), seed);
  std::vector<DesignPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(from_unit(detail::encode_unit_draw(sobol.next(), space), space));
  }
  return out;
}

/// i.i.d. uniform in encoded space (log-uniform for log-transformed variables).
template <typename Rng>
std::vector<DesignPoint> uniform_sample(const DesignSpace& space, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<DesignPoint> out;
  out.reserve(n);
  std::vector<double> u(space.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : u) x = unif(rng);
    out.push_back(from_unit(detail::encode_unit_draw(u, space), space));
  }
  return out;
}

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double scale = 1.0;

  double forward(double x) const { return (x - mean) / scale; }
  double inverse(double z) const { return mean + scale * z; }
};

/// Zero mean, unit sample standard deviation. A single value or a spread below
/// 1e-12 gives zeros with scale 1.
inline Standardized standardize(const std::vector<double>& values) {
  if (values.empty()) {
    throw DomainError("standardize: empty input");
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  Standardized s;
  s.mean = mean;
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.scale = sd > 1e-12 ? sd : 1.0;
  s.values.reserve(values.size());
  for (double v : values) {
    s.values.push_back(sd > 1e-12 ? (v - mean) / s.scale : 0.0);
  }
  return s;
}

// ---- structured-text (JSON) form of a design space -------------------------

inline nlohmann::json to_json(const DesignSpace& space) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : space.variables()) {
    nlohmann::json j;
    j["name"] = v.name;
    if (v.is_continuous()) {
      j["kind"] = "continuous";
      j["bounds"] = {v.lower, v.upper};
      j["transform"] = v.transform == Transform::log ? "log" : "none";
      if (!v.unit.empty()) j["unit"] = v.unit;
    } else {
      j["kind"] = "categorical";
      j["categories"] = v.categories;
    }
    vars.push_back(std::move(j));
  }
  return {{"variables", vars}};
}

inline DesignSpace design_space_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variables") || !j["variables"].is_array()) {
    throw DomainError("design space: missing 'variables' array");
  }
  std::vector<VariableSpec> vars;
  std::size_t idx = 0;
  for (const auto& item : j["variables"]) {
    const std::string where = "variables[" + std::to_string(idx++) + "]";
    try {
      const std::string kind = item.at("kind").get<std::string>();
      if (kind == "continuous") {
        const auto& b = item.at("bounds");
        if (!b.is_array() || b.size() != 2) {
          throw DomainError(where + ".bounds: expected [lower, upper]");
        }
        const std::string tr = item.value("transform", std::string("none"));
        if (tr != "none" && tr != "log") {
          throw DomainError(where + ".transform: expected 'none' or 'log'");
        }
        vars.push_back(VariableSpec::continuous(
            item.at("name").get<std::string>(), b[0].get<double>(), b[1].get<double>(),
            tr == "log" ? Transform::log : Transform::none, item.value("unit", std::string{})));
      } else if (kind == "categorical") {
        vars.push_back(VariableSpec::categorical(
            item.at("name").get<std::string>(),
            item.at("categories").get<std::vector<std::string>>()));
      } else {
        throw DomainError(where + ".kind: expected 'continuous' or 'categorical'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DomainError(where + ": " + e.what());
    }
  }
  return DesignSpace(std::move(vars));
}

inline nlohmann::json to_json(const DesignPoint& p, const DesignSpace& space) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::visit([&](const auto& v) { j[space.variables()[i].name] = v; }, p.values[i]);
  }
  return j;
}

inline DesignPoint design_point_from_json(const nlohmann::json& j, const DesignSpace& space) {
  if (!j.is_object()) {
    throw DomainError("design point must be an object keyed by variable name");
  }
  DesignPoint p;
  for (const auto& v : space.variables()) {
    if (!j.contains(v.name)) {
      throw DomainError("design point missing '" + v.name + "'");
    }
    const auto& x = j[v.name];
    if (v.is_continuous()) {
      if (!x.is_number()) throw DomainError("'" + v.name + "' must be a number");
      p.values.emplace_back(x.get<double>());
    } else {
      if (!x.is_string()) throw DomainError("'" + v.name + "' must be a string");
      p.values.emplace_back(x.get<std::string>());
    }
  }
  space.validate(p);
  return p;
}

} // namespace ccbo
