#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "ccbo/benchmark.hpp"
#include "ccbo/csv.hpp"
#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/simulator.hpp"
#include "ccbo/stats.hpp"
#include "ccbo/strategy.hpp"

namespace ccbo {

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline std::string random_token(char prefix) {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}() ^
                             static_cast<std::uint64_t>(
                                 std::chrono::steady_clock::now().time_since_epoch().count())};
  std::lock_guard lock(m);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%c%016llx", prefix, static_cast<unsigned long long>(rng()));
  return buf;
}

inline nlohmann::json regret_json(double r) {
  return std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr);
}

/// Same point up to a tiny fraction of each variable's range.
inline bool same_point(const DesignPoint& a, const DesignPoint& b, const DesignSpace& space) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const auto& v = space.variables()[i];
    if (v.is_continuous()) {
      const double x = std::get<double>(a.values[i]);
      const double y = std::get<double>(b.values[i]);
      if (std::abs(x - y) > 1e-9 * (v.upper - v.lower)) return false;
    } else if (a.values[i] != b.values[i]) {
      return false;
    }
  }
  return true;
}

} // namespace detail

// ---- events --------------------------------------------------------------------------

enum class EventType { Created, Initialized, Suggested, Observed, Stopped };

inline std::string to_string(EventType t) {
  switch (t) {
    case EventType::Created: return "Created";
    case EventType::Initialized: return "Initialized";
    case EventType::Suggested: return "Suggested";
    case EventType::Observed: return "Observed";
    case EventType::Stopped: return "Stopped";
  }
  return "?";
}

inline EventType parse_event_type(const std::string& s) {
  for (auto t : {EventType::Created, EventType::Initialized, EventType::Suggested,
                 EventType::Observed, EventType::Stopped}) {
    if (to_string(t) == s) return t;
  }
  throw DomainError("unknown event type '" + s + "'");
}

/// One line of the event log.
struct Event {
  std::size_t seq = 0;
  EventType type = EventType::Created;
  std::string at;
  nlohmann::json data;

  nlohmann::json to_json() const {
    return {{"seq", seq}, {"type", to_string(type)}, {"at", at}, {"data", data}};
  }
  static Event from_json(const nlohmann::json& j) {
    return {j.at("seq").get<std::size_t>(), parse_event_type(j.at("type").get<std::string>()),
            j.at("at").get<std::string>(), j.at("data")};
  }
};

struct PendingPoint {
  std::string label;
  DesignPoint point;
  std::string source;  // "initial" | "suggested"
  int iteration = 0;
};

struct HistoryEntry {
  Observation obs;
  bool manual = false;
  std::string source;  // "initial" | "suggested" | "manual"
  int iteration = 0;   // campaign iteration when recorded
};

struct OpenSuggestion {
  int iteration = 0;
  std::vector<DesignPoint> points;
  double acquisition_value = 0.0;
  std::vector<double> feasibility;
  bool exploration_fallback = false;
  bool observed = false;  // a suggested point has been observed since
};

inline constexpr double kDefaultTolerance = 0.10;

/// Campaign state, a pure fold over its event log.
struct CampaignRecord {
  std::string id;
  std::string created_at;
  DesignSpace space;
  double target = 0.0;
  StrategyKind strategy = StrategyKind::CCBO;
  double tolerance = kDefaultTolerance;
  std::uint64_t seed = 0;
  bool feasible_only_regret = true;

  std::vector<HistoryEntry> history;
  std::vector<PendingPoint> pending;
  std::optional<OpenSuggestion> suggestion;
  std::vector<double> regret_series;  // after each observation
  int iteration = 0;
  int initialized = 0;
  int manual = 0;
  bool stopped = false;
  std::string stop_reason;
  std::vector<Event> events;

  CampaignState state() const {
    CampaignState s;
    s.space = space;
    s.target = target;
    s.strategy = strategy;
    s.iteration = iteration;
    s.seed = seed;
    s.feasible_only_regret = feasible_only_regret;
    for (const auto& h : history) s.observations.push_back(h.obs);
    return s;
  }

  double current_regret() const { return regret(state()); }
};

/// Folds one event into the record. Throws on events that break the
/// campaign's invariants, so a new event can be checked by applying it to a
/// copy first.
inline void apply(CampaignRecord& rec, const Event& ev) {
  if (ev.seq != rec.events.size()) {
    throw DomainError("event seq " + std::to_string(ev.seq) + " out of order");
  }
  if (rec.events.empty() && ev.type != EventType::Created) {
    throw DomainError("event log must start with Created");
  }
  if (!rec.events.empty() && ev.type == EventType::Created) {
    throw DomainError("duplicate Created event");
  }
  if (rec.stopped) {
    throw ConflictError("stopped", "campaign " + rec.id + " is stopped (" + rec.stop_reason + ")");
  }
  const auto& d = ev.data;
  switch (ev.type) {
    case EventType::Created: {
      rec.id = d.at("id").get<std::string>();
      rec.created_at = d.at("created_at").get<std::string>();
      rec.space = design_space_from_json(d.at("space"));
      rec.target = d.at("target").get<double>();
      rec.strategy = parse_strategy(d.at("strategy").get<std::string>());
      rec.tolerance = d.at("tolerance").get<double>();
      rec.seed = d.at("seed").get<std::uint64_t>();
      rec.feasible_only_regret = d.at("feasible_only_regret").get<bool>();
      break;
    }
    case EventType::Initialized: {
      for (const auto& pj : d.at("points")) {
        const DesignPoint p = design_point_from_json(pj, rec.space);
        ++rec.initialized;
        rec.pending.push_back({"0-" + std::to_string(rec.initialized), p, "initial", rec.iteration});
      }
      break;
    }
    case EventType::Suggested: {
      OpenSuggestion s;
      s.iteration = d.at("iteration").get<int>();
      if (s.iteration != rec.iteration) throw DomainError("Suggested iteration mismatch");
      s.acquisition_value = d.value("acquisition_value", 0.0);
      s.feasibility = d.value("feasibility", std::vector<double>{});
      s.exploration_fallback = d.value("exploration_fallback", false);
      int k = 0;
      for (const auto& pj : d.at("points")) {
        s.points.push_back(design_point_from_json(pj, rec.space));
        rec.pending.push_back({std::to_string(s.iteration + 1) + "-" + std::to_string(++k),
                               s.points.back(), "suggested", s.iteration});
      }
      rec.suggestion = std::move(s);
      break;
    }
    case EventType::Observed: {
      const DesignPoint p = design_point_from_json(d.at("point"), rec.space);
      const double size = d.at("size").get<double>();
      const bool feas = d.at("feasible").get<bool>();
      const bool manual = d.value("manual", false);
      if (!std::isfinite(size) || size < 0.0) throw DomainError("size: must be a finite value >= 0");
      HistoryEntry h;
      h.manual = manual;
      h.iteration = rec.iteration;
      auto it = std::find_if(rec.pending.begin(), rec.pending.end(), [&](const PendingPoint& pp) {
        return detail::same_point(pp.point, p, rec.space);
      });
      if (it != rec.pending.end()) {
        h.obs = {it->point, size, feas, it->label};
        h.source = it->source;
        const bool from_open = it->source == "suggested" && rec.suggestion &&
                               it->iteration == rec.suggestion->iteration;
        rec.pending.erase(it);
        if (from_open && !rec.suggestion->observed) {
          rec.suggestion->observed = true;
          ++rec.iteration;
        }
      } else {
        for (const auto& prev : rec.history) {
          if (!prev.manual && detail::same_point(prev.obs.point, p, rec.space) && !manual) {
            throw ConflictError("already-observed",
                                "point " + prev.obs.label + " has already been observed");
          }
        }
        if (!manual) {
          throw DomainError("point: does not match any suggested or initialized point; "
                            "set manual=true to record an unsuggested experiment");
        }
        ++rec.manual;
        const std::string label = d.value("label", std::string{});
        h.obs = {p, size, feas, label.empty() ? "m-" + std::to_string(rec.manual) : label};
        h.source = "manual";
      }
      rec.history.push_back(std::move(h));
      rec.regret_series.push_back(rec.current_regret());
      break;
    }
    case EventType::Stopped: {
      rec.stopped = true;
      rec.stop_reason = d.at("reason").get<std::string>();
      break;
    }
  }
  rec.events.push_back(ev);
}

inline CampaignRecord replay(const std::vector<Event>& events) {
  CampaignRecord rec;
  for (const auto& ev : events) apply(rec, ev);
  return rec;
}

inline nlohmann::json to_json(const HistoryEntry& h, const DesignSpace& space) {
  return {{"label", h.obs.label},    {"point", to_json(h.obs.point, space)},
          {"size", h.obs.size},      {"feasible", h.obs.feasible},
          {"source", h.source},      {"manual", h.manual},
          {"iteration", h.iteration}};
}

/// Full campaign view, the payload of GET /campaigns/{id}.
inline nlohmann::json view(const CampaignRecord& rec) {
  nlohmann::json j;
  j["id"] = rec.id;
  j["created_at"] = rec.created_at;
  j["target"] = rec.target;
  j["strategy"] = to_string(rec.strategy);
  j["tolerance"] = rec.tolerance;
  j["seed"] = rec.seed;
  j["feasible_only_regret"] = rec.feasible_only_regret;
  j["space"] = to_json(rec.space);
  j["iteration"] = rec.iteration;
  j["status"] = rec.stopped ? "stopped" : "active";
  j["stop_reason"] = rec.stopped ? nlohmann::json(rec.stop_reason) : nlohmann::json(nullptr);
  const CampaignState st = rec.state();
  j["regret"] = detail::regret_json(regret(st));
  const auto inc = incumbent(st);
  j["best"] = inc ? to_json(rec.history[inc->index], rec.space) : nlohmann::json(nullptr);
  nlohmann::json series = nlohmann::json::array();
  for (double r : rec.regret_series) series.push_back(detail::regret_json(r));
  j["regret_series"] = series;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : rec.history) history.push_back(to_json(h, rec.space));
  j["history"] = history;
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& p : rec.pending) {
    pending.push_back({{"label", p.label}, {"point", to_json(p.point, rec.space)},
                       {"source", p.source}, {"iteration", p.iteration}});
  }
  j["pending"] = pending;
  if (rec.suggestion) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : rec.suggestion->points) pts.push_back(to_json(p, rec.space));
    j["last_suggestion"] = {{"iteration", rec.suggestion->iteration},
                            {"points", pts},
                            {"acquisition_value", rec.suggestion->acquisition_value},
                            {"feasibility", rec.suggestion->feasibility},
                            {"exploration_fallback", rec.suggestion->exploration_fallback},
                            {"observed", rec.suggestion->observed}};
  } else {
    j["last_suggestion"] = nullptr;
  }
  j["events"] = rec.events.size();
  return j;
}

// ---- store ---------------------------------------------------------------------------

struct CampaignStoreOptions {
  std::size_t mc_samples = 512;
  std::size_t default_q = 2;
  /// Replays the whole log after each mutation and compares views.
  bool verify_replay = false;
  StrategyOptions strategy;  // mc_samples above overrides strategy.mc_samples
};

struct CreateCampaignRequest {
  DesignSpace space = electrospray_space();
  double target = 0.0;
  StrategyKind strategy = StrategyKind::CCBO;
  double tolerance = kDefaultTolerance;
  std::optional<std::uint64_t> seed;
  bool feasible_only_regret = true;
};

struct ObservationRequest {
  DesignPoint point;
  double size = 0.0;
  bool feasible = true;
  bool manual = false;
  std::string label;
};

/// Campaigns keyed by id, each with an append-only JSONL log under the data
/// directory (no persistence when the directory is empty). Mutations of one
/// campaign are serialized; reads take only a short state lock.
class CampaignStore {
public:
  explicit CampaignStore(std::filesystem::path dir = {}, CampaignStoreOptions opt = {})
      : dir_(std::move(dir)), opt_(std::move(opt)) {
    opt_.strategy.mc_samples = opt_.mc_samples;
    if (!dir_.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) throw std::runtime_error("cannot create data directory '" + dir_.string() + "': " + ec.message());
      load_all();
    }
  }

  const std::filesystem::path& directory() const { return dir_; }
  const std::vector<std::string>& load_errors() const { return load_errors_; }
  std::size_t default_q() const { return opt_.default_q; }

  nlohmann::json create(const CreateCampaignRequest& req) {
    if (!(req.target > 0.0 && req.target <= kMaxTarget)) {
      throw DomainError("target: must lie in (0, " + format_number(kMaxTarget) + "]");
    }
    if (!(req.tolerance > 0.0 && req.tolerance < 1.0)) {
      throw DomainError("tolerance: must lie in (0, 1)");
    }
    auto entry = std::make_shared<Entry>();
    std::string id;
    {
      std::unique_lock lock(map_mutex_);
      do {
        id = detail::random_token('c');
      } while (entries_.count(id));
      entries_[id] = entry;
    }
    std::lock_guard writer(entry->writer);
    std::uint64_t seed = req.seed.value_or(std::random_device{}());
    const std::string now = detail::utc_timestamp();
    Event ev{0, EventType::Created, now,
             {{"id", id},
              {"created_at", now},
              {"space", to_json(req.space)},
              {"target", req.target},
              {"strategy", to_string(req.strategy)},
              {"tolerance", req.tolerance},
              {"seed", seed},
              {"feasible_only_regret", req.feasible_only_regret}}};
    try {
      commit(*entry, {ev});
    } catch (...) {
      std::unique_lock lock(map_mutex_);
      entries_.erase(id);
      throw;
    }
    return get(id);
  }

  /// id, target, strategy, status, iteration, observation count and regret.
  nlohmann::json list() const {
    nlohmann::json out = nlohmann::json::array();
    std::vector<std::shared_ptr<Entry>> all;
    {
      std::shared_lock lock(map_mutex_);
      for (const auto& [_, e] : entries_) all.push_back(e);
    }
    for (const auto& e : all) {
      std::lock_guard lock(e->state_mutex);
      if (e->rec.events.empty()) continue;
      out.push_back({{"id", e->rec.id},
                     {"created_at", e->rec.created_at},
                     {"target", e->rec.target},
                     {"strategy", to_string(e->rec.strategy)},
                     {"status", e->rec.stopped ? "stopped" : "active"},
                     {"iteration", e->rec.iteration},
                     {"observations", e->rec.history.size()},
                     {"regret", detail::regret_json(e->rec.current_regret())}});
    }
    return out;
  }

  nlohmann::json get(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->state_mutex);
    return view(e->rec);
  }

  CampaignRecord record(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->state_mutex);
    return e->rec;
  }

  /// Appends n Sobol points (scrambled with `seed`, default the campaign
  /// seed) to the pending list.
  nlohmann::json initialize(const std::string& id, std::size_t n,
                            std::optional<std::uint64_t> seed = {}) {
    if (n < 1 || n > 1024) throw DomainError("n: must lie in [1, 1024]");
    auto e = find(id);
    std::lock_guard writer(e->writer);
    const CampaignRecord snap = snapshot(*e);
    ensure_active(snap);
    const auto pts = sobol_sample(snap.space, n, seed.value_or(snap.seed));
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& p : pts) pj.push_back(to_json(p, snap.space));
    commit(*e, {{snap.events.size(), EventType::Initialized, detail::utc_timestamp(),
                 {{"points", pj}, {"n", n}, {"seed", seed.value_or(snap.seed)}}}});
    return {{"points", pj}, {"state", get(id)}};
  }

  /// Next q points. Repeated calls with no observation of the open
  /// suggestion in between return the stored points.
  nlohmann::json propose(const std::string& id, std::optional<std::size_t> q_opt = {}) {
    const std::size_t q = q_opt.value_or(opt_.default_q);
    if (q < 1 || q > 16) throw DomainError("q: must lie in [1, 16]");
    auto e = find(id);
    std::lock_guard writer(e->writer);
    const CampaignRecord snap = snapshot(*e);
    ensure_active(snap);
    auto respond = [&](const OpenSuggestion& s, bool reused) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : s.points) pts.push_back(to_json(p, snap.space));
      return nlohmann::json{{"iteration", s.iteration},
                            {"points", pts},
                            {"acquisition_value", s.acquisition_value},
                            {"feasibility", s.feasibility},
                            {"exploration_fallback", s.exploration_fallback},
                            {"reused", reused}};
    };
    if (snap.suggestion && !snap.suggestion->observed && snap.suggestion->points.size() == q) {
      return respond(*snap.suggestion, true);
    }
    const CampaignState st = snap.state();
    if (uses_model(st.strategy) && st.observations.size() < 2) {
      throw ConflictError("insufficient-data",
                          "strategy " + to_string(st.strategy) + " needs at least 2 observations (has " +
                              std::to_string(st.observations.size()) +
                              "); run a Sobol initial design with POST /campaigns/" + id +
                              "/initialize and record its results first");
    }
    const Suggestion sug = suggest(st, q, opt_.strategy);
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& p : sug.points) pj.push_back(to_json(p, snap.space));
    commit(*e, {{snap.events.size(), EventType::Suggested, detail::utc_timestamp(),
                 {{"iteration", snap.iteration},
                  {"points", pj},
                  {"acquisition_value", sug.acquisition_value},
                  {"feasibility", sug.feasibility},
                  {"exploration_fallback", sug.exploration_fallback}}}});
    std::lock_guard lock(e->state_mutex);
    return respond(*e->rec.suggestion, false);
  }

  /// Records one (triplicate-mean) measurement; stops the campaign when the
  /// regret falls within tolerance of the target.
  nlohmann::json observe(const std::string& id, const ObservationRequest& req) {
    if (!std::isfinite(req.size) || req.size < 0.0) {
      throw DomainError("size: must be a finite value >= 0");
    }
    auto e = find(id);
    std::lock_guard writer(e->writer);
    CampaignRecord snap = snapshot(*e);
    ensure_active(snap);
    snap.space.validate(req.point);
    nlohmann::json data{{"point", to_json(req.point, snap.space)},
                        {"size", req.size},
                        {"feasible", req.feasible},
                        {"manual", req.manual}};
    if (!req.label.empty()) data["label"] = req.label;
    std::vector<Event> evs{{snap.events.size(), EventType::Observed, detail::utc_timestamp(), data}};
    apply(snap, evs.back());
    if (check_stopping(snap.state(), snap.tolerance)) {
      evs.push_back({snap.events.size(), EventType::Stopped, evs.back().at,
                     {{"reason", "target-reached"}}});
    }
    commit(*e, evs);
    return get(id);
  }

  /// History in the shared CSV schema.
  std::string export_csv(const std::string& id) const {
    const CampaignRecord rec = record(id);
    std::vector<CsvRow> rows;
    for (const auto& h : rec.history) rows.push_back({h.obs.label, h.obs.point, h.obs.size, h.obs.feasible});
    return write_csv_string(rec.space, rows);
  }

  std::filesystem::path log_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

private:
  struct Entry {
    std::mutex writer;              // serializes mutations
    mutable std::mutex state_mutex; // guards rec
    CampaignRecord rec;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw LookupError("campaign '" + id + "' not found");
    return it->second;
  }

  static CampaignRecord snapshot(const Entry& e) {
    std::lock_guard lock(e.state_mutex);
    return e.rec;
  }

  static void ensure_active(const CampaignRecord& rec) {
    if (rec.stopped) {
      throw ConflictError("stopped", "campaign " + rec.id + " is stopped (" + rec.stop_reason + ")");
    }
  }

  /// Validates events against a copy, appends them to the log, then
  /// publishes the new state. Caller holds the writer lock.
  void commit(Entry& e, const std::vector<Event>& evs) {
    CampaignRecord next = snapshot(e);
    for (const auto& ev : evs) apply(next, ev);
    if (!dir_.empty()) {
      std::ofstream f(log_path(next.id), std::ios::app | std::ios::binary);
      if (!f) throw std::runtime_error("cannot append to '" + log_path(next.id).string() + "'");
      for (const auto& ev : evs) f << ev.to_json().dump() << '\n';
      f.flush();
      if (!f) throw std::runtime_error("write failed for '" + log_path(next.id).string() + "'");
    }
    if (opt_.verify_replay) {
      const CampaignRecord again = replay(next.events);
      if (view(again) != view(next)) {
        throw std::logic_error("replay of campaign " + next.id + " diverged from live state");
      }
    }
    std::lock_guard lock(e.state_mutex);
    e.rec = std::move(next);
  }

  void load_all() {
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(dir_)) {
      if (f.is_regular_file() && f.path().extension() == ".jsonl") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      try {
        auto entry = std::make_shared<Entry>();
        entry->rec = load_log(path);
        entries_[entry->rec.id] = entry;
      } catch (const std::exception& ex) {
        load_errors_.push_back(path.filename().string() + ": " + ex.what());
      }
    }
  }

  /// A torn final line (crash mid-append) is dropped and cut from the file so
  /// later appends start on a clean line; damage elsewhere is an error.
  static CampaignRecord load_log(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    bool ends_clean = true;
    {
      std::ifstream f(path, std::ios::binary);
      for (std::string line; std::getline(f, line);) {
        if (!line.empty()) lines.push_back(line);
        ends_clean = !f.eof();
      }
    }
    std::vector<Event> events;
    bool torn = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      try {
        events.push_back(Event::from_json(nlohmann::json::parse(lines[i])));
      } catch (const std::exception& ex) {
        if (i + 1 == lines.size()) {
          torn = true;
          break;
        }
        throw DomainError("line " + std::to_string(i + 1) + ": " + ex.what());
      }
    }
    if (events.empty()) throw DomainError("empty event log");
    CampaignRecord rec = replay(events);
    if (torn || !ends_clean) {
      if (torn) lines.pop_back();
      const auto tmp = std::filesystem::path(path).concat(".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& l : lines) out << l << '\n';
        if (!out.flush()) throw std::runtime_error("cannot rewrite '" + path.string() + "'");
      }
      std::filesystem::rename(tmp, path);
    }
    return rec;
  }

  std::filesystem::path dir_;
  CampaignStoreOptions opt_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
  std::vector<std::string> load_errors_;
};

// ---- human-vs-optimizer game ----------------------------------------------------------

struct GameOptions {
  std::size_t iterations = 5;
  std::size_t q = 2;
  std::string start = "table2-start";
  SimConfig sim;  // never serialized
  StrategyOptions strategy;
};

struct GameSide {
  std::vector<std::vector<Observation>> rounds;
  std::vector<double> regret;  // index 0 = start data
};

struct GameRecord {
  std::string id;
  double target = 3.0;
  std::uint64_t seed = 0;
  std::size_t limit = 5;
  std::size_t q = 2;
  std::vector<Observation> start;
  CampaignState player;
  CampaignState shadow;
  GameSide player_side;
  GameSide shadow_side;
  double sentinel_cap = 0.0;

  std::size_t iteration() const { return player_side.rounds.size(); }
  bool finished() const { return iteration() >= limit; }
};

namespace detail {

inline nlohmann::json observations_json(const std::vector<Observation>& obs, const DesignSpace& space) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& o : obs) {
    out.push_back({{"label", o.label}, {"point", to_json(o.point, space)}, {"size", o.size},
                   {"feasible", o.feasible}});
  }
  return out;
}

inline nlohmann::json side_json(const GameSide& s, const DesignSpace& space) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.rounds) rounds.push_back(observations_json(r, space));
  nlohmann::json regret = nlohmann::json::array();
  for (double r : s.regret) regret.push_back(regret_json(r));
  return {{"rounds", rounds}, {"regret_series", regret}};
}

} // namespace detail

/// Player-facing view. Contains results and regrets only; the oracle's
/// constants stay server-side.
inline nlohmann::json view(const GameRecord& g) {
  nlohmann::json j;
  j["id"] = g.id;
  j["target"] = g.target;
  j["iteration"] = g.iteration();
  j["limit"] = g.limit;
  j["q"] = g.q;
  j["finished"] = g.finished();
  j["space"] = to_json(g.player.space);
  j["start_data"] = detail::observations_json(g.start, g.player.space);
  j["player"] = detail::side_json(g.player_side, g.player.space);
  j["optimizer"] = detail::side_json(g.shadow_side, g.player.space);
  j["regret_cap"] = g.sentinel_cap;
  if (g.finished()) {
    const double pa = auc_trapezoid(g.player_side.regret, g.sentinel_cap);
    const double sa = auc_trapezoid(g.shadow_side.regret, g.sentinel_cap);
    const double pr = g.player_side.regret.back();
    const double sr = g.shadow_side.regret.back();
    std::string winner = "tie";
    if (pa < sa) winner = "player";
    if (sa < pa) winner = "optimizer";
    j["final"] = {{"player", {{"regret", detail::regret_json(pr)}, {"auc", pa}}},
                  {"optimizer", {{"regret", detail::regret_json(sr)}, {"auc", sa}}},
                  {"winner_by_auc", winner}};
  } else {
    j["final"] = nullptr;
  }
  return j;
}

/// In-memory games; each has its own lock.
class GameStore {
public:
  explicit GameStore(GameOptions opt = {}) : opt_(std::move(opt)) { opt_.sim.validate(); }

  nlohmann::json create(double target, std::optional<std::uint64_t> seed = {}) {
    if (!(target > 0.0 && target <= kMaxTarget)) {
      throw DomainError("target: must lie in (0, " + format_number(kMaxTarget) + "]");
    }
    auto e = std::make_shared<Entry>();
    auto& g = e->game;
    g.target = target;
    g.seed = seed.value_or(std::random_device{}());
    g.limit = opt_.iterations;
    g.q = opt_.q;
    const DesignSpace space = electrospray_space();
    g.start = start_observations(opt_.start, space, opt_.sim);
    g.sentinel_cap = 2.0 * max_attainable_size(space, opt_.sim);
    for (auto* s : {&g.player, &g.shadow}) {
      s->space = space;
      s->target = target;
      s->seed = g.seed;
      s->observations = g.start;
    }
    g.player.strategy = StrategyKind::Random;  // unused; the player proposes
    g.shadow.strategy = StrategyKind::CCBO;
    g.player_side.regret.push_back(regret(g.player));
    g.shadow_side.regret.push_back(regret(g.shadow));
    {
      std::unique_lock lock(map_mutex_);
      do {
        g.id = detail::random_token('g');
      } while (games_.count(g.id));
      games_[g.id] = e;
    }
    return view(g);
  }

  nlohmann::json get(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    return view(e->game);
  }

  /// Reveals the oracle on the player's q points and advances the optimizer
  /// by one batch against the same oracle.
  nlohmann::json submit(const std::string& id, const std::vector<DesignPoint>& points) {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    auto& g = e->game;
    if (g.finished()) {
      throw ConflictError("game-over", "game " + id + " already played " +
                                           std::to_string(g.limit) + " iterations");
    }
    if (points.size() != g.q) {
      throw DomainError("points: exactly " + std::to_string(g.q) + " points per submission");
    }
    for (const auto& p : points) g.player.space.validate(p);
    const std::string round = std::to_string(g.iteration() + 1);

    std::vector<Observation> mine;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const SimResult r = run_experiment(points[j], g.player.space, opt_.sim);
      mine.push_back({points[j], r.size, r.feasible, round + "-" + std::to_string(j + 1)});
    }
    const Suggestion sug = suggest(g.shadow, g.q, opt_.strategy);
    std::vector<Observation> theirs;
    for (std::size_t j = 0; j < sug.points.size(); ++j) {
      const SimResult r = run_experiment(sug.points[j], g.shadow.space, opt_.sim);
      theirs.push_back({sug.points[j], r.size, r.feasible, round + "-" + std::to_string(j + 1)});
    }
    for (const auto& o : mine) g.player.observations.push_back(o);
    for (const auto& o : theirs) g.shadow.observations.push_back(o);
    ++g.player.iteration;
    ++g.shadow.iteration;
    g.player_side.rounds.push_back(mine);
    g.shadow_side.rounds.push_back(theirs);
    g.player_side.regret.push_back(regret(g.player));
    g.shadow_side.regret.push_back(regret(g.shadow));

    nlohmann::json out = view(g);
    out["revealed"] = detail::observations_json(mine, g.player.space);
    out["player_regret"] = detail::regret_json(g.player_side.regret.back());
    out["optimizer_regret"] = detail::regret_json(g.shadow_side.regret.back());
    return out;
  }

private:
  struct Entry {
    std::mutex mutex;
    GameRecord game;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = games_.find(id);
    if (it == games_.end()) throw LookupError("game '" + id + "' not found");
    return it->second;
  }

  GameOptions opt_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> games_;
};

} // namespace ccbo
