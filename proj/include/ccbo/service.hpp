#pragma once

// Eigen first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's
// product kernels if it is defined before them.
#include "ccbo/campaign.hpp"
#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/strategy.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

namespace ccbo {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "ccbo-data";
  std::size_t default_q = 2;
  std::size_t mc_samples = 512;
  bool verify_replay = false;

  /// CCBO_BIND, CCBO_PORT, CCBO_DATA_DIR, CCBO_DEFAULT_Q, CCBO_MC_SAMPLES.
  static ServiceConfig from_env() {
    ServiceConfig c;
    if (const char* v = std::getenv("CCBO_BIND")) c.host = v;
    if (const char* v = std::getenv("CCBO_PORT")) c.port = std::stoi(v);
    if (const char* v = std::getenv("CCBO_DATA_DIR")) c.data_dir = v;
    if (const char* v = std::getenv("CCBO_DEFAULT_Q")) c.default_q = std::stoul(v);
    if (const char* v = std::getenv("CCBO_MC_SAMPLES")) c.mc_samples = std::stoul(v);
    return c;
  }
};

namespace detail {

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw DomainError("body: expected a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(std::string("body: invalid JSON: ") + e.what());
  }
}

template <typename T>
T body_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DomainError(std::string(key) + ": wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return body_field<T>(j, key, T{});
}

inline std::size_t count_param(const std::string& s, const char* name) {
  const auto v = parse_number(s);
  if (!v || *v < 0 || *v != std::floor(*v)) {
    throw DomainError(std::string(name) + ": expected a non-negative integer");
  }
  return static_cast<std::size_t>(*v);
}

inline void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code,
                       const std::string& message) {
  send_json(res, {{"error", {{"code", code}, {"message", message}}}}, status);
}

} // namespace detail

/// HTTP front end over a CampaignStore and a GameStore.
class CampaignService {
public:
  explicit CampaignService(const ServiceConfig& cfg)
      : cfg_(cfg),
        campaigns_(cfg.data_dir, CampaignStoreOptions{cfg.mc_samples, cfg.default_q, cfg.verify_replay, {}}),
        games_(game_options(cfg)) {
    // httplib also sets SO_REUSEPORT, which lets a second server share a
    // busy port.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  CampaignStore& campaigns() { return campaigns_; }
  GameStore& games() { return games_; }
  httplib::Server& server() { return server_; }

  /// Binds; returns false when the address is unavailable. port 0 picks a
  /// free port.
  bool bind() {
    if (cfg_.port == 0) {
      port_ = server_.bind_to_any_port(cfg_.host);
      return port_ > 0;
    }
    port_ = cfg_.port;
    return server_.bind_to_port(cfg_.host, cfg_.port);
  }

  int port() const { return port_; }

  /// Blocks until stop().
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

private:
  static GameOptions game_options(const ServiceConfig& cfg) {
    GameOptions g;
    g.strategy.mc_samples = cfg.mc_samples;
    return g;
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ConflictError& e) {
        detail::send_error(res, 409, e.code(), e.what());
      } catch (const StateError& e) {
        detail::send_error(res, 409, "conflict", e.what());
      } catch (const LookupError& e) {
        detail::send_error(res, 404, "not-found", e.what());
      } catch (const DomainError& e) {
        detail::send_error(res, 400, "validation", e.what());
      } catch (const std::exception& e) {
        detail::send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    using detail::body_field;
    using detail::optional_field;
    using detail::send_json;
    using httplib::Request;
    using httplib::Response;

    server_.Get("/healthz", guarded([](const Request&, Response& res) {
      send_json(res, {{"status", "ok"}});
    }));

    server_.Post("/campaigns", guarded([this](const Request& req, Response& res) {
      const auto b = detail::parse_body(req);
      CreateCampaignRequest c;
      if (b.contains("space")) {
        try {
          c.space = design_space_from_json(b["space"]);
        } catch (const DomainError& e) {
          throw DomainError(std::string("space: ") + e.what());
        }
      }
      if (!b.contains("target")) throw DomainError("target: required");
      c.target = body_field<double>(b, "target", 0.0);
      c.strategy = parse_strategy(body_field<std::string>(b, "strategy", "ccbo"));
      c.tolerance = body_field<double>(b, "tolerance", kDefaultTolerance);
      c.seed = optional_field<std::uint64_t>(b, "seed");
      c.feasible_only_regret = body_field<bool>(b, "feasible_only_regret", true);
      send_json(res, campaigns_.create(c), 201);
    }));

    server_.Get("/campaigns", guarded([this](const Request&, Response& res) {
      send_json(res, {{"campaigns", campaigns_.list()}});
    }));

    server_.Get(R"(/campaigns/([A-Za-z0-9_-]+))", guarded([this](const Request& req, Response& res) {
      send_json(res, campaigns_.get(req.matches[1]));
    }));

    server_.Post(R"(/campaigns/([A-Za-z0-9_-]+)/initialize)",
                 guarded([this](const Request& req, Response& res) {
      const auto b = detail::parse_body(req);
      std::size_t n = 8;
      if (req.has_param("n")) n = detail::count_param(req.get_param_value("n"), "n");
      if (b.contains("n")) n = detail::count_param(b["n"].dump(), "n");
      send_json(res, campaigns_.initialize(req.matches[1], n, optional_field<std::uint64_t>(b, "seed")));
    }));

    server_.Post(R"(/campaigns/([A-Za-z0-9_-]+)/suggest)",
                 guarded([this](const Request& req, Response& res) {
      std::optional<std::size_t> q;
      if (req.has_param("q")) q = detail::count_param(req.get_param_value("q"), "q");
      send_json(res, campaigns_.propose(req.matches[1], q));
    }));

    server_.Post(R"(/campaigns/([A-Za-z0-9_-]+)/observations)",
                 guarded([this](const Request& req, Response& res) {
      const auto b = detail::parse_body(req);
      const std::string id = req.matches[1];
      const CampaignRecord rec = campaigns_.record(id);
      if (!b.contains("point")) throw DomainError("point: required");
      if (!b.contains("size") || !b["size"].is_number()) throw DomainError("size: required number");
      if (!b.contains("feasible") || !b["feasible"].is_boolean()) {
        throw DomainError("feasible: required boolean");
      }
      ObservationRequest o;
      try {
        o.point = design_point_from_json(b["point"], rec.space);
      } catch (const DomainError& e) {
        throw DomainError(std::string("point: ") + e.what());
      }
      o.size = b["size"].get<double>();
      o.feasible = b["feasible"].get<bool>();
      o.manual = body_field<bool>(b, "manual", false);
      o.label = body_field<std::string>(b, "label", "");
      send_json(res, campaigns_.observe(id, o), 201);
    }));

    server_.Get(R"(/campaigns/([A-Za-z0-9_-]+)/export)",
                guarded([this](const Request& req, Response& res) {
      res.set_content(campaigns_.export_csv(req.matches[1]), "text/csv");
    }));

    server_.Post("/games", guarded([this](const Request& req, Response& res) {
      const auto b = detail::parse_body(req);
      send_json(res,
                games_.create(body_field<double>(b, "target", 3.0), optional_field<std::uint64_t>(b, "seed")),
                201);
    }));

    server_.Get(R"(/games/([A-Za-z0-9_-]+))", guarded([this](const Request& req, Response& res) {
      send_json(res, games_.get(req.matches[1]));
    }));

    server_.Post(R"(/games/([A-Za-z0-9_-]+)/submit)", guarded([this](const Request& req, Response& res) {
      const auto b = detail::parse_body(req);
      if (!b.contains("points") || !b["points"].is_array()) throw DomainError("points: required array");
      const DesignSpace space = electrospray_space();
      std::vector<DesignPoint> pts;
      for (const auto& pj : b["points"]) {
        try {
          pts.push_back(design_point_from_json(pj, space));
        } catch (const DomainError& e) {
          throw DomainError(std::string("points: ") + e.what());
        }
      }
      send_json(res, games_.submit(req.matches[1], pts));
    }));

    server_.set_error_handler([](const Request&, Response& res) {
      if (res.status == 404 && res.body.empty()) {
        detail::send_error(res, 404, "not-found", "no such endpoint");
      }
    });
  }

  ServiceConfig cfg_;
  CampaignStore campaigns_;
  GameStore games_;
  httplib::Server server_;
  int port_ = 0;
};

} // namespace ccbo
