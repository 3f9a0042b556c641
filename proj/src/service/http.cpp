#include "aml/service/service.hpp"

#include <httplib.h>

#include "aml/serialize.hpp"

namespace aml::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, json{{"error", {{"code", code}, {"message", message}}}});
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::size_t ordinal_of(const httplib::Request& req) {
  auto n = parse_int(req.path_params.at("n"));
  if (!n || *n <= 0) throw NotFoundError("bad item number " + req.path_params.at("n"));
  return static_cast<std::size_t>(*n);
}

json candidate_json(const agents::ProfileCandidate& c) {
  return {{"id", c.id},
          {"kind", c.kind == agents::ProfileCandidate::Kind::NewProfile ? "NewProfile" : "Shifted"},
          {"segment", to_string(c.segment)},
          {"cluster", c.cluster},
          {"centroid", c.centroid},
          {"raw_centroid", c.raw_centroid},
          {"support", c.support},
          {"distance", c.distance},
          {"proposed_class", to_string(c.proposed_class)}};
}

json suggestion_json(const agents::ProfileSuggestion& s) {
  json cs = json::array();
  for (const auto& c : s.candidates) cs.push_back(candidate_json(c));
  return {{"id", s.suggestion_id}, {"note", s.note}, {"candidates", std::move(cs)}};
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// maps the error hierarchy onto status codes
Handler guarded(Service& svc, Handler h) {
  return [&svc, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    const auto& token = svc.config().token;
    if (token && req.get_header_value("Authorization") != "Bearer " + *token) {
      send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return;
    }
    try {
      h(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid", e.what());
    } catch (const ConfigError& e) {
      send_error(res, 503, "not_configured", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(Service& svc) {
  auto srv = std::make_unique<httplib::Server>();
  auto& s = *srv;
  // one analysis at a time, reads go through the stores
  auto run_mu = std::make_shared<std::mutex>();

  s.Get("/api/v1/health", guarded(svc, [&svc](const httplib::Request&, httplib::Response& res) {
          auto m = svc.models();
          send_json(res, 200,
                    {{"status", "ok"}, {"model_version", m ? json(m->version.to_string()) : json(nullptr)}});
        }));

  s.Get("/api/v1/runs", guarded(svc, [&svc](const httplib::Request&, httplib::Response& res) {
          json runs = json::array();
          for (const auto& id : svc.run_ids()) runs.push_back(svc.run_summary_json(svc.get_run(id)));
          send_json(res, 200, {{"runs", std::move(runs)}});
        }));

  s.Post("/api/v1/runs", guarded(svc, [&svc, run_mu](const httplib::Request& req, httplib::Response& res) {
           auto b = body_of(req);
           RunRequest r;
           if (!b.contains("analysis_date")) throw ValidationError("analysis_date is required");
           r.analysis_date = date_from_json(b.at("analysis_date"));
           if (b.contains("mar")) r.mar = b.at("mar").is_null() ? std::nullopt : std::optional<double>(b.at("mar").get<double>());
           if (b.contains("product") && !b.at("product").is_null()) r.product = b.at("product").get<std::string>();
           if (b.contains("client_id") && !b.at("client_id").is_null())
             r.client_id = b.at("client_id").get<std::string>();
           std::lock_guard lock(*run_mu);
           bool reused = false;
           auto run = svc.run_analysis(r, &reused);
           send_json(res, reused ? 200 : 201, svc.run_summary_json(run));
         }));

  s.Get("/api/v1/runs/:id", guarded(svc, [&svc](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, svc.run_summary_json(svc.get_run(req.path_params.at("id"))));
        }));

  s.Get("/api/v1/runs/:id/queue", guarded(svc, [&svc](const httplib::Request& req, httplib::Response& res) {
          QueueFilter f;
          f.rule = param(req, "rule");
          if (auto c = param(req, "class")) {
            f.profile_class = parse_profile_class(*c);
            if (!f.profile_class) throw ValidationError("unknown class " + *c);
          }
          if (auto st = param(req, "state")) {
            f.state = parse_case_state(*st);
            if (!f.state) throw ValidationError("unknown state " + *st);
          }
          const auto& id = req.path_params.at("id");
          auto run = svc.get_run(id);
          json items = json::array();
          std::size_t escalated = 0;
          for (const auto& it : svc.queue(id, f)) {
            escalated += it.state == agents::CaseState::Escalated;
            items.push_back({{"ordinal", it.ordinal},
                             {"client_kind", to_string(it.suspicion.client_kind)},
                             {"analysis_class", to_string(it.suspicion.analysis_class)},
                             {"rules", [&] {
                                json r = json::array();
                                for (const auto& m : it.suspicion.triggered) r.push_back(m.rule_id);
                                return r;
                              }()},
                             {"state", to_string(it.state)},
                             {"agent_verdict", agents::to_string(it.agent.verdict)},
                             {"analyst_verdict", it.analyst ? json(agents::to_string(*it.analyst)) : json(nullptr)}});
          }
          send_json(res, 200,
                    {{"run_id", id}, {"total", run.suspicions.size()}, {"count", items.size()},
                     {"escalated", escalated}, {"items", std::move(items)}});
        }));

  s.Get("/api/v1/runs/:id/items/:n", guarded(svc, [&svc](const httplib::Request& req, httplib::Response& res) {
          auto run = svc.get_run(req.path_params.at("id"));
          send_json(res, 200, svc.item_json(svc.item(run.id, ordinal_of(req)), run));
        }));

  s.Post("/api/v1/runs/:id/items/:n/verdict", guarded(svc, [&svc](const httplib::Request& req, httplib::Response& res) {
           auto b = body_of(req);
           if (!b.contains("verdict") || !b.at("verdict").is_string()) throw ValidationError("verdict is required");
           auto v = agents::parse_verdict(b.at("verdict").get<std::string>());
           if (!v) throw ValidationError("verdict must be Confirmed or Rejected");
           auto run = svc.get_run(req.path_params.at("id"));
           send_json(res, 200, svc.item_json(svc.post_verdict(run.id, ordinal_of(req), *v), run));
         }));

  s.Get("/api/v1/runs/:id/report", guarded(svc, [&svc](const httplib::Request& req, httplib::Response& res) {
          res.set_content(svc.report(req.path_params.at("id"), param(req, "rule")), "text/plain; charset=utf-8");
        }));

  s.Get("/api/v1/profile-suggestions", guarded(svc, [&svc](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (const auto& sg : svc.open_suggestions()) out.push_back(suggestion_json(sg));
          send_json(res, 200, {{"suggestions", std::move(out)}});
        }));

  s.Post("/api/v1/profile-suggestions", guarded(svc, [&svc, run_mu](const httplib::Request&, httplib::Response& res) {
           std::lock_guard lock(*run_mu);
           send_json(res, 201, suggestion_json(svc.suggest_profiles()));
         }));

  s.Post("/api/v1/profile-suggestions/:id/validation", guarded(svc, [&svc, run_mu](const httplib::Request& req, httplib::Response& res) {
           auto b = body_of(req);
           agents::ProfileValidation v;
           v.suggestion_id = req.path_params.at("id");
           if (b.contains("accepted")) v.accepted = b.at("accepted").get<std::vector<std::string>>();
           if (b.contains("rejected")) v.rejected = b.at("rejected").get<std::vector<std::string>>();
           std::lock_guard lock(*run_mu);
           auto version = svc.validate_profiles(v);
           send_json(res, 200, {{"suggestion_id", v.suggestion_id}, {"model_version", version.to_string()}});
         }));

  s.Get("/api/v1/decision-matrix", guarded(svc, [&svc](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, svc.decision_matrix());
        }));

  s.Get("/api/v1/rules", guarded(svc, [&svc](const httplib::Request&, httplib::Response& res) {
          svc.ensure_ready();
          send_json(res, 200, svc.rule_bank());
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such endpoint");
  });
  return srv;
}

}  // namespace aml::service
