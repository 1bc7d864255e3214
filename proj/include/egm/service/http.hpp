#pragma once

#include <functional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/core/review.hpp"
#include "egm/error.hpp"
#include "egm/ingest/import.hpp"
#include "egm/service/pipeline.hpp"
#include "egm/service/service.hpp"

namespace egm::service {

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownDoc:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::IoError:
    case ErrorCode::IntegrityError:
    case ErrorCode::SchemaVersionMismatch:
    case ErrorCode::BindError:
    case ErrorCode::NetworkError: return 500;
    default: return 400;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json body_json(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

inline std::optional<std::string> query_param(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) return std::nullopt;
  std::string v = req.get_param_value(key);
  if (v.empty()) return std::nullopt;
  return v;
}

inline core::EgmFilters filters_from_request(const httplib::Request& req) {
  core::EgmFilters f;
  f.geography = query_param(req, "geography");
  if (auto s = query_param(req, "study_type")) f.study_type = core::parse_study_type(*s);
  f.population = query_param(req, "population");
  if (auto q = query_param(req, "quality")) f.quality = core::parse_quality(*q);
  return f;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps library errors to status codes: validation 400, unknown id 404,
// conflict 409.
inline Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      send_json(res, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}, http_status_for(e.code()));
    } catch (const nlohmann::json::exception& e) {
      send_json(res, {{"error", "InvalidArgument"}, {"message", e.what()}}, 400);
    }
  };
}

}  // namespace detail

// Registers the /api/v1 routes on `server`.
inline void register_routes(httplib::Server& server, EgmService& svc) {
  using detail::body_json;
  using detail::guarded;
  using detail::send_json;
  const std::string P = R"(/api/v1/projects/([^/]+))";
  using Req = const httplib::Request&;
  using Res = httplib::Response&;

  server.Post("/api/v1/projects", guarded([&svc](Req req, Res res) {
    auto body = body_json(req);
    Project p = svc.create_project(body.value("name", "untitled"));
    send_json(res, project_to_json(p), 201);
  }));

  server.Get(P, guarded([&svc](Req req, Res res) {
    send_json(res, svc.read(req.matches[1], [](const Project& p) { return project_to_json(p); }));
  }));

  server.Put(P + "/framework", guarded([&svc](Req req, Res res) {
    auto fw = body_json(req).get<core::Framework>();
    svc.mutate(req.matches[1], EgmService::Guard::None, [&](Project& p) { set_framework(p, fw); return 0; });
    send_json(res, fw);
  }));

  server.Put(P + "/criteria", guarded([&svc](Req req, Res res) {
    auto c = body_json(req).get<Criteria>();
    svc.mutate(req.matches[1], EgmService::Guard::None, [&](Project& p) { set_criteria(p, c); return 0; });
    send_json(res, c);
  }));

  server.Put(P + "/keywords", guarded([&svc](Req req, Res res) {
    auto kws = keywords_from_json(body_json(req));
    svc.mutate(req.matches[1], EgmService::Guard::None, [&](Project& p) { set_keywords(p, kws); return 0; });
    send_json(res, keywords_to_json(kws));
  }));

  server.Put(P + "/gap-config", guarded([&svc](Req req, Res res) {
    auto g = body_json(req).get<core::GapConfig>();
    svc.mutate(req.matches[1], EgmService::Guard::None, [&](Project& p) { set_gap_config(p, g); return 0; });
    send_json(res, g);
  }));

  server.Post(P + "/jobs", guarded([&svc](Req req, Res res) {
    auto body = body_json(req);
    JobKind kind = parse_job_kind(body.value("kind", ""));
    Job job = svc.submit_job(req.matches[1], kind, body.value("params", nlohmann::json::object()));
    send_json(res, job, 202);
  }));

  server.Get(P + "/jobs/([^/]+)", guarded([&svc](Req req, Res res) {
    send_json(res, svc.job(req.matches[1], req.matches[2]));
  }));

  server.Post(P + "/import", guarded([&svc](Req req, Res res) {
    auto format = ingest::parse_import_format(detail::query_param(req, "format").value_or("jsonl"));
    std::size_t n = svc.mutate(req.matches[1], EgmService::Guard::CorpusOrScreening,
                               [&](Project& p) { return import_into_project(p, req.body, format); });
    send_json(res, {{"imported", n}});
  }));

  server.Get(P + "/screening/queue", guarded([&svc](Req req, Res res) {
    std::string status = detail::query_param(req, "status").value_or("pending");
    if (status != "pending" && status != "included" && status != "excluded") {
      throw Error(ErrorCode::InvalidArgument, "status must be pending, included or excluded");
    }
    auto out = svc.read(req.matches[1], [&](const Project& p) {
      nlohmann::json items = nlohmann::json::array();
      for (const auto& r : p.corpus) {
        auto it = p.review.decisions.find(r.id);
        std::string state = it == p.review.decisions.end()
                                ? "pending"
                                : (it->second.decision == core::Decision::Included ? "included" : "excluded");
        if (state != status) continue;
        nlohmann::json item{{"id", r.id}, {"title", r.title}, {"abstract", r.abstract}, {"source", r.source},
                            {"status", state}};
        item["year"] = r.year ? nlohmann::json(*r.year) : nlohmann::json(nullptr);
        item["doi"] = r.doi ? nlohmann::json(*r.doi) : nlohmann::json(nullptr);
        items.push_back(std::move(item));
      }
      return items;
    });
    send_json(res, out);
  }));

  server.Post(P + "/screening/([^/]+)", guarded([&svc](Req req, Res res) {
    auto body = body_json(req);
    core::ScreeningDecision d;
    d.doc_id = req.matches[2];
    d.decision = core::parse_decision(body.at("decision").get<std::string>());
    d.reason = body.value("reason", "");
    d.reviewer = body.value("reviewer", svc.config().reviewer);
    d.timestamp = svc.config().timestamp();
    bool changed = svc.mutate(req.matches[1], EgmService::Guard::CorpusOrScreening,
                              [&](Project& p) { return screen(p, d); });
    auto current = svc.read(req.matches[1], [&](const Project& p) { return p.review.decisions.at(d.doc_id); });
    send_json(res, {{"decision", current}, {"changed", changed}});
  }));

  server.Get(P + "/model", guarded([&svc](Req req, Res res) {
    auto model = svc.read(req.matches[1], [](const Project& p) { return p.model; });
    if (model.is_null()) throw Error(ErrorCode::NotFound, "no fitted model yet");
    send_json(res, model);
  }));

  server.Get(P + "/model/suggestions", guarded([&svc](Req req, Res res) {
    auto topic = detail::query_param(req, "topic");
    if (!topic) throw Error(ErrorCode::InvalidArgument, "topic parameter is required");
    double tau = 0.2;
    if (auto t = detail::query_param(req, "tau")) {
      try {
        tau = std::stod(*t);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "tau must be a number");
      }
    }
    auto list = svc.read(req.matches[1], [&](const Project& p) {
      if (!p.model.is_object()) throw Error(ErrorCode::NotFound, "no fitted model yet");
      return suggestions_for(p, *topic, tau);
    });
    send_json(res, list);
  }));

  server.Post(P + "/suggestions/([^/]+)", guarded([&svc](Req req, Res res) {
    auto status = core::parse_suggestion_status(body_json(req).at("status").get<std::string>());
    std::string sid = req.matches[2];
    auto s = svc.mutate(req.matches[1], EgmService::Guard::None,
                        [&](Project& p) { return update_suggestion(p, sid, status); });
    send_json(res, s);
  }));

  server.Post(P + "/codings", guarded([&svc](Req req, Res res) {
    auto body = body_json(req);
    auto coding = body.get<core::EffectCoding>();
    if (coding.reviewer.empty()) coding.reviewer = svc.config().reviewer;
    coding.timestamp = svc.config().timestamp();
    bool changed = svc.mutate(req.matches[1], EgmService::Guard::None, [&](Project& p) { return code(p, coding); });
    auto stored = svc.read(req.matches[1], [&](const Project& p) {
      for (const auto& c : p.review.codings) {
        if (c.same_key(coding)) return c;
      }
      throw Error(ErrorCode::NotFound, "coding vanished");
    });
    send_json(res, {{"coding", stored}, {"changed", changed}}, changed ? 201 : 200);
  }));

  server.Get(P + "/egm", guarded([&svc](Req req, Res res) {
    auto filters = detail::filters_from_request(req);
    auto body = svc.read(req.matches[1], [&](const Project& p) {
      return core::export_egm(project_egm(p, filters), core::ExportFormat::Json);
    });
    res.set_content(body, "application/json");
  }));

  server.Get(P + "/egm/export", guarded([&svc](Req req, Res res) {
    auto format = core::parse_export_format(detail::query_param(req, "format").value_or("json"));
    auto filters = detail::filters_from_request(req);
    auto body = svc.read(req.matches[1], [&](const Project& p) { return core::export_egm(project_egm(p, filters), format); });
    const char* type = format == core::ExportFormat::Json ? "application/json"
                       : format == core::ExportFormat::Csv ? "text/csv"
                                                           : "text/html; charset=utf-8";
    res.set_content(body, type);
  }));
}

}  // namespace egm::service
