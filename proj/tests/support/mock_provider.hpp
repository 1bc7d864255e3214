#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace egm::testkit {

enum class MockMode { Normal, Unauthorized, RateLimitOnce, RateLimitAlways, Malformed, ServerError };

struct MockRequest {
  std::string endpoint;
  std::map<std::string, std::string> params;
  std::map<std::string, std::string> headers;
};

inline std::vector<nlohmann::json> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

// In-process HTTP server imitating two scholarly APIs:
//   /core/v3/search/works  {"totalHits", "results": [...]}, offset/limit, bearer key
//   /crossref/works        {"message": {"total-results", "items": [...]}}, offset/rows
// Records carry an optional "providers" list naming the endpoints that serve them.
class MockProviderServer {
 public:
  static constexpr const char* kCoreKey = "test-core-key";

  explicit MockProviderServer(std::vector<nlohmann::json> corpus) : corpus_(std::move(corpus)) {
    server_.Get("/core/v3/search/works", [this](const httplib::Request& req, httplib::Response& res) {
      handle("core", req, res);
    });
    server_.Get("/crossref/works", [this](const httplib::Request& req, httplib::Response& res) {
      handle("crossref", req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("mock provider could not bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockProviderServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  MockProviderServer(const MockProviderServer&) = delete;
  MockProviderServer& operator=(const MockProviderServer&) = delete;

  int port() const { return port_; }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::string core_url() const { return base() + "/core/v3/search/works"; }
  std::string crossref_url() const { return base() + "/crossref/works"; }

  void set_mode(const std::string& endpoint, MockMode mode) {
    std::lock_guard lock(mu_);
    modes_[endpoint] = mode;
  }

  std::vector<MockRequest> requests() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::size_t request_count(const std::string& endpoint) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : log_) n += r.endpoint == endpoint;
    return n;
  }

  std::vector<nlohmann::json> served_by(const std::string& endpoint) const {
    std::vector<nlohmann::json> out;
    for (const auto& r : corpus_) {
      if (!r.contains("providers")) {
        out.push_back(r);
        continue;
      }
      for (const auto& p : r.at("providers")) {
        if (p == endpoint) out.push_back(r);
      }
    }
    return out;
  }

 private:
  static long param_or(const httplib::Request& req, const char* key, long fallback) {
    if (!req.has_param(key)) return fallback;
    try {
      return std::stol(req.get_param_value(key));
    } catch (const std::exception&) {
      return fallback;
    }
  }

  static nlohmann::json core_item(const nlohmann::json& r) {
    nlohmann::json authors = nlohmann::json::array();
    for (const auto& a : r.value("authors", nlohmann::json::array())) authors.push_back({{"name", a}});
    nlohmann::json item = {{"title", r.at("title")},
                           {"abstract", r.value("abstract", "")},
                           {"authors", authors},
                           {"yearPublished", r.value("year", nlohmann::json(nullptr))},
                           {"doi", r.value("doi", nlohmann::json(nullptr))}};
    if (r.contains("venue")) item["publisher"] = r["venue"];
    return item;
  }

  static nlohmann::json crossref_item(const nlohmann::json& r) {
    nlohmann::json authors = nlohmann::json::array();
    for (const auto& a : r.value("authors", nlohmann::json::array())) {
      std::string name = a.get<std::string>();
      auto sp = name.rfind(' ');
      authors.push_back({{"given", name.substr(0, sp)}, {"family", name.substr(sp + 1)}});
    }
    nlohmann::json item = {{"title", nlohmann::json::array({r.value("crossref_title", r.at("title").get<std::string>())})},
                           {"author", authors},
                           {"type", "journal-article"}};
    std::string abstract = r.value("abstract", "");
    if (!abstract.empty()) item["abstract"] = "<jats:p>" + abstract + "</jats:p>";
    if (r.contains("doi") && !r["doi"].is_null()) {
      item["DOI"] = r["doi"];
      item["URL"] = "https://doi.org/" + r["doi"].get<std::string>();
    }
    if (r.contains("year") && !r["year"].is_null()) item["published"] = {{"date-parts", {{r["year"], 6}}}};
    if (r.contains("venue")) item["container-title"] = {r["venue"]};
    return item;
  }

  void handle(const std::string& endpoint, const httplib::Request& req, httplib::Response& res) {
    MockMode mode;
    int prior;
    {
      std::lock_guard lock(mu_);
      MockRequest logged{endpoint, {}, {}};
      for (const auto& [k, v] : req.params) logged.params[k] = v;
      for (const auto& [k, v] : req.headers) logged.headers[k] = v;
      prior = static_cast<int>(std::count_if(log_.begin(), log_.end(),
                                             [&](const MockRequest& m) { return m.endpoint == endpoint; }));
      log_.push_back(std::move(logged));
      mode = modes_.count(endpoint) ? modes_[endpoint] : MockMode::Normal;
    }
    if (mode == MockMode::Unauthorized ||
        (endpoint == "core" && req.get_header_value("Authorization") != std::string("Bearer ") + kCoreKey)) {
      res.status = 401;
      res.set_content(R"({"message":"invalid api key"})", "application/json");
      return;
    }
    if (mode == MockMode::RateLimitAlways || (mode == MockMode::RateLimitOnce && prior == 0)) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      res.set_content(R"({"message":"slow down"})", "application/json");
      return;
    }
    if (mode == MockMode::ServerError) {
      res.status = 503;
      return;
    }
    const auto records = served_by(endpoint);
    const bool core = endpoint == "core";
    long offset = std::max(0L, param_or(req, "offset", 0));
    long size = std::max(1L, param_or(req, core ? "limit" : "rows", 10));
    nlohmann::json items = nlohmann::json::array();
    for (long i = offset; i < offset + size && i < static_cast<long>(records.size()); ++i) {
      nlohmann::json item = core ? core_item(records[static_cast<std::size_t>(i)])
                                 : crossref_item(records[static_cast<std::size_t>(i)]);
      if (mode == MockMode::Malformed) item.erase("title");
      items.push_back(std::move(item));
    }
    nlohmann::json body;
    if (core) {
      body = {{"totalHits", records.size()}, {"limit", size}, {"offset", offset}, {"results", items}};
    } else {
      body = {{"status", "ok"},
              {"message", {{"total-results", records.size()}, {"items-per-page", size}, {"items", items}}}};
    }
    res.set_content(body.dump(), "application/json");
  }

  std::vector<nlohmann::json> corpus_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::map<std::string, MockMode> modes_;
  std::vector<MockRequest> log_;
};

}  // namespace egm::testkit
