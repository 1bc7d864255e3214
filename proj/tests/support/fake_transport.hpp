#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "egm/ingest/provider.hpp"

namespace egm::testkit {

struct LoggedRequest {
  ingest::HttpRequest request;
  double at = 0;
};

// Answers from a handler and records every request with the clock reading.
class FakeTransport final : public ingest::HttpTransport {
 public:
  using Handler = std::function<ingest::HttpResponse(const ingest::HttpRequest&)>;

  FakeTransport(Handler handler, const ingest::Clock* clock = nullptr)
      : handler_(std::move(handler)), clock_(clock) {}

  ingest::HttpResponse get(const ingest::HttpRequest& req) override {
    {
      std::lock_guard lock(mu_);
      log_.push_back({req, clock_ ? clock_->now() : 0.0});
    }
    return handler_(req);
  }

  std::vector<LoggedRequest> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }
  std::size_t count() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

 private:
  Handler handler_;
  const ingest::Clock* clock_;
  mutable std::mutex mu_;
  std::vector<LoggedRequest> log_;
};

inline ingest::HttpResponse json_response(int status, const std::string& body,
                                          std::map<std::string, std::string> headers = {}) {
  return {status, body, std::move(headers)};
}

// Pulls one query parameter out of an encoded request path.
inline std::string query_value(const std::string& path, const std::string& key) {
  auto q = path.find('?');
  if (q == std::string::npos) return {};
  std::string rest = path.substr(q + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    auto amp = rest.find('&', pos);
    std::string pair = rest.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
    auto eq = pair.find('=');
    if (eq != std::string::npos && pair.substr(0, eq) == key) return pair.substr(eq + 1);
    if (amp == std::string::npos) break;
    pos = amp + 1;
  }
  return {};
}

}  // namespace egm::testkit
