#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "egm/error.hpp"
#include "egm/ingest/query.hpp"
#include "egm/ingest/record.hpp"

namespace egm::ingest {

struct SearchFilters {
  std::optional<int> year_min;
  std::optional<int> year_max;
  std::vector<std::string> languages;
  std::vector<std::string> study_types;

  void validate() const {
    if (year_min && year_max && *year_min > *year_max) {
      throw Error(ErrorCode::InvalidArgument, "year_min must not exceed year_max");
    }
  }

  // Languages are only forwarded to providers; records carry no language.
  bool admits(const StudyRecord& r) const {
    if (!year_min && !year_max) return true;
    if (!r.year) return false;
    if (year_min && *r.year < *year_min) return false;
    if (year_max && *r.year > *year_max) return false;
    return true;
  }

  bool operator==(const SearchFilters&) const = default;
};

inline void to_json(nlohmann::json& j, const SearchFilters& f) {
  j = nlohmann::json{{"languages", f.languages}, {"study_types", f.study_types}};
  j["year_min"] = f.year_min ? nlohmann::json(*f.year_min) : nlohmann::json(nullptr);
  j["year_max"] = f.year_max ? nlohmann::json(*f.year_max) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, SearchFilters& f) {
  auto opt_int = [&](const char* k) -> std::optional<int> {
    auto it = j.find(k);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<int>();
  };
  f.year_min = opt_int("year_min");
  f.year_max = opt_int("year_max");
  f.languages = j.value("languages", std::vector<std::string>{});
  f.study_types = j.value("study_types", std::vector<std::string>{});
  f.validate();
}

struct PagingConfig {
  std::string mode = "page";  // "page": 1-based page number; "offset": (page-1)*size
  std::string page_param = "page";
  std::string size_param = "pageSize";
  int max_page_size = 100;
  int first_offset = 0;  // offset mode: index of the first record
};

struct ProviderConfig {
  std::string name;
  std::string base_url;
  std::optional<std::string> auth_header_name;
  std::optional<std::string> auth_query_param;  // for APIs that take the key in the query string
  std::string auth_value_prefix;
  std::string api_key_env_var;
  std::string query_param = "q";
  PagingConfig paging;
  double rate_limit = 1.0;  // requests per second
  // StudyRecord field -> dotted payload path. "items" locates the result
  // array in the response, "total" (optional) the hit count; the rest are
  // relative to one item. "[]" in a path maps over an array.
  std::map<std::string, std::string> field_map;
  BooleanSyntax boolean_syntax;
  std::map<std::string, std::string> filter_params;  // year_min, year_max, languages
  std::map<std::string, std::string> extra_params;
  bool keep_raw_payload = false;

  void validate() const {
    if (name.empty()) throw Error(ErrorCode::InvalidArgument, "provider name is empty");
    if (!(rate_limit > 0)) throw Error(ErrorCode::InvalidArgument, "provider " + name + ": rate_limit must be > 0");
    if (!field_map.count("title")) throw Error(ErrorCode::InvalidArgument, "provider " + name + ": field_map lacks title");
    if (!field_map.count("items")) throw Error(ErrorCode::InvalidArgument, "provider " + name + ": field_map lacks items");
    if (paging.max_page_size < 1) throw Error(ErrorCode::InvalidArgument, "provider " + name + ": max_page_size < 1");
    if (paging.first_offset < 0) throw Error(ErrorCode::InvalidArgument, "provider " + name + ": first_offset < 0");
    if (paging.mode != "page" && paging.mode != "offset") {
      throw Error(ErrorCode::InvalidArgument, "provider " + name + ": paging mode must be page or offset");
    }
  }
};

inline void to_json(nlohmann::json& j, const PagingConfig& p) {
  j = nlohmann::json{{"mode", p.mode}, {"page_param", p.page_param}, {"size_param", p.size_param},
                     {"max_page_size", p.max_page_size}, {"first_offset", p.first_offset}};
}

inline void from_json(const nlohmann::json& j, PagingConfig& p) {
  PagingConfig d;
  p.mode = j.value("mode", d.mode);
  p.page_param = j.value("page_param", d.page_param);
  p.size_param = j.value("size_param", d.size_param);
  p.max_page_size = j.value("max_page_size", d.max_page_size);
  p.first_offset = j.value("first_offset", d.first_offset);
}

inline void to_json(nlohmann::json& j, const ProviderConfig& p) {
  j = nlohmann::json{{"name", p.name},
                     {"base_url", p.base_url},
                     {"auth_value_prefix", p.auth_value_prefix},
                     {"api_key_env_var", p.api_key_env_var},
                     {"query_param", p.query_param},
                     {"paging", p.paging},
                     {"rate_limit", p.rate_limit},
                     {"field_map", p.field_map},
                     {"boolean_syntax", p.boolean_syntax},
                     {"filter_params", p.filter_params},
                     {"extra_params", p.extra_params},
                     {"keep_raw_payload", p.keep_raw_payload}};
  j["auth_header_name"] = p.auth_header_name ? nlohmann::json(*p.auth_header_name) : nlohmann::json(nullptr);
  j["auth_query_param"] = p.auth_query_param ? nlohmann::json(*p.auth_query_param) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ProviderConfig& p) {
  p.name = j.at("name").get<std::string>();
  p.base_url = j.at("base_url").get<std::string>();
  if (auto it = j.find("auth_header_name"); it != j.end() && !it->is_null()) p.auth_header_name = it->get<std::string>();
  if (auto it = j.find("auth_query_param"); it != j.end() && !it->is_null()) p.auth_query_param = it->get<std::string>();
  p.auth_value_prefix = j.value("auth_value_prefix", "");
  p.api_key_env_var = j.value("api_key_env_var", "");
  p.query_param = j.value("query_param", "q");
  if (j.contains("paging")) p.paging = j.at("paging").get<PagingConfig>();
  p.rate_limit = j.value("rate_limit", 1.0);
  p.field_map = j.at("field_map").get<std::map<std::string, std::string>>();
  p.boolean_syntax = j.value("boolean_syntax", BooleanSyntax{});
  p.filter_params = j.value("filter_params", std::map<std::string, std::string>{});
  p.extra_params = j.value("extra_params", std::map<std::string, std::string>{});
  p.keep_raw_payload = j.value("keep_raw_payload", false);
  p.validate();
}

inline ProviderConfig load_provider_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read provider config " + path);
  try {
    return nlohmann::json::parse(in).get<ProviderConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "provider config " + path + ": " + e.what());
  }
}

// Seconds on a monotonic timeline. Tests substitute a manual clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  }
  void sleep_for(double seconds) override {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
};

// Spaces requests at least 1/rate apart, so any half-open one-second window
// holds at most ceil(rate) of them. Safe to share between threads.
class RateLimiter {
 public:
  // The nanosecond pad keeps float drift from squeezing an extra slot into a window.
  explicit RateLimiter(double rate) : interval_(1.0 / rate + 1e-9) {
    if (!(rate > 0)) throw Error(ErrorCode::InvalidArgument, "rate limit must be > 0");
  }

  // Blocks until the caller's slot; returns the slot time.
  double acquire(Clock& clock) {
    double slot;
    {
      std::lock_guard lock(mu_);
      double now = clock.now();
      slot = next_ ? std::max(now, *next_) : now;
      next_ = slot + interval_;
    }
    double wait = slot - clock.now();
    if (wait > 0) clock.sleep_for(wait);
    return slot;
  }

 private:
  std::mutex mu_;
  double interval_;
  std::optional<double> next_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct HttpRequest {
  std::string base_url;  // scheme://host[:port]
  std::string path;      // path plus encoded query string
  std::map<std::string, std::string> headers;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws Error(NetworkError) when no response was received.
  virtual HttpResponse get(const HttpRequest& req) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(int timeout_seconds = 30) : timeout_(timeout_seconds) {}

  HttpResponse get(const HttpRequest& req) override {
    httplib::Client client(req.base_url);
    client.set_connection_timeout(timeout_, 0);
    client.set_read_timeout(timeout_, 0);
    client.set_follow_location(true);
    httplib::Headers headers(req.headers.begin(), req.headers.end());
    auto res = client.Get(req.path, headers);
    if (!res) {
      // The query string is left out: it may carry an API key.
      throw Error(ErrorCode::NetworkError,
                  req.base_url + req.path.substr(0, req.path.find('?')) + ": " + httplib::to_string(res.error()));
    }
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[to_lower_ascii(k)] = v;
    return out;
  }

 private:
  int timeout_;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

struct FetchContext {
  HttpTransport& transport;
  Clock& clock;
  RateLimiter& limiter;
  EnvLookup env = process_env;
};

struct PageResult {
  std::vector<StudyRecord> records;
  bool has_more = false;
};

namespace detail {

inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

inline const nlohmann::json* resolve_path(const nlohmann::json& root, const std::string& path) {
  const nlohmann::json* cur = &root;
  if (path.empty()) return cur;
  for (const auto& seg : split_path(path)) {
    if (cur->is_object()) {
      auto it = cur->find(seg);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array()) {
      if (seg.empty() || seg.find_first_not_of("0123456789") != std::string::npos) return nullptr;
      std::size_t idx = std::stoul(seg);
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else {
      return nullptr;
    }
  }
  return cur;
}

// Flattens a mapped value to text: strings as-is, numbers printed, arrays by
// their first element.
inline std::optional<std::string> as_text(const nlohmann::json* v) {
  while (v && v->is_array()) v = v->empty() ? nullptr : &(*v)[0];
  if (!v || v->is_null()) return std::nullopt;
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number_integer()) return std::to_string(v->get<long long>());
  if (v->is_number()) return v->dump();
  return std::nullopt;
}

inline std::optional<int> as_year(const nlohmann::json* v) {
  while (v && v->is_array()) v = v->empty() ? nullptr : &(*v)[0];
  if (!v) return std::nullopt;
  std::optional<int> year;
  if (v->is_number_integer()) {
    year = v->get<int>();
  } else if (v->is_string()) {
    const std::string s = v->get<std::string>();
    for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
      if (std::all_of(s.begin() + i, s.begin() + i + 4, [](char c) { return c >= '0' && c <= '9'; })) {
        year = std::stoi(s.substr(i, 4));
        break;
      }
    }
  }
  if (year && !valid_year(*year)) return std::nullopt;
  return year;
}

inline std::string strip_markup(const std::string& s) {
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') in_tag = true;
    else if (c == '>' && in_tag) in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  return trim(out);
}

// "author[].family" -> every family name; a plain path to an array of strings
// or of {"name": ...} objects also works.
inline std::vector<std::string> collect_names(const nlohmann::json& item, const std::string& path) {
  std::vector<std::string> out;
  auto marker = path.find("[]");
  if (marker != std::string::npos) {
    const nlohmann::json* arr = resolve_path(item, path.substr(0, marker));
    std::string rest = path.substr(marker + 2);
    if (!rest.empty() && rest.front() == '.') rest.erase(0, 1);
    if (!arr || !arr->is_array()) return out;
    for (const auto& el : *arr) {
      if (auto t = as_text(resolve_path(el, rest)); t && !trim(*t).empty()) out.push_back(trim(*t));
    }
    return out;
  }
  const nlohmann::json* v = resolve_path(item, path);
  if (!v) return out;
  if (v->is_string()) {
    out.push_back(v->get<std::string>());
  } else if (v->is_array()) {
    for (const auto& el : *v) {
      if (el.is_string()) out.push_back(el.get<std::string>());
      else if (el.is_object() && el.contains("name") && el["name"].is_string()) out.push_back(el["name"].get<std::string>());
    }
  }
  return out;
}

inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
        c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

inline double parse_retry_after(const HttpResponse& res) {
  auto it = res.headers.find("retry-after");
  if (it == res.headers.end()) return 1.0;
  try {
    return std::max(0.0, std::stod(it->second));
  } catch (const std::exception&) {
    return 1.0;
  }
}

}  // namespace detail

inline HttpRequest build_page_request(const ProviderConfig& p, const std::string& rendered,
                                      const SearchFilters& filters, int page,
                                      const std::optional<std::string>& api_key) {
  auto [base, path] = detail::split_base_url(p.base_url);
  const int size = p.paging.max_page_size;
  std::vector<std::pair<std::string, std::string>> params;
  params.emplace_back(p.query_param, rendered);
  long long page_value =
      p.paging.mode == "offset" ? p.paging.first_offset + static_cast<long long>(page - 1) * size : page;
  params.emplace_back(p.paging.page_param, std::to_string(page_value));
  params.emplace_back(p.paging.size_param, std::to_string(size));
  auto fp = [&](const char* key) -> const std::string* {
    auto it = p.filter_params.find(key);
    return it == p.filter_params.end() ? nullptr : &it->second;
  };
  if (filters.year_min && fp("year_min")) params.emplace_back(*fp("year_min"), std::to_string(*filters.year_min));
  if (filters.year_max && fp("year_max")) params.emplace_back(*fp("year_max"), std::to_string(*filters.year_max));
  if (!filters.languages.empty() && fp("languages")) {
    std::string joined;
    for (const auto& l : filters.languages) joined += (joined.empty() ? "" : ",") + l;
    params.emplace_back(*fp("languages"), joined);
  }
  for (const auto& [k, v] : p.extra_params) params.emplace_back(k, v);
  if (p.auth_query_param && api_key) params.emplace_back(*p.auth_query_param, *api_key);

  HttpRequest req;
  req.base_url = base;
  req.path = path + (path.find('?') == std::string::npos ? "?" : "&");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) req.path += "&";
    req.path += detail::url_encode(params[i].first) + "=" + detail::url_encode(params[i].second);
  }
  req.headers["Accept"] = "application/json";
  if (p.auth_header_name && api_key) req.headers[*p.auth_header_name] = p.auth_value_prefix + *api_key;
  return req;
}

namespace detail {

// Single-valued field lookup; a "[]" path yields its first value.
inline std::optional<std::string> text_at(const nlohmann::json& item, const std::string& path) {
  if (path.find("[]") == std::string::npos) return as_text(resolve_path(item, path));
  auto all = collect_names(item, path);
  if (all.empty()) return std::nullopt;
  return all.front();
}

}  // namespace detail

// Maps one response body through field_map. has_more comes from the "total"
// path when configured, otherwise from a full page.
inline PageResult map_provider_payload(const ProviderConfig& p, const std::string& body, int page) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedPayload, p.name + ": response is not JSON: " + e.what());
  }
  const std::string& items_path = p.field_map.at("items");
  const nlohmann::json* items = detail::resolve_path(doc, items_path);
  if (!items || !items->is_array()) {
    throw Error(ErrorCode::MalformedPayload, p.name + ": no result array at path '" + items_path + "'");
  }
  auto path_of = [&](const char* field) -> const std::string* {
    auto it = p.field_map.find(field);
    return it == p.field_map.end() ? nullptr : &it->second;
  };
  PageResult out;
  for (const auto& item : *items) {
    StudyRecord r;
    r.source = p.name;
    const std::string& title_path = p.field_map.at("title");
    auto title = detail::text_at(item, title_path);
    if (!title || trim(*title).empty()) {
      throw Error(ErrorCode::MalformedPayload, p.name + ": item lacks mapped title path '" + title_path + "'");
    }
    r.title = trim(*title);
    if (auto path = path_of("abstract")) {
      r.abstract = detail::strip_markup(detail::text_at(item, *path).value_or(""));
    }
    if (auto path = path_of("doi")) {
      if (auto d = detail::text_at(item, *path)) r.doi = normalize_doi(*d);
    }
    if (auto path = path_of("year")) r.year = detail::as_year(detail::resolve_path(item, *path));
    if (auto path = path_of("authors")) r.authors = detail::collect_names(item, *path);
    if (auto path = path_of("venue")) r.venue = detail::text_at(item, *path);
    if (auto path = path_of("url")) r.url = detail::text_at(item, *path);
    if (p.keep_raw_payload) r.raw_provider_payload = item.dump();
    out.records.push_back(std::move(r));
  }
  const auto page_size = static_cast<std::size_t>(p.paging.max_page_size);
  if (auto total_path = path_of("total")) {
    std::optional<double> total;
    if (const auto* t = detail::resolve_path(doc, *total_path)) {
      // Some APIs report the hit count as a string.
      if (t->is_number()) {
        total = t->get<double>();
      } else if (auto text = detail::as_text(t); text && !text->empty() &&
                                                 text->find_first_not_of("0123456789") == std::string::npos) {
        total = std::stod(*text);
      }
    }
    if (total) {
      out.has_more = static_cast<double>(page) * static_cast<double>(page_size) < *total && !items->empty();
      return out;
    }
  }
  out.has_more = items->size() >= page_size;
  return out;
}

// One paced request. A 429 is retried once after Retry-After seconds.
inline PageResult fetch_provider_page(const ProviderConfig& p, const std::string& rendered,
                                      const SearchFilters& filters, int page, FetchContext& ctx) {
  if (page < 1) throw Error(ErrorCode::InvalidArgument, "page must be >= 1");
  std::optional<std::string> key;
  if (p.auth_header_name) {
    key = ctx.env(p.api_key_env_var);
    if (!key) throw Error(ErrorCode::AuthError, p.name + ": environment variable " + p.api_key_env_var + " is not set");
  }
  HttpRequest req = build_page_request(p, rendered, filters, page, key);
  for (int attempt = 0;; ++attempt) {
    ctx.limiter.acquire(ctx.clock);
    HttpResponse res = ctx.transport.get(req);
    if (res.status == 401 || res.status == 403) {
      throw Error(ErrorCode::AuthError, p.name + ": HTTP " + std::to_string(res.status));
    }
    if (res.status == 429) {
      if (attempt > 0) throw Error(ErrorCode::RateLimited, p.name + ": HTTP 429 after retry");
      ctx.clock.sleep_for(detail::parse_retry_after(res));
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      throw Error(ErrorCode::NetworkError, p.name + ": HTTP " + std::to_string(res.status));
    }
    return map_provider_payload(p, res.body, page);
  }
}

}  // namespace egm::ingest
