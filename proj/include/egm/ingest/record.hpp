#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "egm/error.hpp"

namespace egm::ingest {

struct StudyRecord {
  std::string id;
  std::optional<std::string> doi;
  std::string title;
  std::string abstract;
  std::optional<int> year;
  std::string source;
  std::vector<std::string> authors;
  std::optional<std::string> venue;
  std::optional<std::string> url;
  std::optional<std::string> raw_provider_payload;

  bool operator==(const StudyRecord&) const = default;
};

inline int current_year() {
  using namespace std::chrono;
  return static_cast<int>(year_month_day{floor<days>(system_clock::now())}.year());
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Lowercase, resolver prefixes stripped. Returns nullopt unless the result is
// "10." followed by non-whitespace.
inline std::optional<std::string> normalize_doi(std::string_view raw) {
  std::string doi = to_lower_ascii(trim(raw));
  for (std::string_view prefix : {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                                  "http://dx.doi.org/", "doi.org/", "doi:"}) {
    if (doi.rfind(prefix, 0) == 0) {
      doi = trim(doi.substr(prefix.size()));
      break;
    }
  }
  if (doi.size() < 4 || doi.rfind("10.", 0) != 0) return std::nullopt;
  for (char c : doi) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return std::nullopt;
  }
  return doi;
}

// Lowercase with every run of non-alphanumerics collapsed to one space.
inline std::string normalize_title(std::string_view title) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : title) {
    bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (!alnum) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  return out;
}

inline bool valid_year(int year) { return year >= 1800 && year <= current_year() + 1; }

inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Content-derived identifier; the caller resolves collisions within a project.
inline std::string derive_record_id(const StudyRecord& r) {
  std::string key = r.doi ? "doi:" + *r.doi
                          : "title:" + normalize_title(r.title) + "|" + (r.year ? std::to_string(*r.year) : "");
  return "rec-" + fnv1a_hex(key).substr(0, 12);
}

inline void to_json(nlohmann::json& j, const StudyRecord& r) {
  j = nlohmann::json{{"id", r.id},         {"title", r.title},   {"abstract", r.abstract},
                     {"source", r.source}, {"authors", r.authors}};
  j["doi"] = r.doi ? nlohmann::json(*r.doi) : nlohmann::json(nullptr);
  j["year"] = r.year ? nlohmann::json(*r.year) : nlohmann::json(nullptr);
  j["venue"] = r.venue ? nlohmann::json(*r.venue) : nlohmann::json(nullptr);
  j["url"] = r.url ? nlohmann::json(*r.url) : nlohmann::json(nullptr);
  if (r.raw_provider_payload) j["raw_provider_payload"] = *r.raw_provider_payload;
}

namespace detail {
inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}
}  // namespace detail

inline void from_json(const nlohmann::json& j, StudyRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.title = j.at("title").get<std::string>();
  r.abstract = j.value("abstract", "");
  r.source = j.value("source", "");
  r.authors = j.value("authors", std::vector<std::string>{});
  r.doi = detail::opt_string(j, "doi");
  r.venue = detail::opt_string(j, "venue");
  r.url = detail::opt_string(j, "url");
  r.raw_provider_payload = detail::opt_string(j, "raw_provider_payload");
  auto y = j.find("year");
  r.year = (y == j.end() || y->is_null()) ? std::nullopt : std::optional<int>(y->get<int>());
}

}  // namespace egm::ingest
