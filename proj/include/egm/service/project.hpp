#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/core/review.hpp"
#include "egm/error.hpp"
#include "egm/ingest/dedupe.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/record.hpp"
#include "egm/ingest/search.hpp"
#include "egm/keyatm/export.hpp"
#include "egm/textprep/keywords.hpp"

namespace egm::service {

inline constexpr int kSchemaVersion = 1;

struct Criteria {
  std::string query;
  ingest::SearchFilters filters;

  bool operator==(const Criteria&) const = default;
};

inline void to_json(nlohmann::json& j, const Criteria& c) { j = nlohmann::json{{"query", c.query}, {"filters", c.filters}}; }
inline void from_json(const nlohmann::json& j, Criteria& c) {
  c.query = j.value("query", "");
  c.filters = j.value("filters", nlohmann::json::object()).get<ingest::SearchFilters>();
}

// Everything that shapes a model fit; scalar prior overrides replace the
// defaults when present.
struct ModelSettings {
  int background_topics = 1;
  int min_df = 2;
  double max_df_ratio = 0.95;
  std::optional<double> alpha;
  double beta = 0.01;
  double beta_key = 0.1;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  keyatm::FitConfig fit;
  double suggestion_tau = 0.2;

  bool operator==(const ModelSettings&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelSettings& s) {
  j = nlohmann::json{{"background_topics", s.background_topics},
                     {"min_df", s.min_df},
                     {"max_df_ratio", s.max_df_ratio},
                     {"beta", s.beta},
                     {"beta_key", s.beta_key},
                     {"gamma1", s.gamma1},
                     {"gamma2", s.gamma2},
                     {"fit", s.fit},
                     {"suggestion_tau", s.suggestion_tau}};
  j["alpha"] = s.alpha ? nlohmann::json(*s.alpha) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ModelSettings& s) {
  ModelSettings d;
  s.background_topics = j.value("background_topics", d.background_topics);
  s.min_df = j.value("min_df", d.min_df);
  s.max_df_ratio = j.value("max_df_ratio", d.max_df_ratio);
  s.beta = j.value("beta", d.beta);
  s.beta_key = j.value("beta_key", d.beta_key);
  s.gamma1 = j.value("gamma1", d.gamma1);
  s.gamma2 = j.value("gamma2", d.gamma2);
  s.fit = j.contains("fit") ? j.at("fit").get<keyatm::FitConfig>() : d.fit;
  s.suggestion_tau = j.value("suggestion_tau", d.suggestion_tau);
  if (auto it = j.find("alpha"); it != j.end() && !it->is_null()) s.alpha = it->get<double>();
  if (s.background_topics < 0) throw Error(ErrorCode::InvalidArgument, "background_topics must be >= 0");
  s.fit.validate();
}

struct Project {
  int schema_version = kSchemaVersion;
  std::string id;
  std::string name;
  Criteria criteria;
  std::vector<textprep::TopicKeywords> keywords;
  std::vector<ingest::StudyRecord> corpus;
  std::vector<ingest::MergeLogEntry> merge_log;
  core::ReviewState review;
  core::GapConfig gap_config;
  ModelSettings model_settings;
  nlohmann::json model = nullptr;  // latest fit export
  std::vector<ingest::SearchRun> search_runs;

  std::set<std::string> doc_ids() const {
    std::set<std::string> ids;
    for (const auto& r : corpus) ids.insert(r.id);
    return ids;
  }

  std::set<std::string> retired_ids() const {
    std::set<std::string> ids;
    for (const auto& m : merge_log) ids.insert(m.dropped_id);
    return ids;
  }

  const ingest::StudyRecord* find_doc(const std::string& id) const {
    for (const auto& r : corpus) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  std::map<std::string, std::optional<int>> doc_years() const {
    std::map<std::string, std::optional<int>> out;
    for (const auto& r : corpus) out[r.id] = r.year;
    return out;
  }

  bool operator==(const Project&) const = default;
};

inline Project new_project(std::string id, std::string name) {
  Project p;
  p.id = std::move(id);
  p.name = std::move(name);
  p.gap_config.reference_year = ingest::current_year();
  return p;
}

inline nlohmann::json review_to_json(const core::ReviewState& r) {
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& [doc, d] : r.decisions) decisions.push_back(d);
  nlohmann::json j{{"decisions", decisions},
                   {"history", r.history},
                   {"suggestions", r.suggestions},
                   {"codings", r.codings}};
  j["framework"] = r.framework ? nlohmann::json(*r.framework) : nlohmann::json(nullptr);
  return j;
}

inline core::ReviewState review_from_json(const nlohmann::json& j) {
  core::ReviewState r;
  if (auto it = j.find("framework"); it != j.end() && !it->is_null()) r.framework = it->get<core::Framework>();
  for (const auto& d : j.value("decisions", nlohmann::json::array())) {
    auto dec = d.get<core::ScreeningDecision>();
    r.decisions[dec.doc_id] = dec;
  }
  r.history = j.value("history", std::vector<core::ScreeningDecision>{});
  r.suggestions = j.value("suggestions", std::vector<core::Suggestion>{});
  r.codings = j.value("codings", std::vector<core::EffectCoding>{});
  return r;
}

inline nlohmann::json keywords_to_json(const std::vector<textprep::TopicKeywords>& kws) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : kws) j.push_back({{"topic", t.topic}, {"keywords", t.keywords}});
  return j;
}

inline std::vector<textprep::TopicKeywords> keywords_from_json(const nlohmann::json& j) {
  std::vector<textprep::TopicKeywords> out;
  if (j.is_object()) {
    // {"topic": ["kw", ...]} shorthand; std::map ordering makes it deterministic.
    for (const auto& [topic, list] : j.items()) out.push_back({topic, list.get<std::vector<std::string>>()});
    return out;
  }
  for (const auto& t : j) out.push_back({t.at("topic").get<std::string>(), t.at("keywords").get<std::vector<std::string>>()});
  return out;
}

inline nlohmann::json project_to_json(const Project& p) {
  return nlohmann::json{{"schema_version", p.schema_version},
                        {"id", p.id},
                        {"name", p.name},
                        {"criteria", p.criteria},
                        {"keywords", keywords_to_json(p.keywords)},
                        {"corpus", p.corpus},
                        {"merge_log", p.merge_log},
                        {"review", review_to_json(p.review)},
                        {"gap_config", p.gap_config},
                        {"model_settings", p.model_settings},
                        {"model", p.model},
                        {"search_runs", p.search_runs}};
}

// Lists every reference that points at nothing.
inline std::vector<std::string> integrity_problems(const Project& p) {
  std::vector<std::string> out;
  std::set<std::string> docs;
  for (const auto& r : p.corpus) {
    if (!docs.insert(r.id).second) out.push_back("duplicate record id " + r.id);
  }
  auto need_doc = [&](const std::string& id, const std::string& where) {
    if (!docs.count(id)) out.push_back(where + " references unknown doc " + id);
  };
  for (const auto& [doc, d] : p.review.decisions) need_doc(doc, "screening decision");
  for (const auto& d : p.review.history) need_doc(d.doc_id, "screening history");
  std::set<std::string> topic_ids;
  if (p.review.framework) {
    for (const auto& item : p.review.framework->topic_items()) topic_ids.insert(item.id);
  }
  for (const auto& s : p.review.suggestions) {
    need_doc(s.doc_id, "suggestion " + s.id);
    if (!topic_ids.count(s.topic_id)) out.push_back("suggestion " + s.id + " references unknown topic " + s.topic_id);
  }
  for (const auto& c : p.review.codings) {
    need_doc(c.doc_id, "coding");
    if (!p.review.framework) {
      out.push_back("coding for " + c.doc_id + " exists without a framework");
      continue;
    }
    if (!p.review.framework->has_intervention(c.intervention_id)) {
      out.push_back("coding references unknown intervention " + c.intervention_id);
    }
    if (!p.review.framework->has_outcome(c.outcome_id)) out.push_back("coding references unknown outcome " + c.outcome_id);
  }
  if (p.model.is_object() && p.model.contains("doc_ids")) {
    for (const auto& id : p.model.at("doc_ids")) need_doc(id.get<std::string>(), "model");
  }
  return out;
}

inline Project project_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorCode::SchemaVersionMismatch, "project document has no schema_version");
  }
  int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch,
                "project schema_version " + std::to_string(version) + ", supported " + std::to_string(kSchemaVersion));
  }
  Project p;
  try {
    p.id = j.at("id").get<std::string>();
    p.name = j.value("name", "");
    p.criteria = j.value("criteria", nlohmann::json::object()).get<Criteria>();
    p.keywords = keywords_from_json(j.value("keywords", nlohmann::json::array()));
    p.corpus = j.value("corpus", std::vector<ingest::StudyRecord>{});
    p.merge_log = j.value("merge_log", std::vector<ingest::MergeLogEntry>{});
    p.review = review_from_json(j.value("review", nlohmann::json::object()));
    p.gap_config = j.value("gap_config", nlohmann::json::object()).get<core::GapConfig>();
    p.model_settings = j.value("model_settings", nlohmann::json::object()).get<ModelSettings>();
    p.model = j.value("model", nlohmann::json(nullptr));
    p.search_runs = j.value("search_runs", std::vector<ingest::SearchRun>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IntegrityError, std::string("malformed project document: ") + e.what());
  }
  auto problems = integrity_problems(p);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::IntegrityError, msg);
  }
  return p;
}

// Writes a sibling temp file, fsyncs it and renames it over the target, so
// readers only ever see the old or the new document.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot create " + tmp.string());
  std::size_t written = 0;
  while (written < content.size()) {
    ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n < 0) {
      ::close(fd);
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "fsync failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
  }
}

inline void save_project(const Project& p, const std::filesystem::path& path) {
  write_file_atomic(path, project_to_json(p).dump(1) + "\n");
}

inline Project load_project(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read project " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::IoError, "project " + path.string() + " is not valid JSON: " + e.what());
  }
  return project_from_json(j);
}

}  // namespace egm::service
