#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/csv.hpp"
#include "egm/error.hpp"
#include "egm/ingest/import.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/search.hpp"
#include "egm/service/pipeline.hpp"
#include "egm/service/project.hpp"

// Headless project operations behind the command-line tool. Each loads the
// project file, applies one step and saves it back atomically.
namespace egm::service::commands {

// Contents of the --config file.
struct ToolConfig {
  std::optional<nlohmann::json> model;  // partial ModelSettings
  std::optional<core::GapConfig> gap;
  std::vector<std::string> provider_files;
  std::string reviewer = "cli";
  int page_cap = 100;
};

inline ToolConfig load_tool_config(const std::optional<std::string>& path) {
  ToolConfig cfg;
  if (!path) return cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ingest::read_text_file(*path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "config " + *path + ": " + e.what());
  }
  if (j.contains("model")) cfg.model = j.at("model");
  if (j.contains("gap")) cfg.gap = j.at("gap").get<core::GapConfig>();
  auto base = std::filesystem::path(*path).parent_path();
  for (const auto& f : j.value("providers", std::vector<std::string>{})) {
    std::filesystem::path fp(f);
    cfg.provider_files.push_back((fp.is_relative() ? base / fp : fp).string());
  }
  cfg.reviewer = j.value("reviewer", cfg.reviewer);
  cfg.page_cap = j.value("page_cap", cfg.page_cap);
  return cfg;
}

inline ModelSettings merged_settings(const ModelSettings& base, const ToolConfig& cfg, std::optional<std::uint64_t> seed) {
  ModelSettings s = base;
  if (cfg.model) {
    nlohmann::json j = s;
    j.merge_patch(*cfg.model);
    s = j.get<ModelSettings>();
  }
  if (seed) s.fit.seed = *seed;
  s.fit.validate();
  return s;
}

struct InitOptions {
  std::string name = "untitled";
  std::optional<std::string> framework_file;
  std::optional<std::string> keywords_file;
  std::optional<std::string> query;
  ingest::SearchFilters filters;
};

inline Project init(const std::filesystem::path& project_path, const InitOptions& opts, const ToolConfig& cfg,
                    std::optional<std::uint64_t> seed) {
  if (std::filesystem::exists(project_path)) {
    throw Error(ErrorCode::Conflict, "project file " + project_path.string() + " already exists");
  }
  Project p = new_project(project_path.stem().string(), opts.name);
  if (opts.framework_file) {
    set_framework(p, nlohmann::json::parse(ingest::read_text_file(*opts.framework_file)).get<core::Framework>());
  }
  if (opts.keywords_file) {
    set_keywords(p, keywords_from_json(nlohmann::json::parse(ingest::read_text_file(*opts.keywords_file))));
  }
  if (opts.query) set_criteria(p, {*opts.query, opts.filters});
  if (cfg.gap) set_gap_config(p, *cfg.gap);
  p.model_settings = merged_settings(p.model_settings, cfg, seed);
  save_project(p, project_path);
  return p;
}

inline std::size_t import_file(const std::filesystem::path& project_path, const std::string& file,
                               ingest::ImportFormat format) {
  Project p = load_project(project_path);
  std::size_t n = import_into_project(p, ingest::read_text_file(file), format);
  save_project(p, project_path);
  return n;
}

struct SearchCommandResult {
  ingest::SearchRun run;
  std::size_t added = 0;
};

inline SearchCommandResult search(const std::filesystem::path& project_path, const std::vector<ingest::ProviderConfig>& providers,
                                  const std::optional<std::string>& query_override, ingest::HttpTransport& transport,
                                  ingest::Clock& clock, const ingest::SearchOptions& opts = {}) {
  Project p = load_project(project_path);
  std::string query = query_override.value_or(p.criteria.query);
  if (ingest::trim(query).empty()) throw Error(ErrorCode::EmptyQuery, "no inclusion query set (use --query or init --query)");
  std::vector<ingest::StudyRecord> scratch = p.corpus;
  try {
    auto outcome = ingest::run_search(next_run_id(p), query, p.criteria.filters, providers, scratch, p.retired_ids(),
                                      transport, clock, opts);
    SearchCommandResult out{outcome.run, 0};
    out.added = commit_search(p, std::move(outcome));
    save_project(p, project_path);
    return out;
  } catch (const ingest::SearchFailed& e) {
    p.search_runs.push_back(e.run());
    save_project(p, project_path);
    throw;
  }
}

struct BatchResult {
  std::size_t rows = 0;
  std::size_t changed = 0;
};

// Columns: doc_id, decision, reason (optional), reviewer (optional).
inline BatchResult screen_batch(const std::filesystem::path& project_path, const std::string& csv_file,
                                const std::string& reviewer, const std::string& timestamp) {
  Project p = load_project(project_path);
  csv::Table table(ingest::read_text_file(csv_file));
  for (const char* col : {"doc_id", "decision"}) {
    if (!table.has_column(col)) throw SchemaError(1, std::string("missing column ") + col);
  }
  BatchResult out;
  for (const auto& row : table.rows()) {
    core::ScreeningDecision d;
    d.doc_id = table.get(row, "doc_id");
    try {
      d.decision = core::parse_decision(table.get(row, "decision"));
    } catch (const Error& e) {
      throw SchemaError(row.line, e.what());
    }
    d.reason = table.get(row, "reason");
    d.reviewer = table.has_column("reviewer") && !table.get(row, "reviewer").empty() ? table.get(row, "reviewer") : reviewer;
    d.timestamp = timestamp;
    ++out.rows;
    if (screen(p, d)) ++out.changed;
  }
  save_project(p, project_path);
  return out;
}

inline nlohmann::json fit(const std::filesystem::path& project_path, const ModelSettings& settings) {
  Project p = load_project(project_path);
  p.model_settings = settings;
  commit_fit(p, fit_project(p, settings));
  save_project(p, project_path);
  return nlohmann::json{{"documents", p.model.at("doc_ids").size()},
                        {"initial_score", p.model.at("initial_score")},
                        {"final_score", p.model.at("score_trace").back()},
                        {"keyword_warnings", p.model.at("keyword_warnings")}};
}

inline std::vector<core::Suggestion> suggest(const std::filesystem::path& project_path, const std::string& topic,
                                             double tau) {
  Project p = load_project(project_path);
  if (!p.model.is_object()) throw Error(ErrorCode::NotFound, "no fitted model; run fit first");
  return suggestions_for(p, topic, tau);
}

// Columns: doc_id, intervention_id, outcome_id, direction, study_type and the
// optional geography, population, status, quality_rating, reviewer.
inline BatchResult code_batch(const std::filesystem::path& project_path, const std::string& csv_file,
                              const std::string& reviewer, const std::string& timestamp) {
  Project p = load_project(project_path);
  csv::Table table(ingest::read_text_file(csv_file));
  for (const char* col : {"doc_id", "intervention_id", "outcome_id", "direction"}) {
    if (!table.has_column(col)) throw SchemaError(1, std::string("missing column ") + col);
  }
  BatchResult out;
  for (const auto& row : table.rows()) {
    core::EffectCoding c;
    c.doc_id = table.get(row, "doc_id");
    c.intervention_id = table.get(row, "intervention_id");
    c.outcome_id = table.get(row, "outcome_id");
    try {
      c.direction = core::parse_direction(table.get(row, "direction"));
      nlohmann::json attrs = nlohmann::json::object();
      for (const char* col : {"study_type", "geography", "population", "status", "quality_rating"}) {
        std::string v = table.get(row, col);
        if (!v.empty()) attrs[col] = v;
      }
      c.attributes = attrs.get<core::StudyAttributes>();
    } catch (const Error& e) {
      throw SchemaError(row.line, e.what());
    }
    c.reviewer = !table.get(row, "reviewer").empty() ? table.get(row, "reviewer") : reviewer;
    c.timestamp = timestamp;
    ++out.rows;
    if (code(p, c)) ++out.changed;
  }
  save_project(p, project_path);
  return out;
}

inline std::string egm(const std::filesystem::path& project_path, core::ExportFormat format,
                       const core::EgmFilters& filters = {}) {
  Project p = load_project(project_path);
  return core::export_egm(project_egm(p, filters), format);
}

}  // namespace egm::service::commands
