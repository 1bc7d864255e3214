#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/csv.hpp"
#include "egm/ingest/import.hpp"
#include "egm/service/project.hpp"
#include "support/mock_provider.hpp"
#include "support/temp_dir.hpp"

namespace egm::testkit {

inline constexpr const char* kE2eQuery =
    "(cash OR transfers OR feeding OR meals OR microfinance OR loans OR credit) AND NOT protocol";

struct E2eRun {
  std::string egm_json;
  std::string egm_csv;
  double seconds = 0;
  std::vector<std::string> failures;
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// Per-cell tallies and gap classes worked out from the expected codings alone.
inline std::map<std::string, nlohmann::json> expected_cells(const nlohmann::json& expected, const nlohmann::json& gap) {
  std::map<std::string, nlohmann::json> cells;
  const int window_start = gap.at("reference_year").get<int>() - gap.at("sr_recency_years").get<int>();
  for (const auto& c : expected.at("codings")) {
    auto& cell = cells[c.at("intervention").get<std::string>() + "|" + c.at("outcome").get<std::string>()];
    if (cell.is_null()) {
      cell = {{"n_impact_evaluations", 0}, {"n_systematic_reviews", 0}, {"n_other_primary", 0}, {"n_positive", 0},
              {"n_negative", 0}, {"n_non_significant", 0}, {"n_recent_systematic_reviews", 0}};
    }
    const std::string type = c.at("study_type");
    if (type == "impact_evaluation") cell["n_impact_evaluations"] = cell["n_impact_evaluations"].get<int>() + 1;
    if (type == "other_primary") cell["n_other_primary"] = cell["n_other_primary"].get<int>() + 1;
    if (type == "systematic_review") {
      cell["n_systematic_reviews"] = cell["n_systematic_reviews"].get<int>() + 1;
      if (c.at("year").get<int>() >= window_start) {
        cell["n_recent_systematic_reviews"] = cell["n_recent_systematic_reviews"].get<int>() + 1;
      }
    }
    const std::string key = "n_" + c.at("direction").get<std::string>();
    cell[key] = cell[key].get<int>() + 1;
  }
  for (auto& [key, cell] : cells) {
    const int primary = cell["n_impact_evaluations"].get<int>() + cell["n_other_primary"].get<int>();
    const bool recent = cell["n_recent_systematic_reviews"].get<int>() > 0;
    if (!recent && primary <= gap.at("absolute_max").get<int>()) cell["gap_class"] = "absolute_gap";
    else if (!recent && primary >= gap.at("synthesis_min").get<int>()) cell["gap_class"] = "synthesis_gap";
    else cell["gap_class"] = "populated";
  }
  return cells;
}

// Drives the command-line tool through init, search, screen-batch, fit,
// code-batch and egm export inside `work`, against `mock`. The core provider
// key is read from EGM_TEST_CORE_KEY, which the caller sets.
inline E2eRun run_cli_pipeline(const std::string& cli, const std::filesystem::path& work,
                               const MockProviderServer& mock, std::uint64_t seed) {
  E2eRun run;
  auto fail = [&](const std::string& s) { run.failures.push_back(s); };
  std::filesystem::create_directories(work);
  auto core = nlohmann::json::parse(ingest::read_text_file(fixture("providers/core_like.json")));
  core["base_url"] = mock.core_url();
  auto crossref = nlohmann::json::parse(ingest::read_text_file(fixture("providers/crossref_like.json")));
  crossref["base_url"] = mock.crossref_url();
  std::ofstream(work / "core.json") << core.dump(2);
  std::ofstream(work / "crossref.json") << crossref.dump(2);
  const nlohmann::json gap{{"absolute_max", 1}, {"synthesis_min", 2}, {"sr_recency_years", 5}, {"reference_year", 2026}};
  std::ofstream(work / "config.json") << nlohmann::json{{"providers", {"core.json", "crossref.json"}},
                                                        {"gap", gap},
                                                        {"model", {{"fit", {{"seed", seed}}}}},
                                                        {"reviewer", "e2e"}}
                                             .dump(2);

  const auto project = work / "project.egm.json";
  const auto log = work / "cli.log";
  auto step = [&](const std::string& args) {
    std::string command = shell_quote(cli) + " --project " + shell_quote(project.string()) + " --config " +
                          shell_quote((work / "config.json").string()) + " " + args + " >>" +
                          shell_quote(log.string()) + " 2>&1";
    int rc = std::system(command.c_str());
    if (rc != 0) fail("`" + args.substr(0, args.find(' ')) + "` exited with " + std::to_string(rc) + ", see " + log.string());
    return rc == 0;
  };

  const auto start = std::chrono::steady_clock::now();
  bool ok = step("init --name e2e --framework " + shell_quote(fixture("framework.json")) + " --keywords " +
                 shell_quote(fixture("keywords.json")) + " --query " + shell_quote(kE2eQuery) + " --year-min 2000") &&
            step("search") && step("screen-batch " + shell_quote(fixture("e2e_screening.csv"))) && step("fit") &&
            step("code-batch " + shell_quote(fixture("e2e_codings.csv"))) &&
            step("egm --format json --out " + shell_quote((work / "egm.json").string())) &&
            step("egm --format csv --out " + shell_quote((work / "egm.csv").string()));
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!ok) return run;

  run.egm_json = ingest::read_text_file((work / "egm.json").string());
  run.egm_csv = ingest::read_text_file((work / "egm.csv").string());
  const auto expected = nlohmann::json::parse(ingest::read_text_file(fixture("e2e_expected.json")));
  const auto p = service::load_project(project);

  if (p.corpus.size() != expected.at("kept_records").get<std::size_t>()) {
    fail("corpus holds " + std::to_string(p.corpus.size()) + " records");
  }
  if (p.search_runs.size() != 1) {
    fail("expected one search run");
  } else {
    for (const auto& [name, n] : expected.at("fetched").items()) {
      auto it = p.search_runs[0].counts.find(name);
      if (it == p.search_runs[0].counts.end() || it->second.fetched != n.get<int>() || it->second.failed) {
        fail("provider " + name + " fetch count differs");
      }
    }
  }
  const auto included = p.review.included_docs().size();
  if (included != expected.at("included").get<std::size_t>() ||
      p.review.decisions.size() - included != expected.at("excluded").get<std::size_t>()) {
    fail("screening tallies differ");
  }
  if (!p.model.is_object() || p.model.at("doc_ids").size() != included) fail("model does not cover the included docs");

  const auto egm = nlohmann::json::parse(run.egm_json);
  const auto want = expected_cells(expected, gap);
  std::size_t cells = 0;
  for (const auto& cell : egm.at("cells")) {
    ++cells;
    const std::string key = cell.at("intervention_id").get<std::string>() + "|" + cell.at("outcome_id").get<std::string>();
    auto it = want.find(key);
    if (it == want.end()) {
      if (cell.at("total") != 0 || cell.at("gap_class") != "absolute_gap") fail("cell " + key + " should be empty");
      continue;
    }
    for (const auto& [field, value] : it->second.items()) {
      if (cell.at(field) != value) fail("cell " + key + " " + field + " is " + cell.at(field).dump());
    }
  }
  if (cells != 9) fail("map has " + std::to_string(cells) + " cells");
  const auto rows = csv::parse(run.egm_csv);
  if (rows.size() != 10) fail("CSV has " + std::to_string(rows.size()) + " rows");
  return run;
}

}  // namespace egm::testkit
