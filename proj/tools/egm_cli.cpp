#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/error.hpp"
#include "egm/ingest/import.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/search.hpp"
#include "egm/service/commands.hpp"
#include "egm/service/http.hpp"
#include "egm/service/service.hpp"

namespace cmd = egm::service::commands;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

void write_output(const std::string& content, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw egm::Error(egm::ErrorCode::IoError, "cannot write " + out_path);
  out << content;
}

std::vector<egm::ingest::ProviderConfig> load_providers(const std::vector<std::string>& files) {
  std::vector<egm::ingest::ProviderConfig> out;
  for (const auto& f : files) out.push_back(egm::ingest::load_provider_config(f));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence gap map builder: search, screen, model, code and export"};
  app.require_subcommand(1);

  std::string project_path = "project.egm.json";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_path;
  app.add_option("--project", project_path, "Project file")->capture_default_str();
  app.add_option("--seed", seed, "Sampler seed (overrides config)");
  app.add_option("--config", config_path, "JSON config: model settings, gap thresholds, provider files")
      ->check(CLI::ExistingFile);

  cmd::InitOptions init_opts;
  std::optional<int> year_min, year_max;
  auto* init = app.add_subcommand("init", "Create a project file");
  init->add_option("--name", init_opts.name, "Project name");
  init->add_option("--framework", init_opts.framework_file, "Framework JSON")->check(CLI::ExistingFile);
  init->add_option("--keywords", init_opts.keywords_file, "Keyword topics JSON")->check(CLI::ExistingFile);
  init->add_option("--query", init_opts.query, "Inclusion query");
  init->add_option("--year-min", year_min, "Earliest publication year");
  init->add_option("--year-max", year_max, "Latest publication year");

  std::string import_file, import_format = "jsonl";
  auto* import = app.add_subcommand("import", "Import records from JSONL or CSV");
  import->add_option("file", import_file, "Input file")->required()->check(CLI::ExistingFile);
  import->add_option("--format", import_format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));

  std::vector<std::string> provider_files;
  std::optional<std::string> search_query;
  std::optional<int> page_cap;
  auto* search = app.add_subcommand("search", "Run the inclusion query against configured providers");
  search->add_option("--provider", provider_files, "Provider config file (repeatable)")->check(CLI::ExistingFile);
  search->add_option("--query", search_query, "Override the project's inclusion query");
  search->add_option("--page-cap", page_cap, "Maximum pages per provider");

  std::string screen_file, reviewer;
  auto* screen = app.add_subcommand("screen-batch", "Apply screening decisions from CSV (doc_id,decision,reason)");
  screen->add_option("file", screen_file, "Decisions CSV")->required()->check(CLI::ExistingFile);
  screen->add_option("--reviewer", reviewer, "Reviewer name");

  std::optional<int> sweeps, burn_in, chains;
  auto* fit = app.add_subcommand("fit", "Fit the keyword-assisted topic model on included documents");
  fit->add_option("--sweeps", sweeps, "Gibbs sweeps");
  fit->add_option("--burn-in", burn_in, "Burn-in sweeps");
  fit->add_option("--chains", chains, "Independent chains");

  std::string topic;
  double tau = 0.2;
  auto* suggest = app.add_subcommand("suggest", "List documents suggested for a topic");
  suggest->add_option("--topic", topic, "Topic id")->required();
  suggest->add_option("--tau", tau, "Minimum topic probability")->capture_default_str();

  std::string code_file;
  auto* code = app.add_subcommand("code-batch", "Record effect codings from CSV");
  code->add_option("file", code_file, "Codings CSV")->required()->check(CLI::ExistingFile);
  code->add_option("--reviewer", reviewer, "Reviewer name");

  std::string egm_format = "json", egm_out;
  std::optional<std::string> geography, study_type, population, quality;
  auto* egm_cmd = app.add_subcommand("egm", "Export the evidence gap map");
  egm_cmd->add_option("--format", egm_format, "json, csv or html")->check(CLI::IsMember({"json", "csv", "html"}));
  egm_cmd->add_option("--out", egm_out, "Output file (default stdout)");
  egm_cmd->add_option("--geography", geography, "ISO alpha-3 filter");
  egm_cmd->add_option("--study-type", study_type, "Study type filter");
  egm_cmd->add_option("--population", population, "Population filter");
  egm_cmd->add_option("--quality", quality, "Quality rating filter");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API for the review UI");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Directory of *.egm.json projects (default: serve --project only)");
  serve->add_option("--provider", provider_files, "Provider config file (repeatable)")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = cmd::load_tool_config(config_path);
    const std::string who = reviewer.empty() ? cfg.reviewer : reviewer;
    std::vector<std::string> providers = provider_files;
    if (providers.empty()) providers = cfg.provider_files;

    if (*init) {
      init_opts.filters.year_min = year_min;
      init_opts.filters.year_max = year_max;
      auto p = cmd::init(project_path, init_opts, cfg, seed);
      std::cout << "created project " << p.id << " at " << project_path << "\n";
    } else if (*import) {
      auto n = cmd::import_file(project_path, import_file, egm::ingest::parse_import_format(import_format));
      std::cout << "imported " << n << " new record(s)\n";
    } else if (*search) {
      egm::ingest::HttplibTransport transport;
      egm::ingest::SystemClock clock;
      egm::ingest::SearchOptions opts;
      opts.page_cap = page_cap.value_or(cfg.page_cap);
      auto res = cmd::search(project_path, load_providers(providers), search_query, transport, clock, opts);
      std::cout << nlohmann::json{{"run", res.run}, {"added", res.added}}.dump(2) << "\n";
    } else if (*screen) {
      auto res = cmd::screen_batch(project_path, screen_file, who, egm::ingest::utc_timestamp());
      std::cout << res.rows << " decision(s), " << res.changed << " changed\n";
    } else if (*fit) {
      auto p = egm::service::load_project(project_path);
      auto settings = cmd::merged_settings(p.model_settings, cfg, seed);
      if (sweeps) settings.fit.sweeps = *sweeps;
      if (burn_in) settings.fit.burn_in = *burn_in;
      if (chains) settings.fit.chains = *chains;
      settings.fit.validate();
      std::cout << cmd::fit(project_path, settings).dump(2) << "\n";
    } else if (*suggest) {
      std::cout << nlohmann::json(cmd::suggest(project_path, topic, tau)).dump(2) << "\n";
    } else if (*code) {
      auto res = cmd::code_batch(project_path, code_file, who, egm::ingest::utc_timestamp());
      std::cout << res.rows << " coding(s), " << res.changed << " changed\n";
    } else if (*egm_cmd) {
      egm::core::EgmFilters filters;
      filters.geography = geography;
      if (study_type) filters.study_type = egm::core::parse_study_type(*study_type);
      filters.population = population;
      if (quality) filters.quality = egm::core::parse_quality(*quality);
      write_output(cmd::egm(project_path, egm::core::parse_export_format(egm_format), filters), egm_out);
    } else if (*serve) {
      egm::service::ServiceConfig scfg;
      scfg.providers = load_providers(providers);
      scfg.reviewer = who;
      scfg.search.page_cap = cfg.page_cap;
      if (!data_dir.empty()) scfg.data_dir = data_dir;
      egm::service::EgmService svc(scfg);
      if (data_dir.empty()) {
        std::cout << "serving project " << svc.open_project(project_path) << "\n";
      } else {
        svc.open_data_dir();
      }
      httplib::Server server;
      egm::service::register_routes(server, svc);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      if (!server.bind_to_port(host, port)) {
        throw egm::Error(egm::ErrorCode::BindError, "cannot bind " + host + ":" + std::to_string(port));
      }
      std::cout << "listening on http://" << host << ":" << port << "/api/v1\n" << std::flush;
      server.listen_after_bind();
      g_server = nullptr;
    }
  } catch (const egm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
