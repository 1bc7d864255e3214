#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/error.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/search.hpp"
#include "egm/service/pipeline.hpp"
#include "egm/service/project.hpp"

namespace egm::service {

enum class JobKind { Search, Fit };
enum class JobStatus { Pending, Running, Done, Failed };

NLOHMANN_JSON_SERIALIZE_ENUM(JobKind, {{JobKind::Search, "search"}, {JobKind::Fit, "fit"}})
NLOHMANN_JSON_SERIALIZE_ENUM(JobStatus, {{JobStatus::Pending, "pending"},
                                         {JobStatus::Running, "running"},
                                         {JobStatus::Done, "done"},
                                         {JobStatus::Failed, "failed"}})

inline JobKind parse_job_kind(const std::string& s) {
  if (s == "search") return JobKind::Search;
  if (s == "fit") return JobKind::Fit;
  throw Error(ErrorCode::UnknownKind, "unknown job kind '" + s + "'");
}

struct Job {
  std::string id;
  JobKind kind = JobKind::Search;
  JobStatus status = JobStatus::Pending;
  double progress = 0;
  std::string error;
  nlohmann::json result = nullptr;

  bool terminal() const { return status == JobStatus::Done || status == JobStatus::Failed; }
};

inline void to_json(nlohmann::json& j, const Job& job) {
  j = nlohmann::json{{"id", job.id},         {"kind", job.kind},   {"status", job.status},
                     {"progress", job.progress}, {"error", job.error}, {"result", job.result}};
}

struct ServiceConfig {
  std::filesystem::path data_dir = "egm-data";
  std::vector<ingest::ProviderConfig> providers;
  std::string reviewer = "reviewer";
  ingest::SearchOptions search;
  std::function<std::unique_ptr<ingest::HttpTransport>()> make_transport = [] {
    return std::make_unique<ingest::HttplibTransport>();
  };
  std::shared_ptr<ingest::Clock> clock = std::make_shared<ingest::SystemClock>();
  std::function<std::string()> timestamp = ingest::utc_timestamp;
  // Runs on the worker thread right before a job does its work.
  std::function<void(JobKind)> job_started_hook;
};

// Holds open projects. Readers share a lock; every mutation is applied to a
// copy, saved atomically, then swapped in under an exclusive lock. Jobs work
// on snapshots and commit in one writer step.
class EgmService {
 public:
  explicit EgmService(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

  EgmService(const EgmService&) = delete;
  EgmService& operator=(const EgmService&) = delete;

  ~EgmService() { wait_for_jobs(); }

  const ServiceConfig& config() const { return cfg_; }

  // Registers an existing project file under its stored id.
  std::string open_project(const std::filesystem::path& path) {
    Project p = load_project(path);
    std::string id = p.id;
    auto slot = std::make_shared<Slot>();
    slot->project = std::move(p);
    slot->path = path;
    std::lock_guard lock(registry_mu_);
    slots_[id] = slot;
    return id;
  }

  // Loads every *.egm.json under the data directory.
  void open_data_dir() {
    if (!std::filesystem::exists(cfg_.data_dir)) return;
    for (const auto& entry : std::filesystem::directory_iterator(cfg_.data_dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > 9 && name.substr(name.size() - 9) == ".egm.json") open_project(entry.path());
    }
  }

  Project create_project(const std::string& name) {
    std::filesystem::create_directories(cfg_.data_dir);
    std::lock_guard lock(registry_mu_);
    std::string id;
    for (int n = static_cast<int>(slots_.size()) + 1;; ++n) {
      id = "p" + std::to_string(n);
      if (!slots_.count(id) && !std::filesystem::exists(cfg_.data_dir / (id + ".egm.json"))) break;
    }
    auto slot = std::make_shared<Slot>();
    slot->project = new_project(id, name);
    slot->path = cfg_.data_dir / (id + ".egm.json");
    save_project(slot->project, slot->path);
    slots_[id] = slot;
    return slot->project;
  }

  Project snapshot(const std::string& id) const {
    auto s = slot(id);
    std::shared_lock lock(s->mu);
    return s->project;
  }

  // Read access without copying.
  template <class Fn>
  auto read(const std::string& id, Fn&& fn) const {
    auto s = slot(id);
    std::shared_lock lock(s->mu);
    return fn(static_cast<const Project&>(s->project));
  }

  enum class Guard { None, CorpusOrScreening };

  // Applies fn to a copy of the project, persists it, then publishes it.
  template <class Fn>
  auto mutate(const std::string& id, Guard guard, Fn&& fn) {
    auto s = slot(id);
    std::unique_lock lock(s->mu);
    if (guard == Guard::CorpusOrScreening && s->running && s->running_kind == JobKind::Fit) {
      throw Error(ErrorCode::Conflict, "a model fit is running; corpus and screening are locked");
    }
    Project copy = s->project;
    auto result = fn(copy);
    save_project(copy, s->path);
    s->project = std::move(copy);
    return result;
  }

  Job submit_job(const std::string& id, JobKind kind, const nlohmann::json& params = nlohmann::json::object()) {
    auto s = slot(id);
    std::unique_lock lock(s->mu);
    if (s->running) throw Error(ErrorCode::Conflict, "project " + id + " already has a running job");
    Job job;
    job.id = "job-" + std::to_string(s->jobs.size() + 1);
    job.kind = kind;
    job.status = JobStatus::Running;
    s->jobs[job.id] = job;
    s->running = true;
    s->running_kind = kind;
    Project snap = s->project;
    s->workers.emplace_back([this, s, job_id = job.id, kind, params, snap = std::move(snap)]() mutable {
      run_job(s, job_id, kind, params, std::move(snap));
    });
    return job;
  }

  Job job(const std::string& id, const std::string& job_id) const {
    auto s = slot(id);
    std::shared_lock lock(s->mu);
    auto it = s->jobs.find(job_id);
    if (it == s->jobs.end()) throw Error(ErrorCode::NotFound, "unknown job " + job_id);
    return it->second;
  }

  void wait_for_jobs() {
    std::vector<std::shared_ptr<Slot>> all;
    {
      std::lock_guard lock(registry_mu_);
      for (auto& [id, s] : slots_) all.push_back(s);
    }
    for (auto& s : all) {
      std::vector<std::jthread> workers;
      {
        std::unique_lock lock(s->mu);
        workers.swap(s->workers);
      }
      workers.clear();
    }
  }

  bool has_project(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    return slots_.count(id) > 0;
  }

 private:
  struct Slot {
    Project project;
    std::filesystem::path path;
    mutable std::shared_mutex mu;
    std::map<std::string, Job> jobs;
    bool running = false;
    JobKind running_kind = JobKind::Search;
    std::vector<std::jthread> workers;
  };

  std::shared_ptr<Slot> slot(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    auto it = slots_.find(id);
    if (it == slots_.end()) throw Error(ErrorCode::NotFound, "unknown project " + id);
    return it->second;
  }

  void finish_job(const std::shared_ptr<Slot>& s, const std::string& job_id, JobStatus status, std::string error,
                  nlohmann::json result) {
    std::unique_lock lock(s->mu);
    Job& job = s->jobs[job_id];
    job.status = status;
    job.error = std::move(error);
    job.result = std::move(result);
    if (status == JobStatus::Done) job.progress = 1.0;
    s->running = false;
  }

  void set_progress(const std::shared_ptr<Slot>& s, const std::string& job_id, double progress) {
    std::unique_lock lock(s->mu);
    s->jobs[job_id].progress = progress;
  }

  void run_job(std::shared_ptr<Slot> s, const std::string& job_id, JobKind kind, const nlohmann::json& params,
               Project snap) {
    try {
      if (cfg_.job_started_hook) cfg_.job_started_hook(kind);
      nlohmann::json result = kind == JobKind::Search ? run_search_job(s, job_id, params, std::move(snap))
                                                      : run_fit_job(s, job_id, params, std::move(snap));
      finish_job(s, job_id, JobStatus::Done, {}, std::move(result));
    } catch (const ingest::SearchFailed& e) {
      {
        std::unique_lock lock(s->mu);
        Project copy = s->project;
        copy.search_runs.push_back(e.run());
        try {
          save_project(copy, s->path);
          s->project = std::move(copy);
        } catch (const Error&) {
        }
      }
      finish_job(s, job_id, JobStatus::Failed, e.what(), nlohmann::json{{"run", e.run()}});
    } catch (const std::exception& e) {
      finish_job(s, job_id, JobStatus::Failed, e.what(), nullptr);
    }
  }

  nlohmann::json run_search_job(const std::shared_ptr<Slot>& s, const std::string& job_id, const nlohmann::json& params,
                                Project snap) {
    std::string query = params.value("query", snap.criteria.query);
    ingest::SearchFilters filters =
        params.contains("filters") ? params.at("filters").get<ingest::SearchFilters>() : snap.criteria.filters;
    std::vector<ingest::ProviderConfig> providers;
    if (params.contains("providers")) {
      for (const auto& name : params.at("providers")) {
        bool found = false;
        for (const auto& p : cfg_.providers) {
          if (p.name == name.get<std::string>()) {
            providers.push_back(p);
            found = true;
          }
        }
        if (!found) throw Error(ErrorCode::InvalidArgument, "unknown provider " + name.get<std::string>());
      }
    } else {
      providers = cfg_.providers;
    }
    if (ingest::trim(query).empty()) throw Error(ErrorCode::EmptyQuery, "no inclusion query set");
    auto transport = cfg_.make_transport();
    ingest::SearchOptions opts = cfg_.search;
    if (params.contains("page_cap")) opts.page_cap = params.at("page_cap").get<int>();
    auto outcome = ingest::run_search(next_run_id(snap), query, filters, providers, snap.corpus, snap.retired_ids(),
                                      *transport, *cfg_.clock, opts);
    set_progress(s, job_id, 0.9);
    std::unique_lock lock(s->mu);
    Project copy = s->project;
    ingest::SearchRun run = outcome.run;
    std::size_t added = commit_search(copy, std::move(outcome));
    save_project(copy, s->path);
    s->project = std::move(copy);
    return nlohmann::json{{"run", run}, {"added", added}};
  }

  nlohmann::json run_fit_job(const std::shared_ptr<Slot>& s, const std::string& job_id, const nlohmann::json& params,
                             Project snap) {
    ModelSettings settings = snap.model_settings;
    if (params.contains("seed")) settings.fit.seed = params.at("seed").get<std::uint64_t>();
    if (params.contains("sweeps")) settings.fit.sweeps = params.at("sweeps").get<int>();
    if (params.contains("burn_in")) settings.fit.burn_in = params.at("burn_in").get<int>();
    if (params.contains("chains")) settings.fit.chains = params.at("chains").get<int>();
    settings.fit.validate();
    const double total = static_cast<double>(settings.fit.sweeps);
    auto artifacts = fit_project(snap, settings, [&](std::size_t chain, int sweep) {
      if (chain == 0 && sweep % 50 == 0) set_progress(s, job_id, 0.95 * sweep / total);
    });
    std::unique_lock lock(s->mu);
    Project copy = s->project;
    copy.model_settings = settings;
    commit_fit(copy, std::move(artifacts));
    save_project(copy, s->path);
    s->project = std::move(copy);
    return nlohmann::json{{"documents", s->project.model.at("doc_ids").size()},
                          {"final_score", s->project.model.at("score_trace").back()}};
  }

  ServiceConfig cfg_;
  mutable std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace egm::service
