#pragma once

#include <chrono>
#include <ctime>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/error.hpp"
#include "egm/ingest/dedupe.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/query.hpp"
#include "egm/ingest/record.hpp"

namespace egm::ingest {

enum class RunStatus { Pending, Running, Done, Failed };

NLOHMANN_JSON_SERIALIZE_ENUM(RunStatus, {{RunStatus::Pending, "pending"},
                                         {RunStatus::Running, "running"},
                                         {RunStatus::Done, "done"},
                                         {RunStatus::Failed, "failed"}})

struct ProviderCounts {
  int fetched = 0;
  int kept = 0;
  int failed = 0;
  int pages = 0;
  bool truncated = false;
  std::string error;

  bool operator==(const ProviderCounts&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ProviderCounts, fetched, kept, failed, pages, truncated, error)

struct SearchRun {
  std::string id;
  std::string query;
  SearchFilters filters;
  std::vector<std::string> providers;
  std::map<std::string, ProviderCounts> counts;
  std::string started;
  std::string finished;
  RunStatus status = RunStatus::Pending;
  bool truncated = false;

  bool operator==(const SearchRun&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SearchRun, id, query, filters, providers, counts, started, finished, status,
                                   truncated)

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct SearchOptions {
  int page_cap = 100;
  DedupeOptions dedupe;
  std::function<std::string()> timestamp = utc_timestamp;
  EnvLookup env = process_env;
};

struct SearchOutcome {
  SearchRun run;
  std::vector<StudyRecord> added;
  std::vector<MergeLogEntry> merge_log;
};

class SearchFailed : public Error {
 public:
  explicit SearchFailed(SearchRun run)
      : Error(ErrorCode::AllProvidersFailed, "every provider failed for run " + run.id), run_(std::move(run)) {}
  const SearchRun& run() const { return run_; }

 private:
  SearchRun run_;
};

namespace detail {

struct ProviderHarvest {
  std::vector<StudyRecord> records;
  ProviderCounts counts;
};

inline ProviderHarvest harvest_provider(const ProviderConfig& p, const QueryExpr& q, const SearchFilters& filters,
                                        const SearchOptions& opts, HttpTransport& transport, Clock& clock) {
  ProviderHarvest h;
  try {
    std::string rendered = render_query(q, p.boolean_syntax);
    RateLimiter limiter(p.rate_limit);
    FetchContext ctx{transport, clock, limiter, opts.env};
    for (int page = 1;; ++page) {
      if (page > opts.page_cap) {
        h.counts.truncated = true;
        break;
      }
      PageResult res = fetch_provider_page(p, rendered, filters, page, ctx);
      ++h.counts.pages;
      h.counts.fetched += static_cast<int>(res.records.size());
      for (auto& r : res.records) h.records.push_back(std::move(r));
      if (!res.has_more) break;
    }
  } catch (const Error& e) {
    h.counts.failed = 1;
    h.counts.error = e.what();
  }
  return h;
}

}  // namespace detail

// Queries every provider concurrently (one worker each), re-filters locally
// with eval_query and the filters, then dedupes against the run and the
// corpus. Records are only appended to `corpus` on success.
inline SearchOutcome run_search(const std::string& run_id, const std::string& query_text,
                                const SearchFilters& filters, const std::vector<ProviderConfig>& providers,
                                std::vector<StudyRecord>& corpus, const std::set<std::string>& retired_ids,
                                HttpTransport& transport, Clock& clock, const SearchOptions& opts = {}) {
  if (providers.empty()) throw Error(ErrorCode::InvalidArgument, "no provider configured");
  filters.validate();
  QueryExpr q = parse_query(query_text);

  SearchOutcome out;
  SearchRun& run = out.run;
  run.id = run_id;
  run.query = query_text;
  run.filters = filters;
  run.started = opts.timestamp();
  run.status = RunStatus::Running;
  for (const auto& p : providers) run.providers.push_back(p.name);

  std::vector<std::future<detail::ProviderHarvest>> workers;
  for (const auto& p : providers) {
    workers.push_back(std::async(std::launch::async, [&, pp = &p] {
      return detail::harvest_provider(*pp, q, filters, opts, transport, clock);
    }));
  }
  std::vector<StudyRecord> candidates;
  int failures = 0;
  for (std::size_t i = 0; i < providers.size(); ++i) {
    auto h = workers[i].get();
    if (h.counts.failed) ++failures;
    if (h.counts.truncated) run.truncated = true;
    run.counts[providers[i].name] = h.counts;
    for (auto& r : h.records) {
      if (!filters.admits(r) || !eval_query(q, r)) continue;
      candidates.push_back(std::move(r));
    }
  }
  run.finished = opts.timestamp();
  if (failures == static_cast<int>(providers.size())) {
    run.status = RunStatus::Failed;
    throw SearchFailed(run);
  }

  auto merged = merge_into_corpus(corpus, std::move(candidates), retired_ids, opts.dedupe);
  for (const auto& r : merged.added) ++run.counts[r.source].kept;
  out.added = std::move(merged.added);
  out.merge_log = std::move(merged.log);
  run.status = RunStatus::Done;
  return out;
}

}  // namespace egm::ingest
