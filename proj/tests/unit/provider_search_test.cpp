#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "egm/error.hpp"
#include "egm/ingest/provider.hpp"
#include "egm/ingest/search.hpp"
#include "support/clock.hpp"
#include "support/fake_transport.hpp"
#include "support/mock_provider.hpp"
#include "support/temp_dir.hpp"

using namespace egm;
using namespace egm::ingest;
using egm::testkit::FakeTransport;
using egm::testkit::ManualClock;
using nlohmann::json;

namespace {

ProviderConfig simple_provider(std::string name, std::string url) {
  ProviderConfig p;
  p.name = std::move(name);
  p.base_url = std::move(url);
  p.rate_limit = 5;
  p.paging.max_page_size = 2;
  p.field_map = {{"items", "items"}, {"total", "total"}, {"title", "title"}, {"doi", "doi"},
                 {"year", "year"},   {"abstract", "abstract"}};
  p.boolean_syntax = identity_syntax();
  return p;
}

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }
std::optional<std::string> with_key(const std::string&) { return std::string("k"); }

json item(const std::string& title, std::optional<std::string> doi = {}, int year = 2015) {
  json j = {{"title", title}, {"year", year}, {"abstract", "about schools"}};
  if (doi) j["doi"] = *doi;
  return j;
}

HttpResponse page_of(const std::vector<json>& all, const std::string& path, int size = 2) {
  int page = std::stoi(testkit::query_value(path, "page"));
  json items = json::array();
  for (int i = (page - 1) * size; i < page * size && i < static_cast<int>(all.size()); ++i) items.push_back(all[i]);
  return {200, json{{"total", all.size()}, {"items", items}}.dump(), {}};
}

SearchOptions search_opts() {
  SearchOptions o;
  o.timestamp = [] { return std::string("2026-01-01T00:00:00Z"); };
  o.env = with_key;
  return o;
}

}  // namespace

TEST(Fetch, MockServerTwoItems) {
  testkit::MockProviderServer server({{{"title", "School meals"}, {"doi", "https://doi.org/10.7/A"}, {"year", 2019},
                                       {"authors", {"Ann Lee"}}, {"abstract", "<p>Meals</p>"}},
                                      {{"title", "Cash grants"}, {"year", 2020}}});
  ProviderConfig p = load_provider_config(testkit::fixture("providers/core_like.json"));
  p.base_url = server.core_url();
  HttplibTransport transport(5);
  SystemClock clock;
  RateLimiter limiter(p.rate_limit);
  FetchContext ctx{transport, clock, limiter,
                   [](const std::string& k) -> std::optional<std::string> {
                     if (k == "EGM_TEST_CORE_KEY") return std::string(testkit::MockProviderServer::kCoreKey);
                     return std::nullopt;
                   }};
  auto page = fetch_provider_page(p, "meals", {}, 1, ctx);
  ASSERT_EQ(page.records.size(), 2u);
  EXPECT_FALSE(page.has_more);
  EXPECT_EQ(page.records[0].title, "School meals");
  EXPECT_EQ(page.records[0].doi, "10.7/a");
  EXPECT_EQ(page.records[0].abstract, "Meals");
  EXPECT_EQ(page.records[0].authors, (std::vector<std::string>{"Ann Lee"}));
  EXPECT_EQ(page.records[0].source, "core");
  EXPECT_EQ(page.records[1].abstract, "");
  EXPECT_FALSE(page.records[1].doi);
  auto reqs = server.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].params.at("q"), "meals");
  EXPECT_EQ(reqs[0].params.at("offset"), "0");
  EXPECT_EQ(reqs[0].params.at("limit"), "10");
}

TEST(Fetch, MissingKeyFailsBeforeAnyRequest) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest&) { return HttpResponse{200, "{}", {}}; });
  auto p = simple_provider("p", "http://x/api");
  p.auth_header_name = "X-Key";
  p.api_key_env_var = "EGM_NO_SUCH_VARIABLE";
  RateLimiter limiter(p.rate_limit);
  FetchContext ctx{t, clock, limiter, no_env};
  try {
    fetch_provider_page(p, "q", {}, 1, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthError);
  }
  EXPECT_EQ(t.count(), 0u);
}

TEST(Fetch, MissingTitlePathIsMalformedAndNamed) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest&) {
    return HttpResponse{200, R"({"total": 1, "items": [{"name": "untitled"}]})", {}};
  });
  auto p = simple_provider("p", "http://x/api");
  p.field_map["title"] = "bibjson.title";
  RateLimiter limiter(p.rate_limit);
  FetchContext ctx{t, clock, limiter, no_env};
  try {
    fetch_provider_page(p, "q", {}, 1, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedPayload);
    EXPECT_NE(std::string(e.what()).find("bibjson.title"), std::string::npos);
  }
}

TEST(Fetch, MalformedBodies) {
  ManualClock clock;
  auto p = simple_provider("p", "http://x/api");
  RateLimiter limiter(p.rate_limit);
  for (std::string body : {"not json", R"({"items": 3})", R"({"other": []})"}) {
    FakeTransport t([&](const HttpRequest&) { return HttpResponse{200, body, {}}; });
    FetchContext ctx{t, clock, limiter, no_env};
    try {
      fetch_provider_page(p, "q", {}, 1, ctx);
      ADD_FAILURE() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedPayload) << body;
    }
  }
}

TEST(Fetch, StatusMapping) {
  ManualClock clock;
  auto p = simple_provider("p", "http://x/api");
  RateLimiter limiter(p.rate_limit);
  for (auto [status, code] : {std::pair{401, ErrorCode::AuthError}, std::pair{403, ErrorCode::AuthError},
                              std::pair{500, ErrorCode::NetworkError}}) {
    FakeTransport t([&](const HttpRequest&) { return HttpResponse{status, "", {}}; });
    FetchContext ctx{t, clock, limiter, no_env};
    try {
      fetch_provider_page(p, "q", {}, 1, ctx);
      ADD_FAILURE() << status;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << status;
    }
  }
}

TEST(Fetch, RetriesOnceAfter429ThenFails) {
  ManualClock clock;
  auto p = simple_provider("p", "http://x/api");
  RateLimiter limiter(100);
  int calls = 0;
  FakeTransport once([&](const HttpRequest&) {
    return ++calls == 1 ? HttpResponse{429, "", {{"retry-after", "7"}}}
                        : HttpResponse{200, R"({"total": 1, "items": [{"title": "ok"}]})", {}};
  });
  FetchContext ctx{once, clock, limiter, no_env};
  double before = clock.now();
  auto res = fetch_provider_page(p, "q", {}, 1, ctx);
  EXPECT_EQ(res.records.size(), 1u);
  EXPECT_EQ(once.count(), 2u);
  EXPECT_GE(clock.now() - before, 7.0);

  FakeTransport always([](const HttpRequest&) { return HttpResponse{429, "", {{"retry-after", "1"}}}; });
  FetchContext ctx2{always, clock, limiter, no_env};
  try {
    fetch_provider_page(p, "q", {}, 1, ctx2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RateLimited);
  }
  EXPECT_EQ(always.count(), 2u);
}

TEST(Fetch, CrossrefShapeMapping) {
  ProviderConfig p = load_provider_config(testkit::fixture("providers/crossref_like.json"));
  std::string body = R"({"message": {"total-results": 1, "items": [{
      "title": ["Meals and <i>learning</i>"], "DOI": "10.5/XY",
      "abstract": "<jats:p>We study meals.</jats:p>",
      "published": {"date-parts": [[2018, 4, 2]]},
      "author": [{"given": "A", "family": "Smith"}, {"given": "B", "family": "Jones"}],
      "container-title": ["Food Policy"], "URL": "https://doi.org/10.5/xy"}]}})";
  auto res = map_provider_payload(p, body, 1);
  ASSERT_EQ(res.records.size(), 1u);
  const auto& r = res.records[0];
  EXPECT_EQ(r.abstract, "We study meals.");
  EXPECT_EQ(r.year, 2018);
  EXPECT_EQ(r.doi, "10.5/xy");
  EXPECT_EQ(r.authors, (std::vector<std::string>{"Smith", "Jones"}));
  EXPECT_EQ(r.venue, "Food Policy");
  EXPECT_FALSE(res.has_more);
}

TEST(Fetch, RequestShape) {
  auto p = simple_provider("p", "https://api.example.org/v1/search?fmt=json");
  p.auth_header_name = "Authorization";
  p.auth_value_prefix = "Bearer ";
  p.paging = {"offset", "start", "rows", 25};
  p.filter_params = {{"year_min", "from"}, {"languages", "lang"}};
  p.extra_params = {{"sort", "relevance"}};
  SearchFilters f;
  f.year_min = 2000;
  f.year_max = 2010;
  f.languages = {"en", "es"};
  auto req = build_page_request(p, "a AND \"b c\"", f, 3, std::string("secret"));
  EXPECT_EQ(req.base_url, "https://api.example.org");
  EXPECT_EQ(req.path, "/v1/search?fmt=json&q=a%20AND%20%22b%20c%22&start=50&rows=25&from=2000&lang=en%2Ces&sort=relevance");
  EXPECT_EQ(req.headers.at("Authorization"), "Bearer secret");
}

TEST(Fetch, QueryStringKeyAndOneBasedStart) {
  auto p = simple_provider("p", "https://api.example.org/meta/v2/json");
  p.auth_query_param = "api_key";
  p.paging = {"offset", "s", "p", 25, 1};
  auto req = build_page_request(p, "x", {}, 2, std::string("secret"));
  EXPECT_EQ(req.path, "/meta/v2/json?q=x&s=26&p=25&api_key=secret");
  EXPECT_FALSE(req.headers.count("Authorization"));
  EXPECT_EQ(build_page_request(p, "x", {}, 1, std::nullopt).path, "/meta/v2/json?q=x&s=1&p=25");
  auto round = json(p).get<ProviderConfig>();
  EXPECT_EQ(round.auth_query_param, "api_key");
  EXPECT_EQ(round.paging.first_offset, 1);
  p.paging.first_offset = -1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Fetch, NetworkErrorsDoNotEchoTheQueryString) {
  HttplibTransport transport(1);
  HttpRequest req;
  req.base_url = "http://127.0.0.1:1";
  req.path = "/search?q=x&api_key=secret";
  try {
    transport.get(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NetworkError);
    EXPECT_EQ(std::string(e.what()).find("secret"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("/search"), std::string::npos) << e.what();
  }
}

TEST(Fetch, ConfigValidation) {
  auto p = simple_provider("p", "http://x");
  p.rate_limit = 0;
  EXPECT_THROW(p.validate(), Error);
  p = simple_provider("p", "http://x");
  p.field_map.erase("title");
  EXPECT_THROW(p.validate(), Error);
  EXPECT_THROW(json::parse(R"({"name": "n", "base_url": "u", "field_map": {"items": "i"}})").get<ProviderConfig>(), Error);
  auto round = json(simple_provider("p", "http://x")).get<ProviderConfig>();
  EXPECT_EQ(round.field_map, simple_provider("p", "http://x").field_map);
}

TEST(Filters, Admission) {
  SearchFilters f;
  f.year_min = 2000;
  f.year_max = 2005;
  StudyRecord r;
  r.year = 2003;
  EXPECT_TRUE(f.admits(r));
  r.year = 1999;
  EXPECT_FALSE(f.admits(r));
  r.year.reset();
  EXPECT_FALSE(f.admits(r));
  EXPECT_TRUE(SearchFilters{}.admits(r));
  EXPECT_THROW(json::parse(R"({"year_min": 2010, "year_max": 2000})").get<SearchFilters>(), Error);
}

TEST(RateLimit, AnyOneSecondWindowHoldsAtMostCeilRate) {
  std::mt19937 rng(3);
  for (double rate : {0.5, 1.0, 2.5, 3.0, 7.3, 20.0}) {
    ManualClock clock;
    RateLimiter limiter(rate);
    std::vector<double> times;
    for (int i = 0; i < 200; ++i) {
      if (rng() % 3 == 0) clock.advance(std::uniform_real_distribution<double>(0, 1.5)(rng));
      limiter.acquire(clock);
      times.push_back(clock.now());
    }
    const auto cap = static_cast<std::size_t>(std::ceil(rate));
    for (double start : times) {
      std::size_t in_window = std::count_if(times.begin(), times.end(),
                                            [&](double t) { return t >= start && t < start + 1.0; });
      EXPECT_LE(in_window, cap) << "rate " << rate;
    }
  }
}

TEST(RateLimit, SlotsStaySpacedUnderConcurrency) {
  SystemClock clock;
  RateLimiter limiter(200);
  std::mutex mu;
  std::vector<double> slots;
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i) {
        double s = limiter.acquire(clock);
        std::lock_guard lock(mu);
        slots.push_back(s);
      }
    });
  }
  threads.clear();
  std::sort(slots.begin(), slots.end());
  ASSERT_EQ(slots.size(), 40u);
  for (std::size_t i = 1; i < slots.size(); ++i) EXPECT_GE(slots[i] - slots[i - 1], 1.0 / 200 - 1e-9);
}

TEST(RunSearch, SameDoiFromTwoProvidersKeptOnce) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest& req) {
    std::string title = req.base_url == "http://a" ? "School feeding trial" : "School feeding: a trial";
    return page_of({item(title, std::string("10.1/same"))}, req.path);
  });
  std::vector<StudyRecord> corpus;
  auto out = run_search("run-1", "school", {}, {simple_provider("a", "http://a"), simple_provider("b", "http://b")},
                        corpus, {}, t, clock, search_opts());
  EXPECT_EQ(out.added.size(), 1u);
  EXPECT_EQ(corpus.size(), 1u);
  EXPECT_EQ(out.run.counts.at("a").fetched, 1);
  EXPECT_EQ(out.run.counts.at("b").fetched, 1);
  EXPECT_EQ(out.run.counts.at("a").kept + out.run.counts.at("b").kept, 1);
  EXPECT_EQ(out.run.status, RunStatus::Done);
  ASSERT_EQ(out.merge_log.size(), 1u);
  EXPECT_EQ(out.merge_log[0].reason, "doi");
}

TEST(RunSearch, OneProviderUnauthorizedStillCompletes) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest& req) {
    if (req.base_url == "http://bad") return HttpResponse{401, "", {}};
    return page_of({item("School one"), item("School two"), item("School three")}, req.path);
  });
  std::vector<StudyRecord> corpus;
  auto out = run_search("run-1", "school", {}, {simple_provider("bad", "http://bad"), simple_provider("good", "http://good")},
                        corpus, {}, t, clock, search_opts());
  EXPECT_EQ(out.run.status, RunStatus::Done);
  EXPECT_EQ(out.run.counts.at("bad").failed, 1);
  EXPECT_NE(out.run.counts.at("bad").error.find("AuthError"), std::string::npos);
  EXPECT_EQ(out.run.counts.at("good").fetched, 3);
  EXPECT_EQ(out.run.counts.at("good").pages, 2);
  EXPECT_EQ(corpus.size(), 3u);
}

TEST(RunSearch, AllProvidersFailing) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest&) { return HttpResponse{503, "", {}}; });
  std::vector<StudyRecord> corpus;
  try {
    run_search("run-1", "school", {}, {simple_provider("a", "http://a")}, corpus, {}, t, clock, search_opts());
    FAIL();
  } catch (const SearchFailed& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllProvidersFailed);
    EXPECT_EQ(e.run().status, RunStatus::Failed);
  }
  EXPECT_TRUE(corpus.empty());
}

TEST(RunSearch, PageCapMarksTruncation) {
  ManualClock clock;
  FakeTransport t([](const HttpRequest& req) {
    int page = std::stoi(testkit::query_value(req.path, "page"));
    json items = {item("School study " + std::to_string(2 * page)), item("School study " + std::to_string(2 * page + 1))};
    return HttpResponse{200, json{{"total", 1000000}, {"items", items}}.dump(), {}};
  });
  auto opts = search_opts();
  opts.page_cap = 100;
  std::vector<StudyRecord> corpus;
  auto out = run_search("run-1", "school", {}, {simple_provider("a", "http://a")}, corpus, {}, t, clock, opts);
  EXPECT_EQ(out.run.status, RunStatus::Done);
  EXPECT_TRUE(out.run.truncated);
  EXPECT_TRUE(out.run.counts.at("a").truncated);
  EXPECT_EQ(out.run.counts.at("a").pages, 100);
  EXPECT_EQ(t.count(), 100u);
}

TEST(RunSearch, NeverEmitsRecordsFailingQueryOrFilters) {
  ManualClock clock;
  std::mt19937 rng(8);
  std::vector<std::string> words = {"school", "meals", "cash", "pilot", "credit"};
  std::vector<json> items;
  for (int i = 0; i < 60; ++i) {
    std::string tag;
    for (int c = 0; c < 10; ++c) tag += static_cast<char>('a' + rng() % 26);
    std::string title = tag + " " + words[rng() % 5] + " " + words[rng() % 5];
    items.push_back(item(title, std::nullopt, 1995 + static_cast<int>(rng() % 25)));
  }
  FakeTransport t([&](const HttpRequest& req) { return page_of(items, req.path); });
  SearchFilters f;
  f.year_min = 2000;
  f.year_max = 2012;
  std::vector<StudyRecord> corpus;
  const std::string query = "(school OR cash) AND NOT pilot";
  auto out = run_search("run-1", query, f, {simple_provider("a", "http://a")}, corpus, {}, t, clock, search_opts());
  auto q = parse_query(query);
  ASSERT_FALSE(out.added.empty());
  for (const auto& r : out.added) {
    EXPECT_TRUE(eval_query(q, r)) << r.title;
    EXPECT_TRUE(f.admits(r)) << r.title;
  }
  std::size_t expected = 0;
  for (const auto& j : items) {
    StudyRecord r;
    r.title = j["title"];
    r.abstract = j["abstract"];
    r.year = j["year"].get<int>();
    expected += eval_query(q, r) && f.admits(r);
  }
  EXPECT_EQ(out.added.size(), expected);
}

TEST(RunSearch, SearchRunJsonRoundTrip) {
  SearchRun run;
  run.id = "run-3";
  run.query = "a";
  run.providers = {"x"};
  run.counts["x"] = {3, 2, 0, 1, false, ""};
  run.status = RunStatus::Done;
  EXPECT_EQ(json(run).get<SearchRun>(), run);
}
