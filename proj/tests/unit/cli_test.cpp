#include <gtest/gtest.h>

#include <cstdlib>

#include "egm/ingest/import.hpp"
#include "support/e2e_checks.hpp"
#include "support/mock_provider.hpp"
#include "support/temp_dir.hpp"

using namespace egm;

namespace {

int run(const std::string& args) {
  std::string command = std::string(EGM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(command.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, PipelineAgainstMockProviders) {
  testkit::MockProviderServer mock(testkit::load_jsonl(testkit::fixture("mock_corpus.jsonl")));
  ::setenv("EGM_TEST_CORE_KEY", testkit::MockProviderServer::kCoreKey, 1);
  testkit::TempDir dir;
  auto first = testkit::run_cli_pipeline(EGM_CLI_PATH, dir / "a", mock, 11);
  ASSERT_TRUE(first.failures.empty()) << first.failures.front();
  auto second = testkit::run_cli_pipeline(EGM_CLI_PATH, dir / "b", mock, 11);
  ASSERT_TRUE(second.failures.empty()) << second.failures.front();
  EXPECT_EQ(first.egm_json, second.egm_json);
  EXPECT_EQ(first.egm_csv, second.egm_csv);
  EXPECT_EQ(ingest::read_text_file((dir / "a" / "egm.json").string()).find("2026-"), std::string::npos);
}

TEST(Cli, MissingKeyFailsOnlyThatProvider) {
  testkit::MockProviderServer mock(testkit::load_jsonl(testkit::fixture("mock_corpus.jsonl")));
  ::unsetenv("EGM_TEST_CORE_KEY");
  testkit::TempDir dir;
  auto r = testkit::run_cli_pipeline(EGM_CLI_PATH, dir / "a", mock, 11);
  // Search still succeeds on crossref; screening then trips over core-only ids.
  ASSERT_FALSE(r.failures.empty());
  EXPECT_EQ(r.failures.front().rfind("`screen-batch`", 0), 0u) << r.failures.front();
  auto p = service::load_project(dir / "a" / "project.egm.json");
  ASSERT_EQ(p.search_runs.size(), 1u);
  EXPECT_EQ(p.corpus.size(), static_cast<std::size_t>(p.search_runs[0].counts.at("crossref").kept));
  EXPECT_EQ(p.search_runs[0].counts.at("core").failed, 1);
  EXPECT_EQ(p.search_runs[0].counts.at("crossref").fetched, 36);
  EXPECT_EQ(mock.request_count("core"), 0u);
}

TEST(Cli, ExitCodes) {
  testkit::TempDir dir;
  const std::string project = " --project " + (dir / "p.egm.json").string() + " ";
  EXPECT_NE(run("--bogus"), 0);
  EXPECT_EQ(run(project + "init --name x"), 0);
  EXPECT_EQ(run(project + "init --name x"), 2);  // already exists
  EXPECT_EQ(run(project + "search"), 2);         // no query
  EXPECT_EQ(run(project + "fit"), 2);            // no keywords
  EXPECT_EQ(run(project + "egm --format json"), 2);  // no framework
  EXPECT_EQ(run(project + "import " + testkit::fixture("mock_corpus.jsonl")), 0);
  EXPECT_EQ(run(" --project " + (dir / "missing.egm.json").string() + " egm"), 2);
}
