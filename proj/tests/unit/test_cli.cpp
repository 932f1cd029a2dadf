#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "ecc/ecc.hpp"
#include "test_support.hpp"

namespace ecc {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ECC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_worked_example(const fs::path& dir) {
  test::write_text(dir / "posts.jsonl",
                   "{\"id\":\"p1\",\"author\":\"b\",\"created_at\":86400,\"text\":\"\",\"likes\":0}\n"
                   "{\"id\":\"p2\",\"author\":\"c\",\"created_at\":172800,\"text\":\"\",\"likes\":0}\n"
                   "{\"id\":\"p3\",\"author\":\"a\",\"created_at\":259200,\"text\":\"\",\"likes\":0}\n");
  test::write_text(dir / "edges.jsonl",
                   "{\"follower\":\"a\",\"followee\":\"b\"}\n"
                   "{\"follower\":\"a\",\"followee\":\"c\"}\n");
  test::write_text(dir / "vectors.jsonl",
                   "{\"id\":\"p1\",\"vec\":[0]}\n{\"id\":\"p2\",\"vec\":[2]}\n{\"id\":\"p3\",\"vec\":[4]}\n");
}

std::string ecc_args(const fs::path& in, const fs::path& out) {
  return "eccentricity --posts " + q(in / "posts.jsonl") + " --edges " + q(in / "edges.jsonl") +
         " --vectors " + q(in / "vectors.jsonl") + " --out " + q(out);
}

const EccentricityRecord& find(const std::vector<EccentricityRecord>& recs, const std::string& id) {
  for (const auto& r : recs)
    if (r.post_id == id) return r;
  throw std::runtime_error("missing record " + id);
}

TEST(Cli, WorkedExample) {
  test::TempDir dir("cli_worked");
  write_worked_example(dir.path());
  ASSERT_EQ(run_cli(ecc_args(dir.path(), dir / "out")), 0);
  const auto recs = load_eccentricity_csv(dir / "out" / "eccentricity.csv");
  const auto& p3 = find(recs, "p3");
  ASSERT_TRUE(p3.eccentricity.has_value());
  EXPECT_NEAR(*p3.eccentricity, 3.0, 1e-12);
  EXPECT_EQ(p3.cloud_size, 2U);
  EXPECT_FALSE(p3.self_eccentricity.has_value());
  EXPECT_FALSE(find(recs, "p1").eccentricity.has_value());
}

TEST(Cli, ExitCodes) {
  test::TempDir dir("cli_exit");
  write_worked_example(dir.path());
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("eccentricity --posts " + q(dir / "nope.jsonl") + " --edges " + q(dir / "edges.jsonl") +
                    " --vectors " + q(dir / "vectors.jsonl") + " --out " + q(dir / "o1")),
            2);
  EXPECT_EQ(run_cli(ecc_args(dir.path(), dir / "o2") + " --window-days -1"), 2);
  EXPECT_EQ(run_cli("distributions --eccentricity " + q(dir / "missing.csv") + " --out " + q(dir / "o3")), 2);
  EXPECT_EQ(run_cli("dynamics --eccentricity " + q(dir / "posts.jsonl") + " --fg-weighting bogus --out " +
                    q(dir / "o4")),
            2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  test::TempDir dir("cli_config");
  write_worked_example(dir.path());
  test::write_text(dir / "cfg.json", "{\"window_days\": 0.5}");
  ASSERT_EQ(run_cli(ecc_args(dir.path(), dir / "a") + " --config " + q(dir / "cfg.json")), 0);
  EXPECT_FALSE(find(load_eccentricity_csv(dir / "a" / "eccentricity.csv"), "p3").eccentricity.has_value());
  ASSERT_EQ(run_cli(ecc_args(dir.path(), dir / "b") + " --config " + q(dir / "cfg.json") + " --window-days 3"), 0);
  EXPECT_TRUE(find(load_eccentricity_csv(dir / "b" / "eccentricity.csv"), "p3").eccentricity.has_value());

  test::write_text(dir / "bad.json", "{\"eccentricity\": {\"bogus\": 2}}");
  EXPECT_EQ(run_cli(ecc_args(dir.path(), dir / "c") + " --config " + q(dir / "bad.json")), 2);
  test::write_text(dir / "broken.json", "{not json");
  EXPECT_EQ(run_cli(ecc_args(dir.path(), dir / "d") + " --config " + q(dir / "broken.json")), 2);
}

// Runs synth -> eccentricity -> dynamics -> distributions -> report into `out`.
void run_pipeline(const fs::path& out, unsigned threads, const std::string& synth_args,
                  const std::string& dist_args = "") {
  const std::string t = " --threads " + std::to_string(threads);
  ASSERT_EQ(run_cli("synth " + synth_args + " --out " + q(out / "synth")), 0);
  const auto s = out / "synth";
  ASSERT_EQ(run_cli("eccentricity --posts " + q(s / "posts.jsonl") + " --edges " + q(s / "edges.jsonl") +
                    " --vectors " + q(s / "vectors.jsonl") + " --out " + q(out / "ecc") + t),
            0);
  ASSERT_EQ(run_cli("dynamics --eccentricity " + q(out / "ecc" / "eccentricity.csv") + " --out " + q(out / "dyn")), 0);
  ASSERT_EQ(run_cli("distributions --eccentricity " + q(out / "ecc" / "eccentricity.csv") + " --out " +
                    q(out / "dist") + t + " " + dist_args),
            0);
  ASSERT_EQ(run_cli("report --summary " + q(out / "dist" / "summary.json") + " --distribution " +
                    q(out / "dist" / "distribution.csv") + " --dynamics " + q(out / "dyn" / "dynamics.csv") +
                    " --out " + q(out / "report")),
            0);
}

TEST(Cli, OutputsIndependentOfThreadCount) {
  test::TempDir dir("cli_threads");
  const std::string synth = "--users 60 --days 12 --effect attention-coupling --strength 1 --seed 9";
  const std::string dist = "--p-method permutation --n-perm 199 --seed 4";
  run_pipeline(dir / "one", 1, synth, dist);
  run_pipeline(dir / "many", 4, synth, dist);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "one")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "one");
    EXPECT_EQ(read_file(e.path()), read_file(dir / "many" / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 15U);
}

TEST(Cli, SingleBinReportHasNoTests) {
  test::TempDir dir("cli_onebin");
  run_pipeline(dir.path(), 1, "--users 30 --days 10", "--bins ''");
  const auto report = nlohmann::json::parse(read_file(dir / "report" / "report.json"));
  EXPECT_EQ(report["distributions"]["bins"].size(), 1U);
  EXPECT_EQ(report["distributions"]["bins"][0]["label"], "All");
  EXPECT_TRUE(report["distributions"]["tests"].empty());
}

TEST(Cli, ElevatorDriftGivesPositiveSelfDrift) {
  test::TempDir dir("cli_drift");
  run_pipeline(dir.path(), 1, "--users 60 --days 30 --rate 2 --effect elevator-drift --strength 0.2");
  const auto rows = load_dynamics_csv(dir / "dyn" / "dynamics.csv");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.self) {
      sum += r.self->g;
      ++n;
    }
  ASSERT_GT(n, 0U);
  EXPECT_GT(sum / static_cast<double>(n), 0.0);
}

TEST(Cli, TextPipelineRuns) {
  test::TempDir dir("cli_text");
  ASSERT_EQ(run_cli("synth --users 20 --days 10 --text --out " + q(dir / "synth")), 0);
  ASSERT_EQ(run_cli("embed --posts " + q(dir / "synth" / "posts.jsonl") + " --dim 64 --min-count 2 --out " +
                    q(dir / "emb")),
            0);
  ASSERT_EQ(run_cli("pca --vectors " + q(dir / "emb" / "vectors.jsonl") + " --out " + q(dir / "pca")), 0);
  const auto vecs = load_external_vectors(dir / "pca" / "vectors.jsonl");
  EXPECT_GT(vecs.size(), 0U);
  EXPECT_LE(vecs.dim(), 64U);
  const auto manifest = nlohmann::json::parse(read_file(dir / "pca" / "manifest.json"));
  EXPECT_EQ(manifest["stage"], "pca");
  EXPECT_EQ(manifest["inputs"]["vectors"]["file"], "vectors.jsonl");
}

TEST(Cli, IngestLccAndSample) {
  test::TempDir dir("cli_graph");
  ASSERT_EQ(run_cli("synth --users 50 --days 5 --follow-prob 0.1 --out " + q(dir / "s")), 0);
  const auto s = dir / "s";
  const std::string in = " --posts " + q(s / "posts.jsonl") + " --edges " + q(s / "edges.jsonl");
  ASSERT_EQ(run_cli("ingest" + in + " --out " + q(dir / "ing")), 0);
  ASSERT_EQ(run_cli("lcc" + in + " --out " + q(dir / "lcc")), 0);
  ASSERT_EQ(run_cli("sample" + in + " --fraction 0.2 --seed 3 --out " + q(dir / "smp")), 0);
  EXPECT_EQ(run_cli("sample" + in + " --fraction 0 --out " + q(dir / "bad")), 2);
  const auto m = nlohmann::json::parse(read_file(dir / "smp" / "manifest.json"));
  EXPECT_EQ(m["counts"]["users"], 10);
}

}  // namespace
}  // namespace ecc
