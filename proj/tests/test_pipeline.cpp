#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sentdiag/errors.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/pipeline.hpp"
#include "support.hpp"

using namespace sentdiag;
using namespace sentdiag::pipeline;

namespace {

const fs::path kData = SENTDIAG_DATA_DIR;

json toy_config_json() {
  std::ifstream in(kData / "toy_config.json");
  return json::parse(in);
}

RunConfig toy_config(const fs::path& out, std::uint64_t sample_seed = 0) {
  auto j = toy_config_json();
  j["output_dir"] = out.string();
  if (sample_seed != 0) j["seeds"]["sample"] = sample_seed;
  return config_from_json(j, kData);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, ResolvesPathsAndRejectsUnknownModels) {
  testsupport::TempDir dir;
  const auto c = toy_config(dir.path());
  EXPECT_TRUE(c.corpus.is_absolute());
  EXPECT_TRUE(fs::exists(c.corpus));
  EXPECT_EQ(c.classifiers.size(), 3u);
  EXPECT_THROW(c.model("nope"), ConfigError);
  auto j = toy_config_json();
  j["classifiers"].push_back("ghost");
  EXPECT_THROW(config_from_json(j, kData), ConfigError);
}

TEST(Stages, ParseNames) {
  EXPECT_EQ(parse_stage("gencf"), Stage::gencf);
  EXPECT_EQ(parse_stage("metrics"), Stage::metrics);
  EXPECT_FALSE(parse_stage("everything"));
  for (auto s : kAllStages) EXPECT_EQ(parse_stage(to_string(s)), s);
}

TEST(Manifest, IndependentOfOutputDir) {
  testsupport::TempDir a, b;
  EXPECT_EQ(build_manifest(toy_config(a.path())).sha256, build_manifest(toy_config(b.path())).sha256);
  EXPECT_NE(build_manifest(toy_config(a.path())).sha256, build_manifest(toy_config(a.path(), 99)).sha256);
}

TEST(Run, FullToyRunProducesEveryArtifact) {
  testsupport::TempDir dir;
  Runner runner(toy_config(dir.path()));
  runner.run(kAllStages);
  const auto& l = runner.layout();
  for (const auto& p : {l.manifest(), l.exchanges(), l.gold(), l.ambiguous(), l.cf_pool(), l.cf_records(),
                        l.synthetic_corpus(), l.explanation_rubrics(), l.cf_rubrics(), l.metrics_json(),
                        l.metrics_text(), l.kappa_csv()}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  EXPECT_EQ(read_artifact(l.gold(), runner.manifest().sha256).size(), 50u);
  EXPECT_EQ(read_artifact(l.ambiguous(), runner.manifest().sha256).size(), 10u);
  const auto metrics = json::parse(slurp(l.metrics_json()));
  EXPECT_EQ(metrics["models"].size(), 3u);
  EXPECT_EQ(metrics["counterfactuals"]["pool"], 40);

  // Regenerating the report from persisted files is idempotent.
  const auto first = slurp(l.metrics_json());
  fs::remove_all(l.root / "report");
  Runner again(toy_config(dir.path()));
  const std::vector<Stage> only = {Stage::metrics};
  again.run(only);
  EXPECT_EQ(slurp(l.metrics_json()), first);
}

TEST(Run, TwoRunsAreByteIdentical) {
  testsupport::TempDir a, b;
  Runner ra(toy_config(a.path()));
  ra.run(kAllStages);
  Runner rb(toy_config(b.path()));
  rb.run(kAllStages);
  EXPECT_EQ(slurp(ra.layout().metrics_json()), slurp(rb.layout().metrics_json()));
  EXPECT_EQ(slurp(ra.layout().metrics_text()), slurp(rb.layout().metrics_text()));
}

TEST(Run, MissingUpstreamIsDependencyError) {
  testsupport::TempDir dir;
  Runner runner(toy_config(dir.path()));
  const std::vector<Stage> stages = {Stage::partition, Stage::classify_cf};
  try {
    runner.run(stages);
    FAIL() << "expected DependencyError";
  } catch (const DependencyError& e) {
    EXPECT_NE(std::string(e.what()).find("synthetic_corpus.jsonl"), std::string::npos);
  }
  EXPECT_TRUE(fs::exists(runner.layout().gold()));
}

TEST(Run, StaleArtifactsAreRejected) {
  testsupport::TempDir dir;
  Runner first(toy_config(dir.path()));
  const std::vector<Stage> part = {Stage::partition};
  first.run(part);
  Runner second(toy_config(dir.path(), 12345));
  const std::vector<Stage> classify = {Stage::classify};
  try {
    second.run(classify);
    FAIL() << "expected a stale-header error";
  } catch (const DependencyError&) {
    FAIL() << "stale file reported as missing";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("manifest"), std::string::npos) << e.what();
  }
}

TEST(Catalog, CoversExplanationsAndFlips) {
  testsupport::TempDir dir;
  Runner runner(toy_config(dir.path()));
  runner.run(kAllStages);
  const auto cat = runner.catalog();
  std::size_t exp = 0, cf = 0;
  for (const auto& [id, item] : cat) (item.kind == rubric::Kind::explanation ? exp : cf)++;
  EXPECT_GT(exp, 0u);
  EXPECT_GT(cf, 0u);
}

TEST(Run, GencfWithExplicitPathsWritesBesideRecords) {
  testsupport::TempDir dir;
  Runner runner(toy_config(dir.path()));
  runner.partition();
  Runner::GencfOptions opts;
  opts.records = dir / "custom" / "flips.jsonl";
  runner.gencf(opts);
  EXPECT_TRUE(fs::exists(dir / "custom" / "flips.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "custom" / "flips.skips.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "custom" / "flips.synthetic.jsonl"));
  EXPECT_FALSE(fs::exists(runner.layout().cf_records()));
  opts.generator = "ghost";
  EXPECT_THROW(runner.gencf(opts), ConfigError);
}
