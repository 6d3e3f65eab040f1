#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentdiag/annotation.hpp"
#include "sentdiag/corpus.hpp"
#include "sentdiag/counterfactual.hpp"
#include "sentdiag/provider.hpp"
#include "sentdiag/report.hpp"
#include "sentdiag/rubric.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace sentdiag::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

enum class Stage { partition, classify, gencf, classify_cf, judge, metrics };
std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);
inline constexpr std::array<Stage, 6> kAllStages = {Stage::partition, Stage::classify,    Stage::gencf,
                                                    Stage::classify_cf, Stage::judge, Stage::metrics};

// Per-set judge sample sizes; 0 means judge everything.
struct JudgeSample {
  std::size_t gold = 0;
  std::size_t ambiguous = 0;
  std::size_t synthetic = 0;
  std::size_t flips = 0;
};

struct RunConfig {
  fs::path corpus;
  fs::path exemplars;
  fs::path output_dir;
  std::map<std::string, provider::ModelHandle> models;
  std::vector<std::string> classifiers;
  std::string generator;
  std::string filter;
  std::string judge;
  std::uint64_t sample_seed = 0;
  std::uint64_t jitter_seed = 0;
  JudgeSample judge_sample;
  // The config as written, minus output_dir: this is what the manifest records.
  json source;

  const provider::ModelHandle& model(const std::string& name) const;
};

// Relative paths (corpus, exemplars, output_dir, mock scripts) resolve against
// `base_dir`. Throws ConfigError.
RunConfig config_from_json(const json& j, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

// Output layout under output_dir.
struct Layout {
  fs::path root;
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path exchanges() const { return root / "exchanges.jsonl"; }
  fs::path gold() const { return root / "partition" / "gold.jsonl"; }
  fs::path ambiguous() const { return root / "partition" / "ambiguous.jsonl"; }
  fs::path cf_pool() const { return root / "partition" / "cf_pool.jsonl"; }
  fs::path partition_summary() const { return root / "partition" / "summary.json"; }
  fs::path verdicts(const std::string& model, std::string_view set) const;
  fs::path cf_records() const { return root / "cf" / "records.jsonl"; }
  fs::path cf_skips() const { return root / "cf" / "skips.jsonl"; }
  fs::path synthetic_corpus() const { return root / "cf" / "synthetic_corpus.jsonl"; }
  fs::path explanation_rubrics() const { return root / "rubrics" / "explanations.jsonl"; }
  fs::path cf_rubrics() const { return root / "rubrics" / "cf_quality.jsonl"; }
  fs::path judge_failures() const { return root / "rubrics" / "failures.jsonl"; }
  fs::path human_rubrics() const { return root / "annotation" / "submissions.jsonl"; }
  fs::path metrics_json() const { return root / "report" / "metrics.json"; }
  fs::path metrics_text() const { return root / "report" / "metrics.txt"; }
  fs::path kappa_csv() const { return root / "report" / "kappa.csv"; }
};

// Serialized manifest text and its sha256. Contains no paths that depend on
// where the run is written, and no timestamps.
struct Manifest {
  std::string text;
  std::string sha256;
};
Manifest build_manifest(const RunConfig& config);

// Reads a harness-written JSONL file. Throws DependencyError naming the file
// when it is missing and Error when its header names a different manifest.
std::vector<json> read_artifact(const fs::path& path, const std::string& manifest_sha256);

// Runs stages in canonical order regardless of the order given. Earlier
// outputs stay on disk if a later stage throws.
class Runner {
 public:
  explicit Runner(RunConfig config);

  const RunConfig& config() const { return config_; }
  const Layout& layout() const { return layout_; }
  const Manifest& manifest() const { return manifest_; }
  // Opened lazily, after the manifest is on disk.
  provider::Gateway& gateway();

  void run(std::span<const Stage> stages);
  void partition();
  void classify();
  // Overrides for a standalone gencf run. Empty fields fall back to the
  // config and the run layout; with a custom `records` path the skips and the
  // synthetic corpus are written beside it.
  struct GencfOptions {
    std::string generator;
    std::string filter;
    fs::path pool;
    fs::path records;
  };
  void gencf();
  void gencf(const GencfOptions& options);
  void classify_cf();
  void judge();
  report::MetricsReport metrics();

  // Items available for human rating, built from persisted stage outputs.
  annotation::Catalog catalog();

  std::vector<Message> load_messages(const fs::path& path);
  std::vector<probe::ModelVerdict> load_verdicts(const fs::path& path);
  void write(const fs::path& path, std::string_view kind, const std::vector<json>& records);

 private:
  void ensure_manifest();

  RunConfig config_;
  Layout layout_;
  Manifest manifest_;
  std::unique_ptr<provider::RunLog> log_;
  std::unique_ptr<provider::Gateway> gateway_;
  bool manifest_written_ = false;
};

}  // namespace sentdiag::pipeline
