// sentiment-diagnostics: command-line front end for the harness.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "sentdiag/annotation.hpp"
#include "sentdiag/annotation_server.hpp"
#include "sentdiag/errors.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sentdiag;
using nlohmann::json;

namespace {

annotation::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DependencyError(p.string(), "required file " + p.string() + " is missing; run metrics first");
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Options {
  std::string config;
  std::string out_dir;
  bool verbose = false;
};

pipeline::Runner make_runner(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  auto cfg = pipeline::load_config(o.config);
  if (!o.out_dir.empty()) cfg.output_dir = fs::absolute(o.out_dir);
  return pipeline::Runner(std::move(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment diagnostics for chat-completion models on code-mixed text"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("-c,--config", opt.config, "Run config (JSON)");
  app.add_option("--out-dir", opt.out_dir, "Override the config's output_dir");
  app.add_flag("-v,--verbose", opt.verbose, "Debug logging");

  // run
  auto* run = app.add_subcommand("run", "Run pipeline stages in order");
  std::string stages_arg = "partition,classify,gencf,classify_cf,judge,metrics";
  run->add_option("--stages", stages_arg, "Comma-separated subset of partition,classify,gencf,classify_cf,judge,metrics");

  auto* part = app.add_subcommand("partition", "Split the corpus into gold, ambiguous and cf_pool sets");
  auto* gencf = app.add_subcommand("gencf", "Generate and select counterfactual flips for the cf_pool");
  pipeline::Runner::GencfOptions g_opts;
  std::string g_in, g_out;
  gencf->add_option("--model", g_opts.generator, "Generator model (defaults to the config's generator)");
  gencf->add_option("--filter-model", g_opts.filter, "Filter model (defaults to the config's filter)");
  gencf->add_option("--in", g_in, "cf_pool file (defaults to the run layout)");
  gencf->add_option("--out", g_out, "Counterfactual records file; skips and the synthetic corpus go beside it");

  // classify
  auto* classify = app.add_subcommand("classify", "Classify one message set with one model");
  std::string c_model, c_set = "gold", c_in, c_out;
  classify->add_option("--model", c_model, "Model name from the config")->required();
  classify->add_option("--set", c_set, "gold, ambiguous or synthetic")
      ->check(CLI::IsMember({"gold", "ambiguous", "synthetic"}));
  classify->add_option("--in", c_in, "Messages file (defaults to the run layout)");
  classify->add_option("--out", c_out, "Verdict file (defaults to the run layout)");

  // judge
  auto* judge = app.add_subcommand("judge", "Score explanations or flips with an LLM judge");
  std::string j_kind, j_model, j_in, j_out, j_messages, j_partition;
  judge->add_option("--kind", j_kind, "explanation or cfquality")
      ->required()
      ->check(CLI::IsMember({"explanation", "cfquality", "cf_quality"}));
  judge->add_option("--judge-model", j_model, "Judge model name (defaults to the config's judge)");
  judge->add_option("--in", j_in, "Verdict file (explanation) or counterfactual records (cfquality)")->required();
  judge->add_option("--out", j_out, "Rubric rows output")->required();
  judge->add_option("--messages", j_messages, "Messages the verdicts refer to (explanation only)");
  judge->add_option("--partition", j_partition, "Partition label recorded on explanation rows");

  auto* metrics = app.add_subcommand("metrics", "Compute the metrics report from persisted outputs");

  auto* report = app.add_subcommand("report", "Print the last metrics report");
  std::string r_format = "text";
  report->add_option("--format", r_format, "text, json or csv")->check(CLI::IsMember({"text", "json", "csv"}));

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Human rubric annotation");
  annotate->require_subcommand(1);
  auto* batch = annotate->add_subcommand("batch", "Sample items and write a task manifest");
  std::string b_kind, b_raters, b_out;
  std::size_t b_count = 0;
  std::uint64_t b_seed = 0;
  bool b_seed_set = false;
  batch->add_option("--kind", b_kind, "explanation or cfquality")
      ->required()
      ->check(CLI::IsMember({"explanation", "cfquality", "cf_quality"}));
  batch->add_option("--raters", b_raters, "Comma-separated rater ids")->required();
  batch->add_option("--count", b_count, "Items to sample (0 = all)");
  batch->add_option("--seed", b_seed, "Sampling seed (defaults to the config's sample seed)")
      ->each([&](const std::string&) { b_seed_set = true; });
  batch->add_option("--out", b_out, "Manifest path (defaults to <output_dir>/annotation/batch.json)");

  auto* serve = annotate->add_subcommand("serve", "Serve a task manifest over HTTP");
  std::string s_batch, s_tokens, s_host = "127.0.0.1", s_submissions, s_audit;
  int s_port = 8080;
  serve->add_option("--batch", s_batch, "Task manifest")->required();
  serve->add_option("--raters", s_tokens, "Rater token file {\"raters\": {id: token}}")->required();
  serve->add_option("--port", s_port, "Port (0 picks a free one)");
  serve->add_option("--host", s_host, "Bind address");
  serve->add_option("--submissions", s_submissions, "Submission log (defaults next to the manifest)");
  serve->add_option("--audit", s_audit, "Audit log (defaults next to the manifest)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(opt.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (run->parsed()) {
      std::vector<pipeline::Stage> stages;
      for (const auto& s : split_csv(stages_arg)) {
        auto st = pipeline::parse_stage(s);
        if (!st) throw ConfigError("unknown stage '" + s + "'");
        stages.push_back(*st);
      }
      auto runner = make_runner(opt);
      runner.run(stages);
      if (std::find(stages.begin(), stages.end(), pipeline::Stage::metrics) != stages.end()) {
        std::cout << slurp(runner.layout().metrics_text());
      }
    } else if (part->parsed()) {
      make_runner(opt).partition();
    } else if (gencf->parsed()) {
      g_opts.pool = g_in;
      g_opts.records = g_out;
      make_runner(opt).gencf(g_opts);
    } else if (classify->parsed()) {
      auto runner = make_runner(opt);
      const auto& layout = runner.layout();
      const fs::path in = !c_in.empty()                ? fs::path(c_in)
                          : c_set == "gold"           ? layout.gold()
                          : c_set == "ambiguous"      ? layout.ambiguous()
                                                      : layout.synthetic_corpus();
      const fs::path out = c_out.empty() ? layout.verdicts(c_model, c_set) : fs::path(c_out);
      const auto messages = runner.load_messages(in);
      const auto exemplars = probe::load_exemplars(runner.config().exemplars);
      auto& gw = runner.gateway();
      gw.set_context("exemplars_sha256", exemplars.sha256);
      gw.set_context("stage", "classify:" + c_set);
      const auto verdicts = probe::classify_set(gw, runner.config().model(c_model), messages, exemplars.exemplars);
      std::vector<json> rows;
      for (const auto& v : verdicts) rows.push_back(probe::to_json(v));
      runner.write(out, "verdicts", rows);
      std::cout << fmt::format("{}: {} verdicts, coverage {:.3f} -> {}\n", c_model, verdicts.size(),
                               probe::coverage(verdicts), out.string());
    } else if (judge->parsed()) {
      auto runner = make_runner(opt);
      const auto kind = *rubric::parse_kind(j_kind);
      const auto& handle = runner.config().model(j_model.empty() ? runner.config().judge : j_model);
      auto& gw = runner.gateway();
      gw.set_context("stage", "judge:" + std::string(rubric::to_string(kind)));
      const auto& sha = runner.manifest().sha256;
      rubric::Batch result;
      if (kind == rubric::Kind::explanation) {
        if (j_messages.empty()) throw ConfigError("--messages is required for explanation judging");
        std::map<std::string, Message> by_id;
        for (auto& m : runner.load_messages(j_messages)) by_id.emplace(m.id, m);
        std::vector<rubric::ExplanationItem> items;
        for (const auto& r : pipeline::read_artifact(j_in, sha)) {
          auto v = probe::verdict_from_json(r);
          if (!v.covered || !v.explanation) continue;
          auto it = by_id.find(v.message_id);
          if (it == by_id.end()) throw NotFoundError("verdict for unknown message " + v.message_id, {v.message_id});
          items.push_back({it->second, std::move(v), j_partition});
        }
        result = rubric::judge_explanations(gw, handle, items);
      } else {
        std::vector<forge::CounterfactualRecord> records;
        for (const auto& r : pipeline::read_artifact(j_in, sha)) records.push_back(forge::record_from_json(r));
        result = rubric::judge_cf_records(gw, handle, records);
      }
      std::vector<json> rows;
      for (const auto& r : result.rows) rows.push_back(rubric::to_json(r));
      std::vector<json> failures;
      for (const auto& f : result.failures) failures.push_back(rubric::to_json(f));
      runner.write(j_out, "rubrics", rows);
      fs::path fail_path(j_out);
      fail_path.replace_extension(".failures.jsonl");
      runner.write(fail_path, "judge_failures", failures);
      std::cout << fmt::format("{} rows, {} judge failures -> {}\n", rows.size(), failures.size(), j_out);
    } else if (metrics->parsed()) {
      auto runner = make_runner(opt);
      runner.metrics();
      std::cout << slurp(runner.layout().metrics_text());
    } else if (report->parsed()) {
      auto runner = make_runner(opt);
      const auto& l = runner.layout();
      std::cout << slurp(r_format == "json" ? l.metrics_json() : r_format == "csv" ? l.kappa_csv() : l.metrics_text());
    } else if (batch->parsed()) {
      auto runner = make_runner(opt);
      const auto kind = *rubric::parse_kind(b_kind);
      const auto catalog = runner.catalog();
      std::vector<std::string> ids;
      for (const auto& [id, item] : catalog) {
        if (item.kind == kind) ids.push_back(id);
      }
      const auto seed = b_seed_set ? b_seed : runner.config().sample_seed;
      if (b_count > 0) ids = rubric::sample<std::string>(ids, b_count, seed);
      const auto raters = split_csv(b_raters);
      const auto tasks = annotation::create_batch(catalog, ids, raters, kind);
      const fs::path out = b_out.empty() ? runner.layout().root / "annotation" / "batch.json" : fs::path(b_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      jsonl::write_text_file(out, annotation::manifest_text(tasks, seed));
      std::cout << fmt::format("{} items x {} raters = {} tasks -> {}\n", ids.size(), raters.size(), tasks.size(),
                               out.string());
    } else if (serve->parsed()) {
      const fs::path batch_path(s_batch);
      const auto dir = batch_path.has_parent_path() ? batch_path.parent_path() : fs::path(".");
      annotation::TaskStore store(annotation::read_manifest(batch_path), annotation::load_rater_tokens(s_tokens),
                                  s_submissions.empty() ? dir / "submissions.jsonl" : fs::path(s_submissions),
                                  s_audit.empty() ? dir / "audit.jsonl" : fs::path(s_audit));
      annotation::Server server(store);
      const int port = server.bind(s_host, s_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("annotation service on http://{}:{}", s_host, port);
      server.serve();
      g_server = nullptr;
    }
  } catch (const DependencyError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
