#include "sentdiag/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/jsonl.hpp"

namespace sentdiag::pipeline {

namespace {

constexpr std::string_view kHarnessVersion = "0.1.0";
constexpr std::array<std::string_view, 3> kSets = {"gold", "ambiguous", "synthetic"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string file_safe(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
    throw ConfigError(std::string("config: '") + key + "' must be a non-empty string");
  }
  return j[key].get<std::string>();
}

std::size_t sample_size(const json& j, const char* key) {
  if (!j.contains(key)) return 0;
  if (!j[key].is_number_unsigned()) throw ConfigError(std::string("config: judge_sample.") + key + " must be >= 0");
  return j[key].get<std::size_t>();
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::partition: return "partition";
    case Stage::classify: return "classify";
    case Stage::gencf: return "gencf";
    case Stage::classify_cf: return "classify_cf";
    case Stage::judge: return "judge";
    case Stage::metrics: return "metrics";
  }
  return "partition";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

const provider::ModelHandle& RunConfig::model(const std::string& name) const {
  auto it = models.find(name);
  if (it == models.end()) throw ConfigError("config: no model named '" + name + "'");
  return it->second;
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.corpus = resolve(base_dir, required_string(j, "corpus"));
  c.exemplars = resolve(base_dir, required_string(j, "exemplars"));
  c.output_dir = resolve(base_dir, j.value("output_dir", std::string("run")));

  if (!j.contains("models") || !j["models"].is_object() || j["models"].empty()) {
    throw ConfigError("config: 'models' must map model names to handles");
  }
  for (const auto& [name, h] : j["models"].items()) {
    json hj = h;
    if (!hj.is_object()) throw ConfigError("config: model '" + name + "' must be an object");
    if (!hj.contains("name")) hj["name"] = name;
    if (hj.contains("options") && hj["options"].contains("script") && hj["options"]["script"].is_string()) {
      hj["options"]["script"] = resolve(base_dir, hj["options"]["script"].get<std::string>()).string();
    }
    if (hj.contains("endpoint") && hj["endpoint"].is_string()) {
      const auto ep = hj["endpoint"].get<std::string>();
      if (ep.rfind("replay://", 0) == 0) hj["endpoint"] = "replay://" + resolve(base_dir, ep.substr(9)).string();
    }
    auto handle = provider::handle_from_json(hj);
    c.models.emplace(name, std::move(handle));
  }
  if (!j.contains("classifiers") || !j["classifiers"].is_array() || j["classifiers"].empty()) {
    throw ConfigError("config: 'classifiers' must list at least one model");
  }
  std::set<std::string> seen;
  for (const auto& m : j["classifiers"]) {
    if (!m.is_string()) throw ConfigError("config: classifier names must be strings");
    const auto name = m.get<std::string>();
    c.model(name);
    if (!seen.insert(name).second) throw ConfigError("config: classifier '" + name + "' listed twice");
    c.classifiers.push_back(name);
  }
  c.generator = required_string(j, "generator");
  c.filter = required_string(j, "filter");
  c.judge = required_string(j, "judge");
  c.model(c.generator);
  c.model(c.filter);
  c.model(c.judge);

  const auto seeds = j.value("seeds", json::object());
  c.sample_seed = seeds.value("sample", std::uint64_t{0});
  c.jitter_seed = seeds.value("jitter", std::uint64_t{0});
  const auto js = j.value("judge_sample", json::object());
  c.judge_sample = JudgeSample{sample_size(js, "gold"), sample_size(js, "ambiguous"), sample_size(js, "synthetic"),
                               sample_size(js, "flips")};
  c.source = j;
  c.source.erase("output_dir");
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

fs::path Layout::verdicts(const std::string& model, std::string_view set) const {
  return root / "verdicts" / (file_safe(model) + "." + std::string(set) + ".jsonl");
}

Manifest build_manifest(const RunConfig& config) {
  if (!fs::exists(config.corpus)) throw ConfigError("corpus not found: " + config.corpus.string());
  const auto exemplars = probe::load_exemplars(config.exemplars);
  json doc{{"harness_version", kHarnessVersion},
           {"config", config.source},
           {"corpus_sha256", sha256_file(config.corpus)},
           {"exemplars", {{"version", exemplars.version}, {"sha256", exemplars.sha256}}}};
  Manifest m;
  m.text = doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
  m.sha256 = sha256_hex(m.text);
  return m;
}

std::vector<json> read_artifact(const fs::path& path, const std::string& manifest_sha256) {
  if (!fs::exists(path)) {
    throw DependencyError(path.string(), "required file " + path.string() + " is missing; run the stage that produces it first");
  }
  auto contents = jsonl::read_file(path);
  if (!contents.header) throw Error(path.string() + " has no header line");
  if (contents.header->manifest_sha256 != manifest_sha256) {
    throw Error(path.string() + " was produced by manifest " + contents.header->manifest_sha256 +
                ", not the current " + manifest_sha256 + "; rerun the stages that produce it");
  }
  return std::move(contents.records);
}

Runner::Runner(RunConfig config) : config_(std::move(config)) {
  layout_.root = config_.output_dir;
  manifest_ = build_manifest(config_);
}

void Runner::ensure_manifest() {
  if (manifest_written_) return;
  fs::create_directories(layout_.root);
  jsonl::write_text_file(layout_.manifest(), manifest_.text);
  manifest_written_ = true;
}

provider::Gateway& Runner::gateway() {
  ensure_manifest();
  if (!gateway_) {
    log_ = std::make_unique<provider::RunLog>(layout_.exchanges(), jsonl::Header{"exchanges", manifest_.sha256});
    gateway_ = std::make_unique<provider::Gateway>(*log_, config_.jitter_seed);
    gateway_->set_context("manifest_sha256", manifest_.sha256);
  }
  return *gateway_;
}

void Runner::write(const fs::path& path, std::string_view kind, const std::vector<json>& records) {
  ensure_manifest();
  jsonl::write_file(path, jsonl::Header{std::string(kind), manifest_.sha256}, records);
}

std::vector<Message> Runner::load_messages(const fs::path& path) {
  const auto records = read_artifact(path, manifest_.sha256);
  return corpus::ingest_records(records);
}

std::vector<probe::ModelVerdict> Runner::load_verdicts(const fs::path& path) {
  std::vector<probe::ModelVerdict> out;
  for (const auto& r : read_artifact(path, manifest_.sha256)) out.push_back(probe::verdict_from_json(r));
  return out;
}

void Runner::run(std::span<const Stage> stages) {
  ensure_manifest();
  for (auto st : kAllStages) {
    if (std::find(stages.begin(), stages.end(), st) == stages.end()) continue;
    spdlog::info("stage {}", to_string(st));
    switch (st) {
      case Stage::partition: partition(); break;
      case Stage::classify: classify(); break;
      case Stage::gencf: gencf(); break;
      case Stage::classify_cf: classify_cf(); break;
      case Stage::judge: judge(); break;
      case Stage::metrics: metrics(); break;
    }
  }
}

void Runner::partition() {
  const auto messages = corpus::ingest_file(config_.corpus.string());
  const auto parts = corpus::partition(messages);
  auto records = [](const std::vector<Message>& ms) {
    std::vector<json> out;
    for (const auto& m : ms) out.push_back(to_json(m));
    return out;
  };
  write(layout_.gold(), "gold", records(parts.gold));
  write(layout_.ambiguous(), "ambiguous", records(parts.ambiguous));
  write(layout_.cf_pool(), "cf_pool", records(parts.cf_pool));
  auto summary = corpus::partition_manifest(parts);
  summary["manifest_sha256"] = manifest_.sha256;
  jsonl::write_text_file(layout_.partition_summary(), summary.dump(2) + "\n");
}

void Runner::classify() {
  const auto gold = load_messages(layout_.gold());
  const auto ambiguous = load_messages(layout_.ambiguous());
  const auto exemplars = probe::load_exemplars(config_.exemplars);
  auto& gw = gateway();
  gw.set_context("exemplars_sha256", exemplars.sha256);
  for (const auto& name : config_.classifiers) {
    const auto& handle = config_.model(name);
    for (const auto& [set, messages] : {std::pair{"gold", &gold}, std::pair{"ambiguous", &ambiguous}}) {
      gw.set_context("stage", std::string("classify:") + set);
      const auto verdicts = probe::classify_set(gw, handle, *messages, exemplars.exemplars);
      std::vector<json> out;
      for (const auto& v : verdicts) out.push_back(probe::to_json(v));
      write(layout_.verdicts(name, set), "verdicts", out);
    }
  }
}

void Runner::gencf() { gencf(GencfOptions{}); }

void Runner::gencf(const GencfOptions& options) {
  const auto pool = load_messages(options.pool.empty() ? layout_.cf_pool() : options.pool);
  const auto& generator = config_.model(options.generator.empty() ? config_.generator : options.generator);
  const auto& filter = config_.model(options.filter.empty() ? config_.filter : options.filter);
  fs::path records_path = layout_.cf_records(), skips_path = layout_.cf_skips(), synth_path = layout_.synthetic_corpus();
  if (!options.records.empty()) {
    records_path = options.records;
    skips_path = fs::path(options.records).replace_extension(".skips.jsonl");
    synth_path = fs::path(options.records).replace_extension(".synthetic.jsonl");
  }
  auto& gw = gateway();
  gw.set_context("stage", "gencf");
  const auto result = forge::forge(gw, generator, filter, pool);
  std::vector<json> recs;
  for (const auto& r : result.records) recs.push_back(forge::to_json(r));
  std::vector<json> skips;
  for (const auto& s : result.skips) skips.push_back(forge::to_json(s));
  std::vector<json> synth;
  for (const auto& m : forge::synthetic_corpus(result.records)) synth.push_back(to_json(m));
  write(records_path, "cf_records", recs);
  write(skips_path, "cf_skips", skips);
  write(synth_path, "synthetic_corpus", synth);
  spdlog::info("gencf: {} completed, {} generation failures, {} selection failures of {}", result.completed(),
               result.generation_failed(), result.selection_failed(), pool.size());
}

void Runner::classify_cf() {
  const auto synthetic = load_messages(layout_.synthetic_corpus());
  const auto exemplars = probe::load_exemplars(config_.exemplars);
  auto& gw = gateway();
  gw.set_context("exemplars_sha256", exemplars.sha256);
  gw.set_context("stage", "classify:synthetic");
  for (const auto& name : config_.classifiers) {
    const auto verdicts = probe::classify_set(gw, config_.model(name), synthetic, exemplars.exemplars);
    std::vector<json> out;
    for (const auto& v : verdicts) out.push_back(probe::to_json(v));
    write(layout_.verdicts(name, "synthetic"), "verdicts", out);
  }
}

void Runner::judge() {
  std::map<std::string, std::vector<Message>> messages;
  messages["gold"] = load_messages(layout_.gold());
  messages["ambiguous"] = load_messages(layout_.ambiguous());
  messages["synthetic"] = load_messages(layout_.synthetic_corpus());
  std::vector<forge::CounterfactualRecord> records;
  for (const auto& r : read_artifact(layout_.cf_records(), manifest_.sha256)) records.push_back(forge::record_from_json(r));

  const std::map<std::string, std::size_t> sample_sizes{{"gold", config_.judge_sample.gold},
                                                        {"ambiguous", config_.judge_sample.ambiguous},
                                                        {"synthetic", config_.judge_sample.synthetic}};
  std::vector<rubric::ExplanationItem> items;
  std::uint64_t salt = 0;
  for (auto set : kSets) {
    std::unordered_map<std::string, const Message*> by_id;
    for (const auto& m : messages[std::string(set)]) by_id[m.id] = &m;
    std::vector<rubric::ExplanationItem> pool;
    for (const auto& name : config_.classifiers) {
      for (const auto& v : load_verdicts(layout_.verdicts(name, set))) {
        if (!v.covered || !v.explanation) continue;
        auto it = by_id.find(v.message_id);
        if (it == by_id.end()) throw Error("verdict for unknown message " + v.message_id);
        pool.push_back(rubric::ExplanationItem{*it->second, v, std::string(set)});
      }
    }
    const auto k = sample_sizes.at(std::string(set));
    if (k > 0) pool = rubric::sample<rubric::ExplanationItem>(pool, k, config_.sample_seed + salt);
    ++salt;
    items.insert(items.end(), pool.begin(), pool.end());
  }
  if (config_.judge_sample.flips > 0) {
    records = rubric::sample<forge::CounterfactualRecord>(records, config_.judge_sample.flips, config_.sample_seed + salt);
  }

  auto& gw = gateway();
  const auto& judge = config_.model(config_.judge);
  gw.set_context("stage", "judge:explanation");
  const auto exp = rubric::judge_explanations(gw, judge, items);
  gw.set_context("stage", "judge:cf_quality");
  const auto cfq = rubric::judge_cf_records(gw, judge, records);

  auto rows = [](const std::vector<rubric::RubricRow>& rs) {
    std::vector<json> out;
    for (const auto& r : rs) out.push_back(rubric::to_json(r));
    return out;
  };
  std::vector<json> failures;
  for (const auto& f : exp.failures) failures.push_back(rubric::to_json(f));
  for (const auto& f : cfq.failures) failures.push_back(rubric::to_json(f));
  write(layout_.explanation_rubrics(), "rubrics", rows(exp.rows));
  write(layout_.cf_rubrics(), "rubrics", rows(cfq.rows));
  write(layout_.judge_failures(), "judge_failures", failures);
}

report::MetricsReport Runner::metrics() {
  report::ReportInputs in;
  in.manifest_sha256 = manifest_.sha256;
  in.models = config_.classifiers;
  in.gold = load_messages(layout_.gold());
  in.ambiguous = load_messages(layout_.ambiguous());
  in.cf_pool_size = read_artifact(layout_.cf_pool(), manifest_.sha256).size();
  const bool have_cf = fs::exists(layout_.cf_records());
  if (have_cf) {
    std::vector<forge::CounterfactualRecord> records;
    for (const auto& r : read_artifact(layout_.cf_records(), manifest_.sha256)) {
      records.push_back(forge::record_from_json(r));
    }
    in.cf_records = std::move(records);
    for (const auto& s : read_artifact(layout_.cf_skips(), manifest_.sha256)) in.cf_skips.push_back(forge::skip_from_json(s));
  }
  for (const auto& name : config_.classifiers) {
    in.gold_verdicts[name] = load_verdicts(layout_.verdicts(name, "gold"));
    in.ambiguous_verdicts[name] = load_verdicts(layout_.verdicts(name, "ambiguous"));
    if (have_cf) in.synthetic_verdicts[name] = load_verdicts(layout_.verdicts(name, "synthetic"));
  }
  for (const auto& path : {layout_.explanation_rubrics(), layout_.cf_rubrics()}) {
    if (!fs::exists(path)) continue;
    for (const auto& r : read_artifact(path, manifest_.sha256)) in.rubric_rows.push_back(rubric::row_from_json(r));
  }
  // Human submissions are appended by the annotation service and carry no header.
  if (fs::exists(layout_.human_rubrics())) {
    for (const auto& r : jsonl::read_file(layout_.human_rubrics()).records) {
      in.rubric_rows.push_back(rubric::row_from_json(r));
    }
  }

  auto rep = report::compute(in);
  ensure_manifest();
  jsonl::write_text_file(layout_.metrics_json(), report::to_json(rep).dump(2) + "\n");
  jsonl::write_text_file(layout_.metrics_text(), report::render_text(rep));
  jsonl::write_text_file(layout_.kappa_csv(), report::kappa_csv(rep.gold_agreement));
  return rep;
}

annotation::Catalog Runner::catalog() {
  annotation::Catalog cat;
  std::map<std::string, std::vector<Message>> messages;
  messages["gold"] = load_messages(layout_.gold());
  messages["ambiguous"] = load_messages(layout_.ambiguous());
  const bool have_cf = fs::exists(layout_.cf_records());
  if (have_cf) messages["synthetic"] = load_messages(layout_.synthetic_corpus());
  std::unordered_map<std::string, const Message*> all;
  for (const auto& [set, ms] : messages) {
    for (const auto& m : ms) all[m.id] = &m;
  }
  for (auto set : kSets) {
    if (!messages.contains(std::string(set))) continue;
    for (const auto& name : config_.classifiers) {
      const auto path = layout_.verdicts(name, set);
      if (!fs::exists(path)) continue;
      for (const auto& v : load_verdicts(path)) {
        if (!v.covered || !v.explanation) continue;
        auto it = all.find(v.message_id);
        if (it == all.end()) continue;
        auto item = annotation::explanation_item(*it->second, v, set);
        cat.emplace(item.item_id, std::move(item));
      }
    }
  }
  if (have_cf) {
    for (const auto& r : read_artifact(layout_.cf_records(), manifest_.sha256)) {
      const auto rec = forge::record_from_json(r);
      auto it = all.find(rec.source_id);
      auto item = annotation::cf_item(rec, it == all.end() ? nullptr : it->second);
      cat.emplace(item.item_id, std::move(item));
    }
  }
  return cat;
}

}  // namespace sentdiag::pipeline
