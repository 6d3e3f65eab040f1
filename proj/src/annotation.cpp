#include "sentdiag/annotation.hpp"

#include <chrono>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "sentdiag/errors.hpp"
#include "sentdiag/hashing.hpp"
#include "sentdiag/jsonl.hpp"
#include "sentdiag/text.hpp"

namespace sentdiag::annotation {

namespace {

void add_translation(json& payload, const Message* m) {
  if (m && m->translation && !text::trim(*m->translation).empty()) {
    payload["translation"] = *m->translation;
    payload["translation_shown"] = true;
  } else {
    payload["translation_shown"] = false;
  }
}

json dimension_names(rubric::Kind kind) {
  json out = json::array();
  const auto& keys = rubric::dimensions(kind);
  const auto& names = rubric::display_names(kind);
  for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(json{{"key", keys[i]}, {"label", names[i]}});
  return out;
}

void append_line(const std::filesystem::path& path, const json& value) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to " + path.string());
  out << jsonl::dump_line(value) << '\n';
  out.flush();
  if (!out) throw Error("write failed on " + path.string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Item explanation_item(const Message& message, const probe::ModelVerdict& verdict, std::string_view partition) {
  if (!verdict.covered || !verdict.label || !verdict.explanation) {
    throw PreconditionError("verdict for " + verdict.message_id + " has no explanation to rate");
  }
  Item it;
  it.item_id = rubric::explanation_item_id(verdict.model, verdict.message_id);
  it.kind = rubric::Kind::explanation;
  it.model = verdict.model;
  it.partition = std::string(partition);
  it.payload = json{{"message_text", message.text},
                    {"predicted_sentiment", to_string(*verdict.label)},
                    {"explanation", *verdict.explanation}};
  add_translation(it.payload, &message);
  return it;
}

Item cf_item(const forge::CounterfactualRecord& record, const Message* source) {
  const auto& flip = record.selected_candidate();
  json comps = json::array();
  for (auto c : flip.components_changed) comps.push_back(forge::to_string(c));
  for (const auto& q : flip.quarantined_components) comps.push_back(q);
  Item it;
  it.item_id = rubric::cf_item_id(record.source_id);
  it.kind = rubric::Kind::cf_quality;
  it.model = record.generator_model;
  it.partition = "synthetic";
  it.payload = json{{"original_text", record.original_text},
                    {"cf_text", flip.cf_text},
                    {"components_changed", comps},
                    {"flip_explanation", flip.flip_explanation}};
  add_translation(it.payload, source);
  return it;
}

std::string_view to_string(TaskStatus s) { return s == TaskStatus::pending ? "pending" : "submitted"; }

std::string task_id(rubric::Kind kind, std::string_view item_id, std::string_view rater) {
  std::string key(rubric::to_string(kind));
  key += '\n';
  key += item_id;
  key += '\n';
  key += rater;
  return sha256_hex(key).substr(0, 16);
}

std::vector<Task> create_batch(const Catalog& catalog, std::span<const std::string> item_ids,
                               std::span<const std::string> raters, rubric::Kind kind) {
  std::vector<std::string> missing;
  std::vector<const Item*> items;
  std::set<std::string> seen;
  for (const auto& id : item_ids) {
    if (!seen.insert(id).second) {
      spdlog::warn("create_batch: duplicate item {} collapsed", id);
      continue;
    }
    auto it = catalog.find(id);
    if (it == catalog.end() || it->second.kind != kind) {
      missing.push_back(id);
      continue;
    }
    items.push_back(&it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw NotFoundError("unknown " + std::string(rubric::to_string(kind)) + " items: " + list, missing);
  }
  std::set<std::string> rater_seen;
  std::vector<std::string> unique_raters;
  for (const auto& r : raters) {
    if (rater_seen.insert(r).second) unique_raters.push_back(r);
  }
  std::vector<Task> tasks;
  tasks.reserve(items.size() * unique_raters.size());
  for (const auto* item : items) {
    for (const auto& r : unique_raters) {
      Task t;
      t.task_id = task_id(kind, item->item_id, r);
      t.kind = kind;
      t.item_id = item->item_id;
      t.rater = r;
      t.model = item->model;
      t.partition = item->partition;
      t.payload = item->payload;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

std::string manifest_text(const std::vector<Task>& tasks, std::uint64_t seed) {
  json list = json::array();
  for (const auto& t : tasks) {
    list.push_back(json{{"task_id", t.task_id},
                        {"kind", rubric::to_string(t.kind)},
                        {"item_id", t.item_id},
                        {"rater", t.rater},
                        {"model", t.model},
                        {"partition", t.partition},
                        {"payload", t.payload}});
  }
  json doc{{"seed", seed}, {"tasks", list}};
  return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::vector<Task> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open batch manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    std::vector<Task> tasks;
    for (const auto& j : doc.at("tasks")) {
      Task t;
      t.task_id = j.at("task_id").get<std::string>();
      auto kind = rubric::parse_kind(j.at("kind").get<std::string>());
      if (!kind) throw ConfigError("batch manifest: unknown kind " + j["kind"].dump());
      t.kind = *kind;
      t.item_id = j.at("item_id").get<std::string>();
      t.rater = j.at("rater").get<std::string>();
      t.model = j.value("model", "");
      t.partition = j.value("partition", "");
      t.payload = j.at("payload");
      tasks.push_back(std::move(t));
    }
    return tasks;
  } catch (const json::exception& e) {
    throw ConfigError("malformed batch manifest " + path.string() + ": " + e.what());
  }
}

json task_view(const Task& task) {
  return json{{"task_id", task.task_id},
              {"kind", rubric::to_string(task.kind)},
              {"dimensions", dimension_names(task.kind)},
              {"payload", task.payload},
              {"status", to_string(task.status)}};
}

std::map<std::string, std::string> load_rater_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open rater file " + path.string());
  try {
    const auto doc = json::parse(in);
    std::map<std::string, std::string> out;
    for (const auto& [rater, token] : doc.at("raters").items()) {
      if (!token.is_string() || token.get<std::string>().empty()) {
        throw ConfigError("rater " + rater + " needs a non-empty token");
      }
      out[rater] = token.get<std::string>();
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError("malformed rater file " + path.string() + ": " + e.what());
  }
}

TaskStore::TaskStore(std::vector<Task> tasks, std::map<std::string, std::string> rater_tokens,
                     std::filesystem::path submissions_path, std::filesystem::path audit_path)
    : tasks_(std::move(tasks)),
      tokens_(std::move(rater_tokens)),
      submissions_path_(std::move(submissions_path)),
      audit_path_(std::move(audit_path)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!by_id_.emplace(tasks_[i].task_id, i).second) {
      throw ConfigError("duplicate task id " + tasks_[i].task_id);
    }
  }
  if (std::filesystem::exists(submissions_path_)) {
    for (const auto& row : jsonl::read_file(submissions_path_).records) {
      auto it = by_id_.find(row.value("task_id", ""));
      if (it != by_id_.end()) tasks_[it->second].status = TaskStatus::submitted;
    }
  }
}

std::optional<std::string> TaskStore::rater_for_token(std::string_view token) const {
  if (token.empty()) return std::nullopt;
  for (const auto& [rater, t] : tokens_) {
    if (t == token) return rater;
  }
  return std::nullopt;
}

std::optional<Task> TaskStore::next_task(const std::string& rater) const {
  if (!tokens_.contains(rater)) throw AuthorizationError("unknown rater '" + rater + "'");
  std::shared_lock lock(mu_);
  for (const auto& t : tasks_) {
    if (t.rater == rater && t.status == TaskStatus::pending) return t;
  }
  return std::nullopt;
}

rubric::RubricRow TaskStore::submit(const std::string& id, const std::string& rater, const json& body) {
  std::unique_lock lock(mu_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw NotFoundError("unknown task " + id, {id});
  auto& task = tasks_[it->second];
  if (task.rater != rater) throw AuthorizationError("task " + id + " is not assigned to " + rater);
  if (task.status == TaskStatus::submitted) throw ConflictError("task " + id + " was already submitted");
  std::string reason;
  auto scores = rubric::parse_scores(task.kind, body, reason);
  if (!scores) throw ValidationError(reason);

  rubric::RubricRow row;
  row.item_id = task.item_id;
  row.kind = task.kind;
  row.rater = rubric::Rater{rubric::RaterKind::human, rater};
  row.model = task.model;
  row.partition = task.partition;
  row.scores = scores->values;
  row.comment = scores->comment;
  auto persisted = rubric::to_json(row);
  persisted["task_id"] = task.task_id;
  append_line(submissions_path_, persisted);
  append_line(audit_path_, json{{"event", "submit"}, {"task_id", task.task_id}, {"rater", rater}, {"at", utc_now()}});
  task.status = TaskStatus::submitted;
  return row;
}

json TaskStore::progress() const {
  std::shared_lock lock(mu_);
  json per_rater = json::object();
  for (const auto& [rater, token] : tokens_) per_rater[rater] = json{{"submitted", 0}, {"pending", 0}};
  json per_kind = json::object();
  std::size_t submitted = 0;
  for (const auto& t : tasks_) {
    const char* key = t.status == TaskStatus::submitted ? "submitted" : "pending";
    auto& r = per_rater[t.rater];
    if (r.is_null()) r = json{{"submitted", 0}, {"pending", 0}};
    r[key] = r[key].get<std::size_t>() + 1;
    auto& k = per_kind[std::string(rubric::to_string(t.kind))];
    if (k.is_null()) k = json{{"submitted", 0}, {"pending", 0}};
    k[key] = k[key].get<std::size_t>() + 1;
    if (t.status == TaskStatus::submitted) ++submitted;
  }
  return json{{"total", tasks_.size()},
              {"submitted", submitted},
              {"pending", tasks_.size() - submitted},
              {"per_rater", per_rater},
              {"per_kind", per_kind}};
}

std::size_t TaskStore::submitted_count() const {
  std::shared_lock lock(mu_);
  return static_cast<std::size_t>(std::count_if(tasks_.begin(), tasks_.end(),
                                                [](const Task& t) { return t.status == TaskStatus::submitted; }));
}

}  // namespace sentdiag::annotation
