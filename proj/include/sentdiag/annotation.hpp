#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentdiag/corpus.hpp"
#include "sentdiag/counterfactual.hpp"
#include "sentdiag/rubric.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace sentdiag::annotation {

using nlohmann::json;

// Something a human can rate. The payload carries only what the rater needs
// to see; no machine rubric score ever goes into it.
struct Item {
  std::string item_id;
  rubric::Kind kind = rubric::Kind::explanation;
  std::string model;
  std::string partition;
  json payload;
};

Item explanation_item(const Message& message, const probe::ModelVerdict& verdict, std::string_view partition);
// `source` supplies the translation of the original, when there is one.
Item cf_item(const forge::CounterfactualRecord& record, const Message* source);

using Catalog = std::map<std::string, Item>;

enum class TaskStatus { pending, submitted };
std::string_view to_string(TaskStatus s);

struct Task {
  std::string task_id;
  rubric::Kind kind = rubric::Kind::explanation;
  std::string item_id;
  std::string rater;
  std::string model;
  std::string partition;
  json payload;
  TaskStatus status = TaskStatus::pending;
};

// First 16 hex digits of sha256(kind, item, rater).
std::string task_id(rubric::Kind kind, std::string_view item_id, std::string_view rater);

// One task per (distinct item, rater), items in first-seen order. Duplicate
// items are collapsed with a warning. Throws NotFoundError listing every item
// id that is missing from the catalog or has the wrong kind.
std::vector<Task> create_batch(const Catalog& catalog, std::span<const std::string> item_ids,
                               std::span<const std::string> raters, rubric::Kind kind);

// Stable serialization: same tasks give the same bytes.
std::string manifest_text(const std::vector<Task>& tasks, std::uint64_t seed);
std::vector<Task> read_manifest(const std::filesystem::path& path);

// What a rater is shown: task id, kind, rubric dimension names and payload.
json task_view(const Task& task);

// rater id -> bearer token, from {"raters": {"<id>": "<token>", ...}}.
std::map<std::string, std::string> load_rater_tokens(const std::filesystem::path& path);

class TaskStore {
 public:
  // Submissions already in `submissions_path` mark their tasks as submitted,
  // so a restarted service resumes where it stopped.
  TaskStore(std::vector<Task> tasks, std::map<std::string, std::string> rater_tokens,
            std::filesystem::path submissions_path, std::filesystem::path audit_path);

  // Rater owning the token, if any.
  std::optional<std::string> rater_for_token(std::string_view token) const;

  // Oldest pending task for the rater. Throws AuthorizationError for an
  // unregistered rater.
  std::optional<Task> next_task(const std::string& rater) const;

  // Validates and appends. Throws NotFoundError, AuthorizationError (task
  // belongs to someone else), ConflictError (already submitted) or
  // ValidationError (schema), persisting nothing in those cases.
  rubric::RubricRow submit(const std::string& task_id, const std::string& rater, const json& body);

  json progress() const;
  std::size_t submitted_count() const;

 private:
  std::vector<Task> tasks_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::string> tokens_;
  std::filesystem::path submissions_path_;
  std::filesystem::path audit_path_;
  mutable std::shared_mutex mu_;
};

}  // namespace sentdiag::annotation
