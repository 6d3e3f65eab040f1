#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "sentdiag/annotation.hpp"
#include "sentdiag/annotation_server.hpp"
#include "sentdiag/errors.hpp"
#include "sentdiag/jsonl.hpp"
#include "support.hpp"

using namespace sentdiag;
using namespace sentdiag::annotation;
using L = SentimentLabel;

namespace {

Catalog make_catalog(int n) {
  Catalog c;
  for (int i = 0; i < n; ++i) {
    const auto id = "g" + std::to_string(i);
    auto m = testsupport::msg(id, "ujumbe " + std::to_string(i), L::Positive);
    if (i % 2 == 0) m.translation = "message " + std::to_string(i);
    auto it = explanation_item(m, testsupport::covered(id, "gpt", L::Positive, 4.0, "Because."), "gold");
    c.emplace(it.item_id, std::move(it));
  }
  return c;
}

std::vector<std::string> ids(const Catalog& c) {
  std::vector<std::string> out;
  for (const auto& [id, item] : c) out.push_back(id);
  return out;
}

json scores(int a, int b, int c, int d) {
  return json{{"faithfulness", a}, {"contextual_appropriateness", b}, {"logical_coherence", c}, {"clarity_and_completeness", d}};
}

std::size_t count_lines(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return 0;
  return jsonl::read_file(p).records.size();
}

// Recursively true if any object anywhere has a rubric dimension as a key.
bool leaks_scores(const json& j) {
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) {
      for (auto kind : {rubric::Kind::explanation, rubric::Kind::cf_quality}) {
        for (auto d : rubric::dimensions(kind)) {
          if (k == d) return true;
        }
      }
      if (leaks_scores(v)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (leaks_scores(v)) return true;
    }
  }
  return false;
}

const std::map<std::string, std::string> kTokens = {{"rater-a", "tok-a"}, {"rater-b", "tok-b"}};

}  // namespace

TEST(Batch, ItemsTimesRaters) {
  const auto cat = make_catalog(50);
  const auto item_ids = ids(cat);
  std::vector<std::string> raters;
  for (int i = 0; i < 6; ++i) raters.push_back("r" + std::to_string(i));
  const auto tasks = create_batch(cat, item_ids, raters, rubric::Kind::explanation);
  EXPECT_EQ(tasks.size(), 300u);
  std::set<std::string> unique;
  for (const auto& t : tasks) unique.insert(t.task_id);
  EXPECT_EQ(unique.size(), 300u);
  EXPECT_TRUE(create_batch(cat, item_ids, std::vector<std::string>{}, rubric::Kind::explanation).empty());
}

TEST(Batch, DuplicatesCollapseAndUnknownsListed) {
  const auto cat = make_catalog(3);
  auto item_ids = ids(cat);
  item_ids.push_back(item_ids[0]);
  const std::vector<std::string> raters = {"rater-a"};
  EXPECT_EQ(create_batch(cat, item_ids, raters, rubric::Kind::explanation).size(), 3u);
  const std::vector<std::string> bad = {item_ids[0], "nope-1", "nope-2"};
  try {
    create_batch(cat, bad, raters, rubric::Kind::explanation);
    FAIL() << "expected NotFoundError";
  } catch (const NotFoundError& e) {
    EXPECT_EQ(e.offenders(), (std::vector<std::string>{"nope-1", "nope-2"}));
  }
  EXPECT_THROW(create_batch(cat, ids(cat), raters, rubric::Kind::cf_quality), NotFoundError);
}

TEST(Batch, ManifestIsByteStableAndReadable) {
  testsupport::TempDir dir;
  const auto cat = make_catalog(5);
  const std::vector<std::string> raters = {"rater-a", "rater-b"};
  const auto a = manifest_text(create_batch(cat, ids(cat), raters, rubric::Kind::explanation), 11);
  const auto b = manifest_text(create_batch(cat, ids(cat), raters, rubric::Kind::explanation), 11);
  EXPECT_EQ(a, b);
  std::ofstream(dir / "batch.json") << a;
  const auto back = read_manifest(dir / "batch.json");
  EXPECT_EQ(back.size(), 10u);
  EXPECT_EQ(manifest_text(back, 11), a);
}

TEST(TaskView, HidesModelAndShowsTranslationFlag) {
  const auto cat = make_catalog(2);
  const std::vector<std::string> raters = {"rater-a"};
  const auto tasks = create_batch(cat, ids(cat), raters, rubric::Kind::explanation);
  for (const auto& t : tasks) {
    const auto v = task_view(t);
    EXPECT_FALSE(v.contains("model"));
    EXPECT_TRUE(v["payload"].contains("translation_shown"));
    EXPECT_EQ(v["dimensions"].size(), 4u);
    EXPECT_FALSE(leaks_scores(v));
  }
}

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto cat = make_catalog(5);
    const std::vector<std::string> raters = {"rater-a", "rater-b"};
    tasks_ = create_batch(cat, ids(cat), raters, rubric::Kind::explanation);
  }
  std::filesystem::path subs() const { return dir_ / "submissions.jsonl"; }
  std::filesystem::path audit() const { return dir_ / "audit.jsonl"; }

  testsupport::TempDir dir_;
  std::vector<Task> tasks_;
};

TEST_F(StoreTest, SubmitValidatesAndPersists) {
  TaskStore store(tasks_, kTokens, subs(), audit());
  const auto t = store.next_task("rater-a");
  ASSERT_TRUE(t);
  EXPECT_THROW(store.submit(t->task_id, "rater-a", scores(3, 1, 1, 1)), ValidationError);
  auto missing = scores(1, 1, 1, 1);
  missing.erase("faithfulness");
  EXPECT_THROW(store.submit(t->task_id, "rater-a", missing), ValidationError);
  auto boolean = scores(1, 1, 1, 1);
  boolean["faithfulness"] = true;
  EXPECT_THROW(store.submit(t->task_id, "rater-a", boolean), ValidationError);
  EXPECT_EQ(count_lines(subs()), 0u);
  EXPECT_THROW(store.submit(t->task_id, "rater-b", scores(1, 1, 1, 1)), AuthorizationError);
  EXPECT_THROW(store.submit("0000000000000000", "rater-a", scores(1, 1, 1, 1)), NotFoundError);

  auto body = scores(1, 0, 1, 1);
  body["comment"] = "vague";
  const auto row = store.submit(t->task_id, "rater-a", body);
  EXPECT_EQ(row.rater, (rubric::Rater{rubric::RaterKind::human, "rater-a"}));
  EXPECT_EQ(row.scores, (std::array<int, 4>{1, 0, 1, 1}));
  EXPECT_EQ(row.comment, "vague");
  EXPECT_THROW(store.submit(t->task_id, "rater-a", body), ConflictError);
  EXPECT_EQ(count_lines(subs()), 1u);
  EXPECT_EQ(count_lines(audit()), 1u);
  EXPECT_NE(store.next_task("rater-a")->task_id, t->task_id);
  EXPECT_THROW(store.next_task("stranger"), AuthorizationError);
}

TEST_F(StoreTest, TwoRatersSameItemBothPersistedAndResume) {
  {
    TaskStore store(tasks_, kTokens, subs(), audit());
    const auto a = store.next_task("rater-a");
    const auto b = store.next_task("rater-b");
    ASSERT_EQ(a->item_id, b->item_id);
    store.submit(a->task_id, "rater-a", scores(1, 1, 1, 1));
    store.submit(b->task_id, "rater-b", scores(0, 0, 0, 0));
    EXPECT_EQ(store.submitted_count(), 2u);
  }
  TaskStore again(tasks_, kTokens, subs(), audit());
  EXPECT_EQ(again.submitted_count(), 2u);
  EXPECT_EQ(again.progress()["submitted"], 2);
  EXPECT_EQ(again.progress()["total"], 10);
  const auto rows = jsonl::read_file(subs()).records;
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_NO_THROW(rubric::row_from_json(r));
}

class ServerTest : public StoreTest {
 protected:
  void SetUp() override {
    StoreTest::SetUp();
    store_ = std::make_unique<TaskStore>(tasks_, kTokens, subs(), audit());
    server_ = std::make_unique<Server>(*store_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100; ++i) {
      if (client_->Get("/api/health")) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  httplib::Result next(const std::string& rater, const std::string& token) {
    return client_->Get("/api/tasks/next?rater=" + rater, {{"Authorization", "Bearer " + token}});
  }
  httplib::Result submit(const std::string& id, const std::string& token, const std::string& body) {
    return client_->Post("/api/tasks/" + id + "/submit", {{"Authorization", "Bearer " + token}}, body, "application/json");
  }

  std::unique_ptr<TaskStore> store_;
  std::unique_ptr<Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServerTest, AuthContract) {
  auto r = client_->Get("/api/tasks/next?rater=rater-a");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(json::parse(r->body)["code"], "unauthorized");
  EXPECT_EQ(next("rater-a", "tok-b")->status, 403);
  EXPECT_EQ(client_->Get("/api/tasks/next", {{"Authorization", "Bearer tok-a"}})->status, 400);
  EXPECT_EQ(client_->Get("/api/nowhere")->status, 404);
  EXPECT_EQ(client_->Get("/api/health")->status, 200);
}

TEST_F(ServerTest, RoundTripIsBlindAndCounted) {
  std::vector<std::string> bodies;
  for (int i = 0; i < 5; ++i) {
    auto r = next("rater-a", "tok-a");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200);
    bodies.push_back(r->body);
    const auto view = json::parse(r->body);
    const auto id = view["task_id"].get<std::string>();

    auto bad = submit(id, "tok-a", scores(1, 3, 1, 1).dump());
    EXPECT_EQ(bad->status, 422);
    bodies.push_back(bad->body);
    EXPECT_EQ(submit(id, "tok-a", "{not json")->status, 400);
    EXPECT_EQ(submit(id, "tok-b", scores(1, 1, 1, 1).dump())->status, 403);

    auto ok = submit(id, "tok-a", scores(1, 1, i % 2, 1).dump());
    ASSERT_EQ(ok->status, 200) << ok->body;
    bodies.push_back(ok->body);
    EXPECT_EQ(submit(id, "tok-a", scores(1, 1, 1, 1).dump())->status, 409);
  }
  EXPECT_EQ(next("rater-a", "tok-a")->status, 204);

  auto p = client_->Get("/api/progress");
  bodies.push_back(p->body);
  const auto progress = json::parse(p->body);
  EXPECT_EQ(progress["submitted"], 5);
  EXPECT_EQ(progress["pending"], 5);
  EXPECT_EQ(progress["per_rater"]["rater-a"]["submitted"], 5);

  for (const auto& b : bodies) EXPECT_FALSE(leaks_scores(json::parse(b))) << b;
  EXPECT_EQ(count_lines(subs()), 5u);
  EXPECT_EQ(count_lines(audit()), 5u);
  const auto rows = jsonl::read_file(subs()).records;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rubric::row_from_json(rows[i]).scores[2], static_cast<int>(i % 2));
  }
}
