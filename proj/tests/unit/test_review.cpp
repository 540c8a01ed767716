#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/review.hpp"
#include "rforge/review_server.hpp"
#include "rforge/rubric.hpp"

using namespace rforge;
using fixtures::error_of;

namespace {

ReviewStore::Clock fixed_clock() {
  return [] { return std::string("2024-05-01T00:00:00Z"); };
}

JudgeVerdict verdict_for(const Sample& s, const std::string& predicted) {
  JudgeVerdict v;
  v.sample_id = s.id;
  v.original_label = label_text(s.label);
  for (const char* judge : {"j1", "j2", "j3"}) v.predictions.push_back({judge, predicted, predicted});
  v.resolved = predicted;
  v.resolution_kind = ResolutionKind::kMajority;
  v.disposition = Disposition::kReviewQueue;
  return v;
}

std::vector<ReviewTask> label_tasks(std::size_t n) {
  const auto spec = fixtures::paraphrase_spec();
  std::vector<ReviewTask> out;
  for (const auto& s : fixtures::samples_of("paraphrase_zh", n, 3)) {
    const auto other = label_text(s.label) == "匹配" ? "不匹配" : "匹配";
    out.push_back(make_label_task(s, spec, verdict_for(s, other)));
  }
  return out;
}

json quality_scores(int value) {
  json scores = json::object();
  for (auto key : per_sample_dimension_keys()) scores[std::string(key)] = value;
  return {{"scores", scores}};
}

}  // namespace

TEST_SUITE("review") {
  TEST_CASE("task builders and validation") {
    const auto spec = fixtures::paraphrase_spec();
    const auto s = fixtures::samples_of("paraphrase_zh", 1, 4)[0];
    const auto label = make_label_task(s, spec, verdict_for(s, "不匹配"));
    CHECK(label.payload["original_label"] == label_text(s.label));
    CHECK(label.payload["judge_prediction"] == "不匹配");
    CHECK_NOTHROW(validate_task(label));

    const auto quality = make_quality_task(s, spec, "推理。", "gpt");
    CHECK(quality.payload["rubric"]["dimensions"].size() == 5);
    for (const auto& dim : quality.payload["rubric"]["dimensions"]) {
      CHECK(dim["anchors_en"].size() == 5);
      CHECK(dim["anchors_zh"].size() == 5);
      CHECK(dim["anchors_zh"].contains("5"));
    }
    CHECK(quality.public_json().dump().find("\"gpt\"") == std::string::npos);

    ReviewTask empty;
    empty.id = "x";
    CHECK(error_of([&] { validate_task(empty); }) == ErrorCode::kMalformedTask);
    auto no_id = label;
    no_id.id.clear();
    CHECK(error_of([&] { validate_task(no_id); }) == ErrorCode::kMalformedTask);
    CHECK(error_of([] { parse_review_kind("scoring"); }) == ErrorCode::kMalformedTask);
  }

  TEST_CASE("pairwise payloads never name the models") {
    const auto spec = fixtures::sentiment_spec();
    std::set<std::string> lefts;
    for (const auto& s : fixtures::samples_of("sentiment_en", 40, 5)) {
      const auto t = make_pairwise_task(s, spec, "A says so.", "model-alpha", "B says so.",
                                        "model-beta", 9);
      const auto shown = t.public_json().dump();
      CHECK(shown.find("model-alpha") == std::string::npos);
      CHECK(shown.find("model-beta") == std::string::npos);
      CHECK_FALSE(t.payload.contains("model_a"));
      lefts.insert(t.payload["left"].get<std::string>());
      CHECK(t.hidden.dump().find("model-alpha") != std::string::npos);
      const auto again = make_pairwise_task(s, spec, "A says so.", "model-alpha", "B says so.",
                                            "model-beta", 9);
      CHECK(again.payload == t.payload);
    }
    CHECK(lefts.size() == 2);

    auto leaky = make_pairwise_task(fixtures::samples_of("sentiment_en", 1, 5)[0], spec, "a", "m1",
                                    "b", "m2", 1);
    leaky.payload["model"] = "m1";
    CHECK(error_of([&] { validate_task(leaky); }) == ErrorCode::kMalformedTask);
  }

  TEST_CASE("enqueue is idempotent by id") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
    const auto tasks = label_tasks(5);
    const auto first = store.enqueue(tasks);
    CHECK(first.accepted == 5);
    CHECK(first.duplicates == 0);
    const auto second = store.enqueue(tasks);
    CHECK(second.accepted == 0);
    CHECK(second.duplicates == 5);
    CHECK(store.size() == 5);

    std::vector<ReviewTask> mixed{tasks[0], ReviewTask{}};
    CHECK(error_of([&] { store.enqueue(mixed); }) == ErrorCode::kMalformedTask);
    CHECK(store.size() == 5);
  }

  TEST_CASE("verdict submission rules") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
    const auto tasks = label_tasks(3);
    store.enqueue(tasks);
    const auto& id = tasks[0].id;
    const auto done = store.submit_verdict(id, {{"verdict", "wrong"}, {"corrected_label", "不匹配"}},
                                           "ann1");
    CHECK(done.status == TaskStatus::kDone);
    REQUIRE(done.verdicts.size() == 1);
    CHECK(done.verdicts[0].annotator == "ann1");
    CHECK(done.verdicts[0].timestamp == "2024-05-01T00:00:00Z");
    CHECK(error_of([&] { store.submit_verdict(id, {{"verdict", "correct"}}, "ann2"); }) ==
          ErrorCode::kTaskClosed);
    CHECK(error_of([&] { store.submit_verdict("nope", {{"verdict", "correct"}}, "a"); }) ==
          ErrorCode::kTaskNotFound);
    CHECK(error_of([&] { store.submit_verdict(tasks[1].id, {{"verdict", "wrong"}}, "a"); }) ==
          ErrorCode::kKindMismatch);
    CHECK(error_of([&] { store.submit_verdict(tasks[1].id, {{"preference", "win"}}, "a"); }) ==
          ErrorCode::kKindMismatch);
    CHECK(store.list(std::nullopt, TaskStatus::kOpen).size() == 2);
    CHECK(store.list(ReviewKind::kLabelAccuracy).size() == 3);
  }

  TEST_CASE("verdict shapes per kind") {
    const auto spec = fixtures::sentiment_spec();
    const auto s = fixtures::samples_of("sentiment_en", 1, 6)[0];
    const auto quality = make_quality_task(s, spec, "Because.", "m");
    CHECK_NOTHROW(validate_verdict(quality, quality_scores(5)));
    CHECK(error_of([&] { validate_verdict(quality, quality_scores(6)); }) ==
          ErrorCode::kKindMismatch);
    CHECK(error_of([&] { validate_verdict(quality, quality_scores(0)); }) ==
          ErrorCode::kKindMismatch);
    auto partial = quality_scores(3);
    partial["scores"].erase(partial["scores"].begin());
    CHECK(error_of([&] { validate_verdict(quality, partial); }) == ErrorCode::kKindMismatch);

    const auto pair = make_pairwise_task(s, spec, "a", "m1", "b", "m2", 1);
    for (const char* p : {"win", "tie", "lose"}) {
      CHECK_NOTHROW(validate_verdict(pair, {{"preference", p}}));
    }
    CHECK(error_of([&] { validate_verdict(pair, {{"preference", "draw"}}); }) ==
          ErrorCode::kKindMismatch);

    RationaleRecord r;
    r.sample_id = s.id;
    r.text = "It supports the given label.";
    const auto rewrite = make_rewrite_task(s, spec, r);
    CHECK_NOTHROW(validate_verdict(rewrite, {{"text", "Better."}}));
    CHECK(error_of([&] { validate_verdict(rewrite, {{"text", ""}}); }) ==
          ErrorCode::kKindMismatch);
  }

  TEST_CASE("double annotation closes after two distinct annotators") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 2, fixed_clock());
    const auto spec = fixtures::sentiment_spec();
    const auto s = fixtures::samples_of("sentiment_en", 1, 7)[0];
    const std::vector<ReviewTask> tasks{make_quality_task(s, spec, "Because.", "m")};
    store.enqueue(tasks);
    CHECK(store.submit_verdict(tasks[0].id, quality_scores(4), "a").status == TaskStatus::kOpen);
    CHECK(error_of([&] { store.submit_verdict(tasks[0].id, quality_scores(4), "a"); }) ==
          ErrorCode::kTaskClosed);
    CHECK(store.submit_verdict(tasks[0].id, quality_scores(2), "b").status == TaskStatus::kDone);
  }

  TEST_CASE("journal replay restores state") {
    fixtures::TempDir dir;
    const auto tasks = label_tasks(4);
    {
      ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
      store.enqueue(tasks);
      store.submit_verdict(tasks[1].id, {{"verdict", "ambiguous"}}, "ann");
    }
    ReviewStore reopened(dir / "journal.jsonl", 1, fixed_clock());
    CHECK(reopened.size() == 4);
    CHECK(reopened.get(tasks[1].id)->status == TaskStatus::kDone);
    CHECK(reopened.get(tasks[0].id)->status == TaskStatus::kOpen);
    CHECK(error_of([&] { reopened.submit_verdict(tasks[1].id, {{"verdict", "correct"}}, "x"); }) ==
          ErrorCode::kTaskClosed);
    const auto ids = [](const std::vector<ReviewTask>& ts) {
      std::vector<std::string> out;
      for (const auto& t : ts) out.push_back(t.id);
      return out;
    };
    CHECK(ids(reopened.list(std::nullopt, std::nullopt)) == ids(tasks));
  }

  TEST_CASE("exports round trip into the judge module and are deterministic") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
    const auto empty = store.export_verdicts(dir / "empty");
    CHECK(empty.counts.at("review_outcomes.jsonl") == 0);
    CHECK(std::filesystem::exists(dir / "empty/export_manifest.json"));

    const auto tasks = label_tasks(3);
    store.enqueue(tasks);
    store.submit_verdict(tasks[0].id, {{"verdict", "wrong"}, {"corrected_label", "不匹配"}}, "ann");
    store.export_verdicts(dir / "a");
    store.export_verdicts(dir / "b");
    const auto outcomes = read_review_outcomes(dir / "a/review_outcomes.jsonl");
    REQUIRE(outcomes.size() == 1);
    CHECK(outcomes[0].sample_id == tasks[0].payload["sample_id"]);
    CHECK(outcomes[0].verdict == ReviewVerdict::kWrong);
    CHECK(outcomes[0].corrected_label == "不匹配");
    CHECK(outcomes[0].annotator == "ann");
    for (const char* f : {"review_outcomes.jsonl", "export_manifest.json", "quality_scores.jsonl"}) {
      CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
    }

    const auto spec = fixtures::sentiment_spec();
    const auto s = fixtures::samples_of("sentiment_en", 1, 8)[0];
    RationaleRecord r;
    r.sample_id = s.id;
    r.text = "old";
    const std::vector<ReviewTask> rw{make_rewrite_task(s, spec, r)};
    store.enqueue(rw);
    store.submit_verdict(rw[0].id, {{"text", "new text"}}, "ann");
    store.export_verdicts(dir / "c", ReviewKind::kRationaleRewrite);
    const auto rewrites = read_rewrites(dir / "c/rationale_rewrites.jsonl");
    CHECK(rewrites.at(s.id) == "new text");
  }

  TEST_CASE("http status mapping") {
    CHECK(http_status_for(ErrorCode::kTaskNotFound) == 404);
    CHECK(http_status_for(ErrorCode::kTaskClosed) == 409);
    CHECK(http_status_for(ErrorCode::kKindMismatch) == 422);
    CHECK(http_status_for(ErrorCode::kMalformedTask) == 400);
  }

  TEST_CASE("http contract") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
    ReviewServerOptions opts;
    opts.port = 0;
    opts.token = "secret";
    opts.export_dir = dir / "export";
    ReviewServer server(store, opts);
    const int port = server.start();
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);
    const httplib::Headers auth{{"X-Review-Token", "secret"}};

    CHECK(cli.Get("/tasks")->status == 401);
    CHECK(cli.Get("/tasks", {{"X-Review-Token", "wrong"}})->status == 401);
    CHECK(cli.Get("/tasks", {{"Authorization", "Bearer secret"}})->status == 200);

    const auto tasks = label_tasks(3);
    json body = {{"tasks", json::array()}};
    for (const auto& t : tasks) body["tasks"].push_back(t.public_json());
    auto res = cli.Post("/tasks", auth, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["accepted"] == 3);
    res = cli.Post("/tasks", auth, body.dump(), "application/json");
    CHECK(json::parse(res->body)["duplicates"] == 3);

    res = cli.Get("/tasks?kind=label_accuracy", auth);
    REQUIRE(res->status == 200);
    const auto listed = json::parse(res->body)["tasks"];
    REQUIRE(listed.size() == 3);
    CHECK(listed[0]["id"] == tasks[0].id);
    CHECK(listed[0]["kind"] == "label_accuracy");

    CHECK(cli.Get("/tasks/" + tasks[1].id, auth)->status == 200);
    res = cli.Get("/tasks/missing", auth);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["error"] == "TaskNotFound");

    const auto verdict_path = "/tasks/" + tasks[0].id + "/verdict";
    res = cli.Post(verdict_path, auth, json{{"preference", "win"}}.dump(), "application/json");
    CHECK(res->status == 422);
    res = cli.Post(verdict_path, auth,
                   json{{"verdict", "wrong"}, {"corrected_label", "不匹配"}, {"annotator", "ann"}}
                       .dump(),
                   "application/json");
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["status"] == "done");
    res = cli.Post(verdict_path, auth, json{{"verdict", "correct"}}.dump(), "application/json");
    CHECK(res->status == 409);
    res = cli.Post("/tasks/missing/verdict", auth, json{{"verdict", "correct"}}.dump(),
                   "application/json");
    CHECK(res->status == 404);
    res = cli.Post("/tasks", auth, "{not json", "application/json");
    CHECK(res->status == 400);
    res = cli.Post("/tasks", auth, json{{"tasks", {{{"id", "x"}, {"kind", "bogus"}}}}}.dump(),
                   "application/json");
    CHECK(res->status == 400);

    CHECK(json::parse(cli.Get("/tasks", auth)->body)["tasks"].size() == 2);
    CHECK(json::parse(cli.Get("/tasks?status=all", auth)->body)["tasks"].size() == 3);

    res = cli.Get("/export?kind=label_accuracy", auth);
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body)["counts"]["review_outcomes.jsonl"] == 1);
    CHECK(read_review_outcomes(dir / "export/review_outcomes.jsonl").size() == 1);

    res = cli.Get("/rubric", auth);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["dimensions"].size() == 5);
    server.stop();
  }

  TEST_CASE("concurrent submissions close a task exactly once") {
    fixtures::TempDir dir;
    ReviewStore store(dir / "journal.jsonl", 1, fixed_clock());
    const auto tasks = label_tasks(1);
    store.enqueue(tasks);
    std::atomic<int> ok{0};
    std::atomic<int> closed{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] {
        try {
          store.submit_verdict(tasks[0].id, {{"verdict", "correct"}}, "a" + std::to_string(i));
          ++ok;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kTaskClosed) ++closed;
        }
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 1);
    CHECK(closed == 7);
    CHECK(read_jsonl(dir / "journal.jsonl").size() == 2);
  }
}
