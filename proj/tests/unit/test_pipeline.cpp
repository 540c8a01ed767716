#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/pipeline.hpp"
#include "rforge/providers.hpp"
#include "rforge/report.hpp"
#include "rforge/synth.hpp"

using namespace rforge;
using fixtures::error_of;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fixtures::TempDir dir;
  PipelineConfig config;

  explicit Workspace(std::size_t samples = 120) {
    const auto ws = write_synthetic_workspace(dir / "data", samples, 5);
    config = load_config(ws.config);
  }

  Pipeline pipeline(const std::string& work = "work", bool force = false) {
    RunOptions o;
    o.workdir = dir / work;
    o.dry_run = true;
    o.force = force;
    return Pipeline(config, o);
  }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("stage names") {
    for (auto s : all_stages()) CHECK(parse_stage(to_string(s)) == s);
    CHECK(error_of([] { parse_stage("train"); }) == ErrorCode::kInvalidConfig);
  }

  TEST_CASE("stages refuse to run before their parents") {
    Workspace ws;
    auto p = ws.pipeline();
    CHECK(error_of([&] { p.run(Stage::kJudge); }) == ErrorCode::kStageDependencyMissing);
    CHECK(error_of([&] { p.run(Stage::kReport); }) == ErrorCode::kNoEvalOutputs);
    p.run(Stage::kIngest);
    CHECK(error_of([&] { p.run(Stage::kJudge); }) == ErrorCode::kStageDependencyMissing);
  }

  TEST_CASE("full dry run, cache hits and verification") {
    Workspace ws;
    const auto before = http_request_count();
    {
      auto p = ws.pipeline();
      const auto results = p.run_all();
      CHECK(results.size() == 9);
      for (const auto& r : results) CHECK_FALSE(r.cached);
      CHECK(p.provider_calls() > 0);
    }
    CHECK(http_request_count() == before);

    const auto work = ws.dir / "work";
    for (const auto& name : {"paraphrase_zh", "sentiment_en", "topic_zh", "ner_zh"}) {
      for (auto m : all_methods()) {
        CHECK(fs::exists(training_file(work / "emit" / (std::string("synth_") + name), m)));
      }
    }
    CHECK(fs::exists(work / "report/report.json"));
    CHECK(fs::exists(work / "report/report.md"));
    CHECK(verify_workdir(work).ok);

    {
      auto again = ws.pipeline();
      for (const auto& r : again.run_all()) CHECK(r.cached);
      CHECK(again.provider_calls() == 0);
    }

    // Report: inapplicable cells are omitted, and the funnel is conserved.
    const auto report = read_json_file(work / "report/report.json");
    for (const auto& block : report["blocks"]) {
      const auto mode = parse_inference_mode(block["mode"].get<std::string>());
      for (const auto& row : block["rows"]) {
        const auto method = parse_method(row["method"].get<std::string>());
        for (const auto& [task, cell] : row["cells"].items()) {
          CHECK(cell.is_null() == !mode_applies(method, mode));
        }
      }
    }
    const auto total = report["funnel"]["total"];
    CHECK(total["generated"].get<std::size_t>() ==
          total["accepted"].get<std::size_t>() + total["rejected_safety"].get<std::size_t>() +
              total["rejected_length"].get<std::size_t>() +
              total["rejected_inconsistent"].get<std::size_t>() +
              total["rewrite_queue"].get<std::size_t>());

    // Tampering with an output is detected.
    const auto target = training_file(work / "emit/synth_sentiment_en", Method::kMix);
    write_text_file(target, read_text_file(target) + "\n");
    const auto v = verify_workdir(work);
    CHECK_FALSE(v.ok);
    CHECK_FALSE(v.problems.empty());
    // A tampered stage reruns even without --force.
    auto rerun = ws.pipeline();
    CHECK_FALSE(rerun.run(Stage::kEmit).cached);
    CHECK(verify_workdir(work).ok);
  }

  TEST_CASE("two workdirs produce identical outputs") {
    Workspace ws(80);
    ws.pipeline("a").run_all();
    ws.pipeline("b").run_all();
    std::set<std::string> a_files;
    for (const auto& e : fs::recursive_directory_iterator(ws.dir / "a")) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), ws.dir / "a").string();
      const auto top = rel.substr(0, rel.find('/'));
      if (top == "manifests" || top == "cache" || top == "review") continue;
      a_files.insert(rel);
      CHECK_MESSAGE(read_text_file(e.path()) == read_text_file(ws.dir / "b" / rel), rel);
    }
    CHECK(a_files.size() > 20);
  }

  TEST_CASE("emit one method and forced reruns") {
    Workspace ws(80);
    auto p = ws.pipeline();
    for (auto s : {Stage::kIngest, Stage::kCurate, Stage::kJudge, Stage::kRationaleGen,
                   Stage::kRationaleFilter}) {
      p.run(s);
    }
    RunOptions o;
    o.workdir = ws.dir / "work";
    o.dry_run = true;
    o.method = Method::kAlign;
    Pipeline only_align(ws.config, o);
    only_align.run(Stage::kEmit);
    const auto dir = ws.dir / "work/emit/synth_sentiment_en";
    CHECK(fs::exists(training_file(dir, Method::kAlign)));
    CHECK_FALSE(fs::exists(training_file(dir, Method::kMix)));

    auto forced = ws.pipeline("work", true);
    CHECK_FALSE(forced.run(Stage::kIngest).cached);
  }

  TEST_CASE("seed override changes the input hash") {
    Workspace ws(60);
    auto p = ws.pipeline();
    const auto first = p.run(Stage::kIngest).manifest["input_hash"];
    RunOptions o;
    o.workdir = ws.dir / "work";
    o.dry_run = true;
    o.seed_override = 99;
    Pipeline other(ws.config, o);
    const auto r = other.run(Stage::kIngest);
    CHECK_FALSE(r.cached);
    CHECK(r.manifest["input_hash"] != first);
  }
}
