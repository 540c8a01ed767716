#include <doctest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "rforge/config.hpp"
#include "rforge/synth.hpp"

using namespace rforge;
using fixtures::error_of;

namespace {

json base_document() {
  return {
      {"datasets", {{{"spec", "specs/a.json"}, {"records", "raw/a.jsonl"}}}},
      {"providers",
       {{"embedding", {{"kind", "hashing"}, {"dim", 16}}},
        {"judges",
         {{{"name", "j1"}, {"kind", "mock"}},
          {{"name", "j2"}, {"kind", "mock"}},
          {{"name", "j3"}, {"kind", "mock"}}}},
        {"primary_judge", "j1"},
        {"generator", {{"name", "gen"}, {"kind", "mock"}}}}},
  };
}

// The message of the kInvalidConfig error `doc` raises, or "" if it parses.
std::string config_error(const json& doc) {
  try {
    validate_config(parse_config(doc, "/base"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
    return e.what();
  }
  return "";
}

bool mentions(const std::string& message, const std::string& field) {
  return message.find(field) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal document parses with defaults") {
    const auto c = parse_config(base_document(), "/base");
    CHECK_NOTHROW(validate_config(c));
    CHECK(c.train_cap == 25000);
    CHECK(c.eval_divisor == 8);
    CHECK(c.criteria_fraction == 0.2);
    CHECK(c.filter.max_tokens == 1024);
    CHECK(c.methods.size() == 5);
    CHECK(c.cleaning_order == CleaningOrder::kClusterFirst);
    CHECK(c.embedding.kind == "hashing");
    CHECK(c.resolve("specs/a.json") == std::filesystem::path("/base/specs/a.json"));
    CHECK(c.resolve("/abs/x") == std::filesystem::path("/abs/x"));
  }

  TEST_CASE("errors name the offending field") {
    auto doc = base_document();
    doc["providers"]["judges"].erase(2);
    CHECK(mentions(config_error(doc), "providers.judges"));

    doc = base_document();
    doc["providers"]["judges"][1]["name"] = "j1";
    CHECK(mentions(config_error(doc), "providers.judges[1].name"));

    doc = base_document();
    doc["providers"]["primary_judge"] = "j9";
    CHECK(mentions(config_error(doc), "providers.primary_judge"));

    doc = base_document();
    doc["rationale"] = {{"criteria_fraction", 1.5}};
    CHECK(mentions(config_error(doc), "rationale.criteria_fraction"));

    doc = base_document();
    doc["loss"] = {{"lambda_grid", {0.0, 2.0}}};
    CHECK(mentions(config_error(doc), "loss.lambda_grid[1]"));

    doc = base_document();
    doc["caps"] = {{"train", -3}};
    CHECK(mentions(config_error(doc), "caps.train"));

    doc = base_document();
    doc["caps"] = {{"train", 0}};
    CHECK(mentions(config_error(doc), "caps.train"));

    doc = base_document();
    doc["datasets"][0].erase("records");
    CHECK(mentions(config_error(doc), "records"));

    doc = base_document();
    doc["datasets"] = json::array();
    CHECK(mentions(config_error(doc), "datasets"));

    doc = base_document();
    doc["providers"]["generator"] = {{"name", "gen"}, {"kind", "http"}};
    CHECK(mentions(config_error(doc), "providers.generator"));

    doc = base_document();
    doc["emit"] = {{"methods", {"label_only", "distill"}}};
    CHECK(mentions(config_error(doc), "emit.methods"));

    doc = base_document();
    doc["cleaning_order"] = "random";
    CHECK(mentions(config_error(doc), "cleaning_order"));

    doc = base_document();
    doc["review"] = {{"recollection_base", "all"}};
    CHECK(mentions(config_error(doc), "review.recollection_base"));
  }

  TEST_CASE("environment interpolation") {
    ::setenv("RFORGE_TEST_HOST", "judge.example", 1);
    ::unsetenv("RFORGE_TEST_UNSET");
    const json doc = {{"a", {{"url", "https://${RFORGE_TEST_HOST}/v1"}}},
                      {"list", {"x", "${RFORGE_TEST_HOST}"}},
                      {"n", 3}};
    const auto out = interpolate_env(doc);
    CHECK(out["a"]["url"] == "https://judge.example/v1");
    CHECK(out["list"][1] == "judge.example");
    CHECK(out["n"] == 3);
    const json bad = {{"providers", {{"token", "${RFORGE_TEST_UNSET}"}}}};
    try {
      interpolate_env(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidConfig);
      CHECK(mentions(e.what(), "providers.token"));
      CHECK(mentions(e.what(), "RFORGE_TEST_UNSET"));
    }
  }

  TEST_CASE("seed override derives every seed") {
    SeedConfig a;
    SeedConfig b;
    a.override_with(11);
    b.override_with(11);
    CHECK(a.to_json() == b.to_json());
    b.override_with(12);
    CHECK(a.to_json() != b.to_json());
    CHECK(a.split != a.cluster);
  }

  TEST_CASE("synthetic workspace config loads") {
    fixtures::TempDir dir;
    const auto ws = write_synthetic_workspace(dir.path(), 40, 3, 500);
    const auto c = load_config(ws.config);
    CHECK(c.datasets.size() == synthetic_kinds().size());
    CHECK(c.train_cap == 500);
    for (const auto& d : c.datasets) CHECK(std::filesystem::exists(c.resolve(d.spec)));
    CHECK(error_of([&] { load_config(dir / "missing.json"); }) != std::nullopt);
  }
}
