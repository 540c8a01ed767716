#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "rforge/answer.hpp"
#include "rforge/emit.hpp"

using namespace rforge;
using fixtures::error_of;

namespace {

DatasetSpec paraphrase_en() {
  DatasetSpec spec;
  spec.name = "paraphrase_en";
  spec.task = TaskKind::make(TaskFamily::kParaphrase);
  spec.language = Language::kEn;
  spec.label_space = {"Matched", "Unmatched"};
  spec.input_schema = {"question1", "question2"};
  spec.field_display = {{"question1", "Question 1"}, {"question2", "Question 2"}};
  spec.instruction = "Determine whether the two questions ask the same thing";
  spec.label_name = "Relationship";
  return spec;
}

std::map<std::string, RationaleRecord> accepted_for(const std::vector<Sample>& samples,
                                                    Language lang) {
  std::map<std::string, RationaleRecord> out;
  for (const auto& s : samples) {
    RationaleRecord r;
    r.sample_id = s.id;
    r.text = "Because of " + s.id + ".\n" + answer_sentence(lang, label_text(s.label));
    r.status = RationaleStatus::kAccepted;
    out[s.id] = r;
  }
  return out;
}

std::string stream_key(const TrainingExample& e) {
  return e.sample_id + "/" + std::string(to_string(e.stream));
}

}  // namespace

TEST_SUITE("emit") {
  TEST_CASE("instruction templates") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = paraphrase_en();
    const auto label_only = render_instruction(spec, Method::kLabelOnly, registry);
    CHECK(label_only ==
          "Determine whether the two questions ask the same thing. Directly output Matched or "
          "Unmatched as the answer.");
    const auto reason = render_instruction(spec, Method::kReason, registry);
    CHECK(reason.find("Give the reasoning process first") != std::string::npos);
    CHECK(reason.find("\xE2\x80\x9CTherefore, the answer is:\xE2\x80\x9D") != std::string::npos);
    const auto explain = render_instruction(spec, Method::kExplain, registry);
    CHECK(explain.find("and then give the reasoning process.") != std::string::npos);

    const auto zh = render_instruction(fixtures::paraphrase_spec(), Method::kReason, registry);
    CHECK(zh.find("“因此得出，答案：”") != std::string::npos);

    TemplateRegistry empty;
    CHECK(error_of([&] { render_instruction(spec, Method::kLabelOnly, empty); }) ==
          ErrorCode::kMissingTemplate);
    TemplateRegistry custom;
    custom.add(spec.name, Language::kEn, TemplateKind::kLabelOnly, "Answer {choices}.");
    CHECK(render_instruction(spec, TemplateKind::kLabelOnly, custom) ==
          "Answer Matched or Unmatched.");
    CHECK(registry.checksums().size() == 6);
  }

  TEST_CASE("example counts per method") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::sentiment_spec();
    for (std::size_t n : {1u, 10u, 57u}) {
      const auto samples = fixtures::samples_of("sentiment_en", n, 3);
      const auto rationales = accepted_for(samples, spec.language);
      CHECK(emit_examples(samples, rationales, spec, Method::kLabelOnly, registry).size() == n);
      CHECK(emit_examples(samples, rationales, spec, Method::kReason, registry).size() == n);
      CHECK(emit_examples(samples, rationales, spec, Method::kExplain, registry).size() == n);
      CHECK(emit_examples(samples, rationales, spec, Method::kMix, registry).size() == 2 * n);
      const auto align = emit_examples(samples, rationales, spec, Method::kAlign, registry);
      CHECK(align.size() == 2 * n);
      std::set<std::string> ids;
      for (const auto& e : align) {
        REQUIRE(e.batch_id.has_value());
        CHECK(*e.batch_id == "align-" + e.sample_id);
        ids.insert(*e.batch_id);
      }
      CHECK(ids.size() == n);
    }
  }

  TEST_CASE("concatenation order") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::sentiment_spec();
    const auto samples = fixtures::samples_of("sentiment_en", 10, 4);
    const auto rationales = accepted_for(samples, spec.language);
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;

    for (const auto& e : emit_examples(samples, rationales, spec, Method::kReason, registry)) {
      const auto label = label_text(by_id.at(e.sample_id)->label);
      const auto body = "Because of " + e.sample_id + ".";
      CHECK(e.stream == Stream::kReasonConcat);
      CHECK(e.target.rfind(body, 0) == 0);
      CHECK(e.target.ends_with(answer_sentence(Language::kEn, label)));
      CHECK(e.input.ends_with("Let's think step by step."));
    }
    for (const auto& e : emit_examples(samples, rationales, spec, Method::kExplain, registry)) {
      const auto label = label_text(by_id.at(e.sample_id)->label);
      CHECK(e.stream == Stream::kExplainConcat);
      CHECK(e.target.rfind(label + "\n", 0) == 0);
      CHECK(e.target.ends_with("Because of " + e.sample_id + "."));
    }
    for (const auto& e : emit_examples(samples, rationales, spec, Method::kMix, registry)) {
      const auto label = label_text(by_id.at(e.sample_id)->label);
      if (e.stream == Stream::kLabel) {
        CHECK(e.target == label);
      } else {
        CHECK(e.stream == Stream::kRationale);
        CHECK(e.target.ends_with(answer_sentence(Language::kEn, label)));
      }
    }
  }

  TEST_CASE("missing or rejected rationales") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::sentiment_spec();
    const auto samples = fixtures::samples_of("sentiment_en", 4, 5);
    auto rationales = accepted_for(samples, spec.language);
    rationales.erase(samples[2].id);
    CHECK(error_of([&] { emit_examples(samples, rationales, spec, Method::kMix, registry); }) ==
          ErrorCode::kMissingRationale);
    CHECK(emit_examples(samples, rationales, spec, Method::kLabelOnly, registry).size() == 4);
    auto rejected = accepted_for(samples, spec.language);
    rejected[samples[0].id].status = RationaleStatus::kRewriteQueue;
    CHECK(error_of([&] { emit_examples(samples, rejected, spec, Method::kReason, registry); }) ==
          ErrorCode::kMissingRationale);
  }

  TEST_CASE("mix batches partition the pool") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::sentiment_spec();
    fixtures::Gen g(12);
    for (int trial = 0; trial < 30; ++trial) {
      const auto samples = fixtures::samples_of("sentiment_en", g.size(1, 60), g.rng().next());
      const auto ex = emit_examples(samples, accepted_for(samples, spec.language), spec,
                                    Method::kMix, registry);
      const auto n = g.size(1, 16);
      const auto seed = g.rng().next();
      const auto batches = assemble_mix_batches(ex, n, seed);
      CHECK(batches.size() == (ex.size() + n - 1) / n);
      std::multiset<std::string> seen;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        if (b + 1 < batches.size()) CHECK(batches[b].examples.size() == n);
        for (const auto& e : batches[b].examples) seen.insert(stream_key(e));
      }
      std::multiset<std::string> pool;
      for (const auto& e : ex) pool.insert(stream_key(e));
      CHECK(seen == pool);
      const auto again = assemble_mix_batches(ex, n, seed);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        CHECK(again[b].examples == batches[b].examples);
      }
    }
  }

  TEST_CASE("mix batch sizes") {
    std::vector<TrainingExample> ex(9);
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i].sample_id = "s" + std::to_string(i);
    auto sizes = [](const std::vector<Batch>& bs) {
      std::vector<std::size_t> out;
      for (const auto& b : bs) out.push_back(b.examples.size());
      return out;
    };
    CHECK(sizes(assemble_mix_batches(std::span(ex).first(8), 4, 1)) ==
          std::vector<std::size_t>{4, 4});
    CHECK(sizes(assemble_mix_batches(ex, 4, 1)) == std::vector<std::size_t>{4, 4, 1});
    CHECK(error_of([&] { assemble_mix_batches(ex, 0, 1); }) == ErrorCode::kInvalidBatch);

    auto pooled = ex;
    const auto batches = assemble_mix_batches(pooled, 4, 1);
    assign_mix_batch_ids(pooled, batches);
    for (const auto& e : pooled) CHECK(e.batch_id.has_value());
  }

  TEST_CASE("align batches bind both streams of one sample") {
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::sentiment_spec();
    const auto samples = fixtures::samples_of("sentiment_en", 10, 6);
    const auto ex = emit_examples(samples, accepted_for(samples, spec.language), spec,
                                  Method::kAlign, registry);
    const auto batches = assemble_align_batches(ex);
    REQUIRE(batches.size() == 10);
    for (const auto& b : batches) {
      REQUIRE(b.examples.size() == 2);
      CHECK(b.examples[0].sample_id == b.examples[1].sample_id);
      std::set<Stream> streams{b.examples[0].stream, b.examples[1].stream};
      CHECK(streams == std::set<Stream>{Stream::kLabel, Stream::kRationale});
    }
    const auto grouped = assemble_align_batches(ex, 4);
    CHECK(grouped.size() == 3);
    CHECK(grouped.back().examples.size() == 4);

    auto unpaired = ex;
    unpaired.erase(std::find_if(unpaired.begin(), unpaired.end(),
                                [](const auto& e) { return e.stream == Stream::kLabel; }));
    CHECK(error_of([&] { assemble_align_batches(unpaired); }) == ErrorCode::kUnpairedStream);
    auto doubled = ex;
    doubled.push_back(ex.front());
    CHECK(error_of([&] { assemble_align_batches(doubled); }) == ErrorCode::kUnpairedStream);
  }

  TEST_CASE("training files round trip") {
    fixtures::TempDir dir;
    const auto registry = TemplateRegistry::with_defaults();
    const auto spec = fixtures::paraphrase_spec();
    const auto samples = fixtures::samples_of("paraphrase_zh", 12, 7);
    for (auto m : all_methods()) {
      const auto ex = emit_examples(samples, accepted_for(samples, spec.language), spec, m,
                                    registry);
      const auto path = training_file(dir.path(), m);
      CHECK(path.filename() == "train_" + std::string(to_string(m)) + ".jsonl");
      write_examples(path, ex);
      CHECK(read_examples(path) == ex);
      for (const auto& e : ex) CHECK(example_from_json(example_to_json(e)) == e);
    }
  }
}
