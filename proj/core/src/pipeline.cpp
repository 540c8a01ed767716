#include "rforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>

#include "rforge/concurrency.hpp"
#include "rforge/corpus.hpp"
#include "rforge/curate.hpp"
#include "rforge/embedding.hpp"
#include "rforge/error.hpp"
#include "rforge/evalsuite.hpp"
#include "rforge/hash.hpp"
#include "rforge/judge.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/losskernel.hpp"
#include "rforge/mock_providers.hpp"
#include "rforge/rationale.hpp"
#include "rforge/report.hpp"
#include "rforge/review.hpp"
#include "rforge/review_server.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"
#include "rforge/tokenizer.hpp"

namespace rforge {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kLossBatchesPerDataset = 64;
constexpr std::size_t kMaxSyntheticTokens = 128;

struct StageName {
  Stage stage;
  std::string_view name;
};

constexpr StageName kStageNames[] = {
    {Stage::kIngest, "ingest"},
    {Stage::kCurate, "curate"},
    {Stage::kJudge, "judge"},
    {Stage::kRationaleGen, "rationale-gen"},
    {Stage::kRationaleFilter, "rationale-filter"},
    {Stage::kEmit, "emit"},
    {Stage::kLossCheck, "loss-check"},
    {Stage::kEval, "eval"},
    {Stage::kReviewServe, "review-serve"},
    {Stage::kReport, "report"},
};

std::string relpath(const fs::path& p, const fs::path& base) {
  return p.lexically_relative(base).generic_string();
}

// Every regular file under `dir`, hashed, keyed relative to `base`.
json hash_tree(const fs::path& dir, const fs::path& base) {
  json out = json::object();
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[relpath(f, base)] = file_sha256(f);
  return out;
}

std::map<std::string, RationaleRecord> accepted_by_id(std::span<const RationaleRecord> records) {
  std::map<std::string, RationaleRecord> out;
  for (const auto& r : records) {
    if (r.status == RationaleStatus::kAccepted) out.emplace(r.sample_id, r);
  }
  return out;
}

std::vector<RationaleRecord> read_records(const fs::path& path) {
  std::vector<RationaleRecord> out;
  if (!fs::exists(path)) return out;
  for (const auto& row : read_jsonl(path)) out.push_back(record_from_json(row));
  return out;
}

std::vector<Sample> only_split(std::span<const Sample> samples, Split split) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& s : kStageNames) {
    if (s.stage == stage) return s.name;
  }
  return "unknown";
}

Stage parse_stage(std::string_view s) {
  for (const auto& n : kStageNames) {
    if (n.name == s) return n.stage;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> v;
    for (const auto& s : kStageNames) v.push_back(s.stage);
    return v;
  }();
  return stages;
}

std::string manifest_hash(const json& manifest) {
  json copy = manifest;
  copy.erase("duration_ms");
  return sha256_hex(copy.dump());
}

struct Pipeline::Impl {
  const PipelineConfig& config;
  const RunOptions& options;

  std::vector<DatasetSpec> specs;
  std::vector<DatasetSource> sources;

  std::once_flag clients_once;
  std::vector<JudgeClient> judges;
  std::shared_ptr<ChatClient> generator;
  std::shared_ptr<ChatClient> inference;
  std::vector<std::shared_ptr<CountingChatClient>> counters;
  std::shared_ptr<EmbeddingClient> embedder;
  std::atomic<std::size_t> embed_requests{0};

  Impl(const PipelineConfig& c, const RunOptions& o) : config(c), options(o) {
    for (const auto& src : config.datasets) {
      specs.push_back(load_dataset_spec(config.resolve(src.spec)));
      sources.push_back(src);
    }
  }

  // --- layout ---------------------------------------------------------------

  fs::path stage_dir(Stage s) const { return options.workdir / std::string(to_string(s)); }
  fs::path manifest_path(Stage s) const {
    return options.workdir / "manifests" / (std::string(to_string(s)) + ".json");
  }
  fs::path journal_path() const { return options.workdir / "review" / "journal.jsonl"; }

  bool cluster_first() const { return config.cleaning_order == CleaningOrder::kClusterFirst; }
  Stage cleaned() const { return cluster_first() ? Stage::kJudge : Stage::kCurate; }

  std::vector<Stage> parents(Stage s) const {
    switch (s) {
      case Stage::kIngest: return {};
      case Stage::kCurate: return {cluster_first() ? Stage::kIngest : Stage::kJudge};
      case Stage::kJudge: return {cluster_first() ? Stage::kCurate : Stage::kIngest};
      case Stage::kRationaleGen: return {cleaned()};
      case Stage::kRationaleFilter: return {Stage::kRationaleGen, cleaned()};
      case Stage::kEmit: return {Stage::kRationaleFilter, cleaned()};
      case Stage::kLossCheck:
        if (!config.loss_input.empty()) return {};
        return {Stage::kEmit};
      case Stage::kEval: return {Stage::kEmit, cleaned()};
      case Stage::kReviewServe: return {};
      case Stage::kReport: return {Stage::kEval, Stage::kRationaleFilter};
    }
    return {};
  }

  // External files a stage reads, keyed by a stable label.
  json input_files(Stage s) const {
    json files = json::object();
    auto add = [&](const std::string& key, const fs::path& p) {
      if (!p.empty() && fs::is_regular_file(p)) files[key] = file_sha256(p);
    };
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const auto& name = specs[i].name;
      if (s == Stage::kIngest) {
        add(name + "/spec", config.resolve(sources[i].spec));
        add(name + "/records", config.resolve(sources[i].records));
      }
      if (s == Stage::kRationaleGen && !sources[i].exemplars.empty()) {
        add(name + "/exemplars", config.resolve(sources[i].exemplars));
      }
      if (s == Stage::kEval && !config.predictions_dir.empty()) {
        for (auto m : config.methods) {
          const std::string method(to_string(m));
          add(name + "/predictions/" + method,
              config.resolve(config.predictions_dir) / name / (method + ".jsonl"));
        }
      }
    }
    if (s == Stage::kJudge && !config.review.outcomes.empty()) {
      add("review/outcomes", config.resolve(config.review.outcomes));
    }
    if (s == Stage::kRationaleFilter) {
      if (!config.review.rewrites.empty()) {
        add("review/rewrites", config.resolve(config.review.rewrites));
      }
      if (!config.tokenizer_vocab.empty()) {
        add("tokenizer", config.resolve(config.tokenizer_vocab));
      }
    }
    if (s == Stage::kLossCheck && !config.loss_input.empty()) {
      add("loss_input", config.resolve(config.loss_input));
    }
    return files;
  }

  // --- providers ------------------------------------------------------------

  bool use_mock(const ProviderConfig& p) const { return options.dry_run || p.kind == "mock"; }

  std::shared_ptr<ChatClient> wrap(std::shared_ptr<ChatClient> base, const std::string& role,
                                   std::size_t limit) {
    auto counting = std::make_shared<CountingChatClient>(std::move(base));
    counters.push_back(counting);
    std::shared_ptr<ChatClient> c = counting;
    c = std::make_shared<RetryingChatClient>(c, config.retry);
    c = std::make_shared<ConcurrencyLimitedChatClient>(c, limit);
    return std::make_shared<CachingChatClient>(
        c, options.workdir / "cache" / "chat" / (role + ".jsonl"));
  }

  void make_clients() {
    std::call_once(clients_once, [&] {
      for (std::size_t i = 0; i < config.judges.size(); ++i) {
        const auto& p = config.judges[i];
        std::shared_ptr<ChatClient> base;
        if (use_mock(p)) {
          base = std::make_shared<MockJudgeClient>(p.name, 0.05 * static_cast<double>(i + 1),
                                                   0.01);
        } else {
          base = std::make_shared<HttpChatClient>(p.name, p.endpoint);
        }
        judges.push_back(
            {p.name, p.model, wrap(base, "judge-" + p.name, config.concurrency.judge)});
      }
      const auto& g = config.generator;
      std::shared_ptr<ChatClient> gen;
      if (use_mock(g)) {
        gen = std::make_shared<MockGeneratorClient>(g.name);
      } else {
        gen = std::make_shared<HttpChatClient>(g.name, g.endpoint);
      }
      generator = wrap(gen, "generator", config.concurrency.generator);

      if (config.inference && !use_mock(*config.inference)) {
        inference = wrap(std::make_shared<HttpChatClient>(config.inference->name,
                                                          config.inference->endpoint),
                         "inference", config.concurrency.inference);
      } else if (config.inference || options.dry_run) {
        const auto name = config.inference ? config.inference->name : std::string("student");
        inference = wrap(std::make_shared<MockInferenceClient>(name), "inference",
                         config.concurrency.inference);
      }

      if (options.dry_run || config.embedding.kind == "hashing") {
        embedder = std::make_shared<HashingEmbeddingClient>(config.embedding.dim);
      } else {
        embedder =
            std::make_shared<HttpEmbeddingClient>(config.embedding.model, config.embedding.endpoint);
      }
    });
  }

  std::size_t calls() const {
    std::size_t n = embed_requests.load();
    for (const auto& c : counters) n += c->calls();
    return n;
  }

  // Embeds `samples` through the dataset's vector cache and returns the table.
  VectorTable embed(std::span<const Sample> samples, const DatasetSpec& spec, json& counts) {
    make_clients();
    std::size_t dim = config.embedding.dim;
    VectorCache cache(options.workdir / "cache" / "vectors" / (spec.name + ".bin"),
                      embedder->model(), dim);
    cache.load();
    EmbedOptions opts;
    opts.batch_size = config.embedding.batch_size;
    opts.concurrency = config.concurrency.embedding;
    opts.attempts = config.retry.attempts;
    const auto stats = embed_samples(samples, spec, *embedder, cache, opts);
    cache.save();
    embed_requests += stats.requests;
    counts["embedded"] = counts.value("embedded", std::size_t{0}) + stats.embedded;
    counts["embedding_cache_hits"] =
        counts.value("embedding_cache_hits", std::size_t{0}) + stats.cached;
    return cache.table();
  }

  std::uint64_t seed(std::uint64_t base, const std::string& dataset) const {
    return derive_seed(base, dataset);
  }

  // --- stages ---------------------------------------------------------------

  json run_ingest() {
    json counts = json::object();
    const auto out = stage_dir(Stage::kIngest);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& spec = specs[i];
      const auto records = read_jsonl(config.resolve(sources[i].records));
      auto samples = ingest_dataset(records, spec);
      const auto splits = split_dataset(samples, seed(config.seeds.split, spec.name));
      for (std::size_t k = 0; k < samples.size(); ++k) samples[k].split = splits[k];
      write_collection(out, spec, samples);
      counts[spec.name] = {{"records", records.size()},
                           {"train", only_split(samples, Split::kTrain).size()},
                           {"dev", only_split(samples, Split::kDev).size()},
                           {"test", only_split(samples, Split::kTest).size()}};
    }
    return counts;
  }

  json run_curate() {
    json counts = json::object();
    const auto in = stage_dir(parents(Stage::kCurate).front());
    const auto out = stage_dir(Stage::kCurate);
    for (const auto& spec : specs) {
      json c = json::object();
      const auto collection = read_collection(in, spec.name);
      const auto unique = dedup(collection);
      const auto vectors = embed(unique, spec, c);
      const auto train = only_split(unique, Split::kTrain);
      const auto dev = only_split(unique, Split::kDev);
      const auto test = only_split(unique, Split::kTest);
      const auto cluster_seed = seed(config.seeds.cluster, spec.name);
      auto selected = select_training_subset(train, vectors, config.train_cap, cluster_seed);
      auto capped = apply_eval_caps(selected.size(), dev, test, vectors,
                                    derive_seed(cluster_seed, "eval"), {}, config.eval_divisor);
      std::vector<Sample> combined = std::move(selected);
      const auto n_train = combined.size();
      combined.insert(combined.end(), capped.dev.begin(), capped.dev.end());
      combined.insert(combined.end(), capped.test.begin(), capped.test.end());
      require_valid(validate_collection(combined, spec), spec.name);
      write_collection(out, spec, combined);
      c["input"] = collection.size();
      c["duplicates"] = collection.size() - unique.size();
      c["train"] = n_train;
      c["dev"] = capped.dev.size();
      c["test"] = capped.test.size();
      c["eval_cap"] = capped.cap;
      counts[spec.name] = c;
    }
    return counts;
  }

  json run_judge() {
    make_clients();
    json counts = json::object();
    const auto in = stage_dir(parents(Stage::kJudge).front());
    const auto out = stage_dir(Stage::kJudge);
    ReviewStore store(journal_path(), config.review.annotators_per_task);

    std::vector<ReviewOutcome> all_outcomes;
    const bool have_outcomes =
        !config.review.outcomes.empty() && fs::exists(config.resolve(config.review.outcomes));
    if (have_outcomes) all_outcomes = read_review_outcomes(config.resolve(config.review.outcomes));

    for (const auto& spec : specs) {
      json c = json::object();
      const auto collection = read_collection(in, spec.name);
      const auto pool = only_split(collection, Split::kTrain);
      const auto run = run_judging(collection, pool, spec, judges, config.primary_judge,
                                   seed(config.seeds.judge, spec.name), config.concurrency.judge);
      const auto dir = out / spec.name;
      fs::create_directories(dir);

      std::vector<json> rows;
      std::map<ResolutionKind, std::size_t> kinds;
      std::map<std::string, const JudgeVerdict*> verdict_of;
      for (const auto& v : run.verdicts) {
        rows.push_back(verdict_to_json(v));
        ++kinds[v.resolution_kind];
        verdict_of[v.sample_id] = &v;
      }
      write_jsonl(dir / "judge_verdicts.jsonl", rows);
      rows.clear();
      for (std::size_t k = 0; k < run.deferred.size(); ++k) {
        rows.push_back({{"sample_id", run.deferred[k]}, {"error", run.errors[k]}});
      }
      write_jsonl(dir / "deferred.jsonl", rows);

      const std::set<std::string> deferred(run.deferred.begin(), run.deferred.end());
      std::vector<Sample> judged;
      for (const auto& s : collection) {
        if (!deferred.count(s.id)) judged.push_back(s);
      }
      const auto part = partition(judged, run.verdicts);

      rows.clear();
      for (const auto& s : part.review_queue) rows.push_back(sample_to_json(s));
      write_jsonl(dir / "review_queue.jsonl", rows);

      const auto audit =
          select_audit(part.review_queue, config.review.audit_size,
                       seed(config.seeds.audit, spec.name));
      std::set<std::string> audit_ids;
      std::vector<ReviewTask> tasks;
      rows.clear();
      for (const auto& s : audit) {
        audit_ids.insert(s.id);
        rows.push_back(s.id);
        tasks.push_back(make_label_task(s, spec, *verdict_of.at(s.id)));
      }
      write_jsonl(dir / "audit.jsonl", rows);

      std::set<std::string> queued;
      for (const auto& s : part.review_queue) queued.insert(s.id);
      std::vector<ReviewOutcome> outcomes;
      for (const auto& o : all_outcomes) {
        if (queued.count(o.sample_id)) outcomes.push_back(o);
      }
      const auto applied = apply_review_outcomes(part, outcomes, spec);

      std::size_t recollected = 0;
      if (have_outcomes) {
        std::vector<ReviewOutcome> audited;
        std::set<std::string> reviewed;
        for (const auto& o : outcomes) {
          reviewed.insert(o.sample_id);
          if (audit_ids.count(o.sample_id)) audited.push_back(o);
        }
        const auto summary = summarize_audit(audited);
        c["audit_summary"] = {{"audited", summary.audited},
                              {"correct", summary.correct},
                              {"wrong", summary.wrong},
                              {"ambiguous", summary.ambiguous},
                              {"correct_fraction", summary.correct_fraction},
                              {"high_quality", summary.high_quality}};
        if (summary.high_quality && config.review.recollection_fraction > 0.0) {
          std::vector<Sample> base;
          for (const auto& s : part.review_queue) {
            if (reviewed.count(s.id)) continue;
            if (config.review.recollection_base == "unaudited" && audit_ids.count(s.id)) continue;
            base.push_back(s);
          }
          if (!base.empty()) {
            const auto vectors = embed(base, spec, c);
            const auto picked =
                recollection_candidates(base, vectors, config.review.recollection_fraction,
                                        seed(config.seeds.review, spec.name));
            rows.clear();
            for (const auto& s : picked) {
              rows.push_back(s.id);
              tasks.push_back(make_label_task(s, spec, *verdict_of.at(s.id)));
            }
            write_jsonl(dir / "recollection.jsonl", rows);
            recollected = picked.size();
          }
        }
      }
      const auto enq = store.enqueue(tasks);

      write_collection(out, spec, applied.corpus);
      c["samples"] = collection.size();
      c["retained"] = part.retained.size();
      c["review_queue"] = part.review_queue.size();
      c["deferred"] = run.deferred.size();
      c["audit"] = audit.size();
      c["recollection"] = recollected;
      c["tasks_enqueued"] = enq.accepted;
      c["confirmed"] = applied.confirmed;
      c["relabeled"] = applied.relabeled;
      c["excluded"] = applied.excluded;
      c["pending"] = applied.pending;
      c["corpus"] = applied.corpus.size();
      json res = json::object();
      for (const auto& [k, n] : kinds) res[std::string(to_string(k))] = n;
      c["resolution"] = res;
      counts[spec.name] = c;
    }
    return counts;
  }

  json run_rationale_gen() {
    make_clients();
    json counts = json::object();
    const auto in = stage_dir(cleaned());
    const auto out = stage_dir(Stage::kRationaleGen);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& spec = specs[i];
      const auto train = read_split(in, spec.name, Split::kTrain);
      const auto designs = allocate_designs(train, spec, config.criteria_fraction,
                                            seed(config.seeds.criteria, spec.name),
                                            config.base_design);
      std::vector<Exemplar> bank;
      if (!sources[i].exemplars.empty()) {
        bank = load_exemplar_bank(config.resolve(sources[i].exemplars));
      }
      const auto records = generate_rationales(train, spec, designs, bank, *generator,
                                               config.generator.model,
                                               config.concurrency.generator);
      std::vector<json> rows;
      json by_design = json::object();
      for (const auto& r : records) rows.push_back(record_to_json(r));
      for (const auto& [id, d] : designs) {
        const std::string key(to_string(d.kind));
        by_design[key] = by_design.value(key, std::size_t{0}) + 1;
      }
      write_jsonl(out / spec.name / "rationales.jsonl", rows);
      counts[spec.name] = {{"samples", train.size()},
                           {"generated", records.size()},
                           {"designs", by_design}};
    }
    return counts;
  }

  json run_rationale_filter() {
    json counts = json::object();
    const auto out = stage_dir(Stage::kRationaleFilter);
    const auto tokenizer = make_tokenizer(
        config.tokenizer_vocab.empty() ? "" : config.resolve(config.tokenizer_vocab).string());
    std::map<std::string, std::string> rewrites;
    if (!config.review.rewrites.empty() && fs::exists(config.resolve(config.review.rewrites))) {
      rewrites = read_rewrites(config.resolve(config.review.rewrites));
    }
    ReviewStore store(journal_path(), config.review.annotators_per_task);
    for (const auto& spec : specs) {
      const auto records =
          read_records(stage_dir(Stage::kRationaleGen) / spec.name / "rationales.jsonl");
      const auto train = read_split(stage_dir(cleaned()), spec.name, Split::kTrain);
      auto filtered = filter_all(records, train, spec, *tokenizer, config.filter,
                                 config.concurrency.generator);
      if (!rewrites.empty()) {
        filtered = apply_rewrites(filtered, rewrites, train, spec, *tokenizer, config.filter);
      }
      std::map<std::string, const Sample*> sample_of;
      for (const auto& s : train) sample_of[s.id] = &s;
      std::vector<json> rows;
      std::vector<json> queue;
      std::vector<ReviewTask> tasks;
      for (const auto& r : filtered) {
        rows.push_back(record_to_json(r));
        if (r.status == RationaleStatus::kRewriteQueue) {
          queue.push_back(record_to_json(r));
          tasks.push_back(make_rewrite_task(*sample_of.at(r.sample_id), spec, r));
        }
      }
      store.enqueue(tasks);
      const auto dir = out / spec.name;
      write_jsonl(dir / "rationales.jsonl", rows);
      write_jsonl(dir / "rewrite_queue.jsonl", queue);
      const auto funnel = funnel_of(filtered).to_json();
      write_json_file(dir / "funnel.json", funnel);
      counts[spec.name] = funnel;
    }
    counts["tokenizer"] = tokenizer->name();
    return counts;
  }

  json run_emit(json& details) {
    json counts = json::object();
    const auto out = stage_dir(Stage::kEmit);
    const auto registry = TemplateRegistry::with_defaults();
    std::vector<Method> methods = config.methods;
    if (options.method) methods = {*options.method};
    for (const auto& spec : specs) {
      const auto accepted = accepted_by_id(
          read_records(stage_dir(Stage::kRationaleFilter) / spec.name / "rationales.jsonl"));
      std::vector<Sample> samples;
      for (const auto& s : read_split(stage_dir(cleaned()), spec.name, Split::kTrain)) {
        if (accepted.count(s.id)) samples.push_back(s);
      }
      json c = {{"samples", samples.size()}};
      for (auto method : methods) {
        auto examples = emit_examples(samples, accepted, spec, method, registry);
        std::size_t batches = 0;
        if (method == Method::kMix) {
          const auto mix = assemble_mix_batches(examples, config.mix_batch_size,
                                                seed(config.seeds.mix, spec.name));
          assign_mix_batch_ids(examples, mix);
          batches = mix.size();
        } else if (method == Method::kAlign) {
          batches = assemble_align_batches(examples, config.align_pairs_per_batch).size();
        }
        write_examples(training_file(out / spec.name, method), examples);
        c[std::string(to_string(method))] = {{"examples", examples.size()}, {"batches", batches}};
      }
      counts[spec.name] = c;
    }
    json checksums = json::object();
    for (const auto& [k, v] : registry.checksums()) checksums[k] = v;
    for (const auto& spec : specs) {
      write_json_file(out / spec.name / "manifest.json",
                      {{"dataset", spec.name},
                       {"counts", counts[spec.name]},
                       {"mix_seed", seed(config.seeds.mix, spec.name)},
                       {"templates", checksums}});
    }
    details["templates"] = checksums;
    json names = json::array();
    for (auto m : methods) names.push_back(std::string(to_string(m)));
    details["methods"] = names;
    return counts;
  }

  // Token losses for each align batch, drawn from the losses seed. Lengths
  // follow the token counts of the emitted targets.
  json synthesize_loss_input() {
    const auto tokenizer = make_tokenizer("");
    json batches = json::array();
    for (const auto& spec : specs) {
      const auto path = training_file(stage_dir(Stage::kEmit) / spec.name, Method::kAlign);
      if (!fs::exists(path)) continue;
      const auto examples = read_examples(path);
      const auto grouped = assemble_align_batches(examples, config.align_pairs_per_batch);
      for (std::size_t b = 0; b < grouped.size() && b < kLossBatchesPerDataset; ++b) {
        TokenLossBatch batch;
        for (const auto& ex : grouped[b].examples) {
          TokenLossItem item;
          item.sample_id = ex.sample_id;
          item.stream = ex.stream == Stream::kLabel ? LossStream::kLabel : LossStream::kRationale;
          const auto n = std::clamp<std::size_t>(tokenizer->count(ex.target), 1,
                                                  kMaxSyntheticTokens);
          Rng rng(derive_seed(config.seeds.losses,
                              ex.sample_id + "/" + std::string(to_string(ex.stream))));
          for (std::size_t t = 0; t < n; ++t) item.token_losses.push_back(rng.uniform() * 4.0);
          batch.items.push_back(std::move(item));
        }
        batches.push_back(batch_to_json(batch));
      }
    }
    if (batches.empty()) {
      throw Error(ErrorCode::kStageDependencyMissing,
                  "loss-check needs emitted align batches or loss.input");
    }
    return {{"batches", batches}};
  }

  json run_loss_check() {
    const auto out = stage_dir(Stage::kLossCheck);
    json input = config.loss_input.empty() ? synthesize_loss_input()
                                           : read_json_file(config.resolve(config.loss_input));
    if (input.is_object() && input.contains("items")) input = {{"batches", json::array({input})}};
    input["lambdas"] = config.lambda_grid;
    const auto report = loss_check(input);
    fs::create_directories(out);
    write_json_file(out / "loss_batches.json", input);
    write_json_file(out / "loss_report.json", report);
    return {{"batches", input.at("batches").size()}, {"lambdas", config.lambda_grid.size()}};
  }

  std::vector<Prediction> infer(std::span<const Sample> test, const DatasetSpec& spec,
                                Method method, const TemplateRegistry& registry) {
    if (!inference) {
      throw Error(ErrorCode::kStageDependencyMissing,
                  "eval needs eval.predictions_dir or providers.inference");
    }
    // One fine-tuned model per method; responses are cached per model.
    std::string model = config.inference && !config.inference->model.empty()
                            ? config.inference->model
                            : std::string("student-{method}");
    text::replace_all(model, "{method}", std::string(to_string(method)));
    struct Job {
      const Sample* sample;
      InferenceMode mode;
      DecodingConfig decoding;
    };
    std::vector<Job> jobs;
    for (const auto& s : test) {
      for (auto mode : config.eval_modes) {
        if (!mode_applies(method, mode)) continue;
        for (const auto& d : decoding_configs(mode)) jobs.push_back({&s, mode, d});
      }
    }
    std::vector<Prediction> out(jobs.size());
    parallel_for(jobs.size(), config.concurrency.inference, [&](std::size_t i) {
      const auto& job = jobs[i];
      const auto request = build_inference_request(*job.sample, spec, method, job.mode,
                                                   job.decoding, registry, model);
      out[i] = {job.sample->id, job.mode, inference->complete(request).text, job.decoding.name};
    });
    return out;
  }

  json run_eval() {
    make_clients();
    json counts = json::object();
    const auto out = stage_dir(Stage::kEval);
    const auto registry = TemplateRegistry::with_defaults();
    std::vector<ScoreCell> cells;
    NaiveParseProvider naive;
    json diversity = json::object();
    for (const auto& spec : specs) {
      const auto test = read_split(stage_dir(cleaned()), spec.name, Split::kTest);
      json c = {{"test", test.size()}};
      for (auto method : config.methods) {
        const std::string name(to_string(method));
        std::vector<Prediction> preds;
        if (!config.predictions_dir.empty()) {
          const auto path = config.resolve(config.predictions_dir) / spec.name / (name + ".jsonl");
          if (!fs::exists(path)) {
            throw Error(ErrorCode::kStageDependencyMissing, "missing predictions " + path.string());
          }
          preds = read_predictions(path);
        } else {
          preds = infer(test, spec, method, registry);
        }
        std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) {
          return std::tie(a.sample_id, a.mode, a.run) < std::tie(b.sample_id, b.mode, b.run);
        });
        std::vector<json> rows;
        for (const auto& p : preds) rows.push_back(prediction_to_json(p));
        write_jsonl(out / spec.name / ("predictions_" + name + ".jsonl"), rows);
        auto scored = score_predictions(preds, test, spec, name);
        c[name] = preds.size();
        cells.insert(cells.end(), scored.begin(), scored.end());
      }
      std::vector<std::string> texts;
      for (const auto& [id, r] : accepted_by_id(read_records(
               stage_dir(Stage::kRationaleFilter) / spec.name / "rationales.jsonl"))) {
        texts.push_back(normalized_rationale(r.text));
      }
      diversity[spec.name] = diversity_report(texts, nullptr, naive).to_json();
      counts[spec.name] = c;
    }
    fs::create_directories(out);
    write_json_file(out / "eval_report.json", eval_report_json(cells));
    write_json_file(out / "diversity.json", diversity);
    return counts;
  }

  json run_report() {
    const auto out = stage_dir(Stage::kReport);
    const auto report = report_for_workdir(options.workdir);
    fs::create_directories(out);
    write_json_file(out / "report.json", report);
    write_text_file(out / "report.md", render_report_markdown(report));
    return {{"tasks", report.at("tasks").size()}};
  }
};

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  if (options_.seed_override) config_.seeds.override_with(*options_.seed_override);
  impl_ = std::make_unique<Impl>(config_, options_);
}

Pipeline::~Pipeline() = default;

std::size_t Pipeline::provider_calls() const { return impl_->calls(); }

StageResult Pipeline::run(Stage stage) {
  if (stage == Stage::kReviewServe) {
    throw Error(ErrorCode::kInvalidConfig, "review-serve runs through serve_review");
  }
  auto& im = *impl_;
  json parent_hashes = json::object();
  for (auto p : im.parents(stage)) {
    const auto path = im.manifest_path(p);
    if (!fs::exists(path)) {
      if (stage == Stage::kReport && p == Stage::kEval) {
        throw Error(ErrorCode::kNoEvalOutputs, "report needs eval outputs; run eval first");
      }
      throw Error(ErrorCode::kStageDependencyMissing,
                  std::string(to_string(stage)) + " needs " + std::string(to_string(p)) +
                      "; run it first");
    }
    parent_hashes[std::string(to_string(p))] = manifest_hash(read_json_file(path));
  }

  json inputs = {{"config", sha256_hex(config_.document.dump())},
                 {"dry_run", options_.dry_run},
                 {"parents", parent_hashes},
                 {"files", im.input_files(stage)}};
  if (stage == Stage::kEmit && options_.method) {
    inputs["method"] = std::string(to_string(*options_.method));
  }
  const auto seeds = config_.seeds.to_json();
  const auto input_hash =
      sha256_hex(json{{"stage", to_string(stage)}, {"inputs", inputs}, {"seeds", seeds}}.dump());

  const auto dir = im.stage_dir(stage);
  const auto mpath = im.manifest_path(stage);
  if (!options_.force && fs::exists(mpath)) {
    const auto previous = read_json_file(mpath);
    if (previous.value("input_hash", "") == input_hash &&
        hash_tree(dir, options_.workdir) == previous.value("outputs", json::object())) {
      return {stage, true, previous};
    }
  }

  const auto started = std::chrono::steady_clock::now();
  fs::remove_all(dir);
  json details = json::object();
  json counts;
  switch (stage) {
    case Stage::kIngest: counts = im.run_ingest(); break;
    case Stage::kCurate: counts = im.run_curate(); break;
    case Stage::kJudge: counts = im.run_judge(); break;
    case Stage::kRationaleGen: counts = im.run_rationale_gen(); break;
    case Stage::kRationaleFilter: counts = im.run_rationale_filter(); break;
    case Stage::kEmit: counts = im.run_emit(details); break;
    case Stage::kLossCheck: counts = im.run_loss_check(); break;
    case Stage::kEval: counts = im.run_eval(); break;
    case Stage::kReport: counts = im.run_report(); break;
    case Stage::kReviewServe: break;
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);

  json manifest = {{"stage", to_string(stage)},
                   {"input_hash", input_hash},
                   {"inputs", inputs},
                   {"seeds", seeds},
                   {"counts", counts},
                   {"outputs", hash_tree(dir, options_.workdir)},
                   {"duration_ms", elapsed.count()}};
  if (!details.empty()) manifest["details"] = details;
  write_json_file(mpath, manifest);
  return {stage, false, manifest};
}

std::vector<StageResult> Pipeline::run_all() {
  std::vector<Stage> order = {Stage::kIngest};
  if (impl_->cluster_first()) {
    order.insert(order.end(), {Stage::kCurate, Stage::kJudge});
  } else {
    order.insert(order.end(), {Stage::kJudge, Stage::kCurate});
  }
  order.insert(order.end(), {Stage::kRationaleGen, Stage::kRationaleFilter, Stage::kEmit,
                             Stage::kLossCheck, Stage::kEval, Stage::kReport});
  std::vector<StageResult> results;
  for (auto s : order) results.push_back(run(s));
  return results;
}

void Pipeline::serve_review(const std::atomic<bool>& stop,
                            const std::function<void(int)>& on_ready) {
  ReviewStore store(impl_->journal_path(), config_.review.annotators_per_task);
  ReviewServerOptions opts;
  opts.host = config_.review.host;
  opts.port = config_.review.port;
  opts.token = config_.review.token;
  if (!config_.review.static_dir.empty()) opts.static_dir = config_.resolve(config_.review.static_dir);
  opts.export_dir = options_.workdir / "review" / "export";
  ReviewServer server(store, opts);
  const int port = server.start();
  if (on_ready) on_ready(port);
  while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
}

VerifyResult verify_workdir(const fs::path& workdir) {
  VerifyResult result;
  std::map<std::string, std::string> hashes;
  std::map<std::string, json> manifests;
  for (auto stage : all_stages()) {
    const std::string name(to_string(stage));
    const auto path = workdir / "manifests" / (name + ".json");
    if (!fs::exists(path)) continue;
    auto m = read_json_file(path);
    hashes[name] = manifest_hash(m);
    manifests[name] = std::move(m);
  }
  result.manifests = manifests.size();
  auto problem = [&](std::string msg) {
    result.ok = false;
    result.problems.push_back(std::move(msg));
  };
  for (const auto& [name, m] : manifests) {
    const auto outputs = m.value("outputs", json::object());
    for (const auto& [rel, sha] : outputs.items()) {
      const auto file = workdir / rel;
      if (!fs::exists(file)) {
        problem(name + ": missing output " + rel);
      } else if (file_sha256(file) != sha.get<std::string>()) {
        problem(name + ": output changed " + rel);
      }
    }
    const auto actual = hash_tree(workdir / name, workdir);
    for (const auto& [rel, sha] : actual.items()) {
      if (!outputs.contains(rel)) {
        problem(name + ": unrecorded output " + rel);
      }
    }
    const auto parents = m.value("inputs", json::object()).value("parents", json::object());
    for (const auto& [parent, hash] : parents.items()) {
      auto it = hashes.find(parent);
      if (it == hashes.end()) {
        problem(name + ": parent manifest " + parent + " missing");
      } else if (it->second != hash.get<std::string>()) {
        problem(name + ": parent " + parent + " changed since this stage ran");
      }
    }
  }
  return result;
}

}  // namespace rforge
