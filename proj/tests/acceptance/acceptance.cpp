// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cot_fixtures.hpp"
#include "fixtures.hpp"
#include "rforge/answer.hpp"
#include "rforge/corpus.hpp"
#include "rforge/curate.hpp"
#include "rforge/emit.hpp"
#include "rforge/evalsuite.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/judge.hpp"
#include "rforge/losskernel.hpp"
#include "rforge/pipeline.hpp"
#include "rforge/providers.hpp"
#include "rforge/rationale.hpp"
#include "rforge/synth.hpp"
#include "rforge/tokenizer.hpp"

using namespace rforge;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

TokenLossBatch two_stream(std::vector<double> label, std::vector<double> rationale) {
  TokenLossBatch b;
  b.items.push_back({"x", LossStream::kLabel, std::move(label)});
  b.items.push_back({"x", LossStream::kRationale, std::move(rationale)});
  return b;
}

// ---------------------------------------------------------------------------

void loss_oracle(Outcome& o) {
  fixtures::Gen g(1001);
  std::vector<TokenLossBatch> batches;
  for (int i = 0; i < 1000; ++i) batches.push_back(g.loss_batch(1, 64, 128));
  const auto t0 = Clock::now();
  std::size_t agree = 0;
  for (const auto& b : batches) {
    if (rel_close(loss_mix(b), flat_sum_oracle(b), 1e-12)) ++agree;
  }
  const double secs = seconds_since(t0);
  o.expect(agree == batches.size(), "loss_mix disagrees with the flat-sum oracle");
  o.expect(secs < 5.0, "runtime over 5 s");
  o.detail << agree << "/1000 batches within 1e-12, " << secs << " s";
}

void kernel_fixtures(Outcome& o) {
  const auto sym = two_stream({1.0, 3.0}, {2.0, 2.0, 2.0, 2.0});
  const auto asym = two_stream({4.0}, {1.0, 1.0});
  const double mix = loss_mix(sym);
  const double align = loss_align(sym, CoefficientPair::make(0.5));
  const double unit = loss_align_unit_weight(sym);
  const double a75 = loss_align(asym, CoefficientPair::make(0.75));
  o.expect(std::abs(mix - 2.0) <= 1e-12, "mix != 2.0");
  o.expect(std::abs(align - 2.0) <= 1e-12, "align(0.5) != 2.0");
  o.expect(std::abs(unit - 4.0) <= 1e-12, "unit-weight != 4.0");
  o.expect(std::abs(a75 - 3.25) <= 1e-12, "align(0.75) != 3.25");
  o.detail << "mix " << mix << ", align(0.5) " << align << ", unit-weight " << unit
           << ", align(0.75) " << a75;
}

void affinity(Outcome& o) {
  fixtures::Gen g(1002);
  std::vector<TokenLossBatch> batches;
  std::size_t exact = 0;
  for (int i = 0; i < 1000; ++i) {
    auto b = g.loss_batch(2, 64, 128);
    const double at1 = loss_align(b, CoefficientPair::make(1.0));
    const double at0 = loss_align(b, CoefficientPair::make(0.0));
    const double lambda = g.real(0.0, 1.0);
    if (loss_align(b, CoefficientPair::make(lambda)) == lambda * at1 + (1.0 - lambda) * at0) {
      ++exact;
    }
    batches.push_back(std::move(b));
  }
  o.expect(exact == 1000, "interpolation not exact");
  const auto table = coefficient_sweep(batches, default_lambda_grid());
  o.expect(table.size() == 5, "grid table does not have five rows");
  o.detail << exact << "/1000 exact; lambda table:";
  for (const auto& row : table) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %.2f->%.6f", row.lambda, row.mean_loss);
    o.detail << buf;
  }
}

Resolution vote_oracle(const std::vector<std::string>& votes, std::size_t primary) {
  std::map<std::string, int> tally;
  for (const auto& v : votes) ++tally[v];
  for (const auto& [label, n] : tally) {
    if (n == 3) return {label, ResolutionKind::kUnanimous};
    if (n == 2) return {label, ResolutionKind::kMajority};
  }
  return {votes[primary], ResolutionKind::kPrimaryTiebreak};
}

void judge_votes(Outcome& o) {
  const std::vector<std::string> labels{"A", "B", "C"};
  const std::vector<std::string> judges{"j0", "j1", "j2"};
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::size_t primary = 0; primary < 3; ++primary) {
    for (const auto& a : labels) {
      for (const auto& b : labels) {
        for (const auto& c : labels) {
          const std::vector<std::string> votes{a, b, c};
          std::vector<JudgePrediction> preds;
          for (std::size_t i = 0; i < 3; ++i) preds.push_back({judges[i], votes[i], votes[i]});
          const auto got = resolve_votes(preds, judges[primary]);
          const auto want = vote_oracle(votes, primary);
          ++total;
          if (got.label == want.label && got.kind == want.kind) ++agree;
        }
      }
    }
  }
  o.expect(agree == total, "resolution disagrees with the oracle");
  o.detail << agree << "/" << total << " assignments (27 per primary judge)";
}

void filter_boundary(Outcome& o) {
  FallbackTokenizer tok;
  const auto spec = fixtures::sentiment_spec();
  const auto sample = fixtures::samples_of("sentiment_en", 1, 3)[0];
  const auto label = label_text(sample.label);
  const auto wrong = label == "Positive" ? std::string("Negative") : std::string("Positive");
  auto text_with_total = [&](const std::string& answer, std::size_t total) {
    const auto closing = answer_sentence(Language::kEn, answer);
    std::string body;
    for (std::size_t i = tok.count(closing) + tok.count(label); i < total; ++i) body += "word ";
    return body + closing;
  };
  auto status_of = [&](const std::string& text) {
    RationaleRecord r;
    r.sample_id = sample.id;
    r.text = text;
    return filter_rationale(r, sample, spec, tok).status;
  };
  const auto t1023 = text_with_total(label, 1023);
  const auto t1024 = text_with_total(label, 1024);
  o.expect(tok.count(t1023) + tok.count(label) == 1023, "1023 fixture miscounted");
  o.expect(tok.count(t1024) + tok.count(label) == 1024, "1024 fixture miscounted");
  const auto s1023 = status_of(t1023);
  const auto s1024 = status_of(t1024);
  const auto both = status_of(text_with_total(wrong, 1024));
  o.expect(s1023 == RationaleStatus::kAccepted, "1023 not accepted");
  o.expect(s1024 == RationaleStatus::kRejectedLength, "1024 not rejected_length");
  o.expect(both == RationaleStatus::kRejectedLength, "over-length and inconsistent not length");
  o.detail << "1023 -> " << to_string(s1023) << ", 1024 -> " << to_string(s1024)
           << ", over-length+inconsistent -> " << to_string(both);
}

void emission_counts(Outcome& o) {
  const auto registry = TemplateRegistry::with_defaults();
  const auto spec = fixtures::sentiment_spec();
  for (std::size_t n : {1u, 10u, 1000u}) {
    const auto samples = fixtures::samples_of("sentiment_en", n, 77);
    std::map<std::string, RationaleRecord> rationales;
    for (const auto& s : samples) {
      RationaleRecord r;
      r.sample_id = s.id;
      r.text = "Reasoning.\n" + answer_sentence(Language::kEn, label_text(s.label));
      r.status = RationaleStatus::kAccepted;
      rationales[s.id] = r;
    }
    const auto ns = std::to_string(n);
    for (auto m : all_methods()) {
      const auto ex = emit_examples(samples, rationales, spec, m, registry);
      const bool two = m == Method::kMix || m == Method::kAlign;
      o.expect(ex.size() == (two ? 2 * n : n), std::string(to_string(m)) + " count, n=" + ns);
      if (m == Method::kAlign) {
        const auto batches = assemble_align_batches(ex);
        bool paired = batches.size() == n;
        for (const auto& b : batches) {
          paired = paired && b.examples.size() == 2 &&
                   b.examples[0].sample_id == b.examples[1].sample_id &&
                   b.examples[0].stream != b.examples[1].stream;
        }
        o.expect(paired, "align batches, n=" + ns);
      }
      if (m == Method::kMix) {
        std::multiset<std::string> pool;
        std::multiset<std::string> seen;
        for (const auto& e : ex) pool.insert(e.sample_id + std::string(to_string(e.stream)));
        for (const auto& b : assemble_mix_batches(ex, 8, 5)) {
          for (const auto& e : b.examples) seen.insert(e.sample_id + std::string(to_string(e.stream)));
        }
        o.expect(pool == seen, "mix epoch partition, n=" + ns);
      }
    }
  }
  o.detail << "n in {1, 10, 1000}: label_only/reason/explain n, mix/align 2n, align n pairs, "
              "mix partition exact";
}

void split_and_caps(Outcome& o) {
  struct Row {
    std::size_t n, train, dev, test;
  };
  for (const auto& r : {Row{10, 8, 1, 1}, Row{100, 80, 10, 10}, Row{101, 81, 10, 10},
                        Row{12345, 9877, 1234, 1234}}) {
    const auto c = split_counts(r.n);
    o.expect(c.train == r.train && c.dev == r.dev && c.test == r.test,
             "split counts for n=" + std::to_string(r.n));
  }

  // Oversized dataset: more than 25,000 training samples after the split.
  const auto t0 = Clock::now();
  const auto ds = make_synthetic_dataset("topic_zh", 32500, 9);
  auto samples = dedup(ingest_dataset(ds.records, ds.spec));
  const auto splits = split_dataset(samples, 4);
  std::vector<Sample> train, dev, test;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].split = splits[i];
    (splits[i] == Split::kTrain ? train : splits[i] == Split::kDev ? dev : test).push_back(samples[i]);
  }
  o.expect(train.size() > 25000, "synthetic dataset not oversized");
  HashingEmbeddingClient client(8);
  VectorTable vectors;
  std::vector<std::string> texts;
  for (const auto& s : samples) texts.push_back(render_input(s, ds.spec));
  const auto embedded = client.embed(texts);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto v = embedded[i];
    l2_normalize(v);
    vectors[samples[i].id] = std::move(v);
  }
  ClusterParams params;
  params.max_iter = 10;
  const auto capped = select_training_subset(train, vectors, 25000, 11, params);
  const auto caps = apply_eval_caps(capped.size(), dev, test, vectors, 12, params);
  o.expect(capped.size() == 25000, "train cap not 25000");
  o.expect(caps.cap == capped.size() / 8, "eval cap not floor(train/8)");
  o.expect(caps.dev.size() == std::min(dev.size(), caps.cap), "dev not capped");
  o.expect(caps.test.size() == std::min(test.size(), caps.cap), "test not capped");
  o.detail << "8:1:1 exact for 10/100/101/12345; oversized " << samples.size() << " -> train "
           << train.size() << " capped " << capped.size() << ", eval cap " << caps.cap
           << " (dev " << caps.dev.size() << "/" << dev.size() << ", test " << caps.test.size()
           << "/" << test.size() << "), " << seconds_since(t0) << " s";
}

std::vector<EmbeddingVector> random_points(fixtures::Gen& g, std::size_t n, std::size_t d) {
  std::vector<EmbeddingVector> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].sample_id = "p" + std::to_string(100000 + i);
    pts[i].values.resize(d);
    for (auto& x : pts[i].values) x = g.real(-1.0, 1.0);
  }
  return pts;
}

void kmeans_sanity(Outcome& o) {
  fixtures::Gen g(1003);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = random_points(g, g.size(10, 300), g.size(2, 16));
    const KMeansOptions opts{g.size(1, 20), g.rng().next()};
    const auto a = kmeans(pts, opts);
    g.rng().shuffle(std::span<EmbeddingVector>(pts));
    const auto b = kmeans(pts, opts);
    o.expect(a.assignments == b.assignments && a.representatives == b.representatives &&
                 a.inertia == b.inertia,
             "permutation changed the result");
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
      o.expect(a.inertia_history[i] <= a.inertia_history[i - 1] * (1.0 + 1e-12) + 1e-12,
               "inertia increased");
    }
  }
  const auto small = random_points(g, 50, 4);
  o.expect(kmeans(small, {50, 1}).inertia == 0.0, "k=n inertia not 0");

  // Clustered synthetic data: 10,000 points in 256 dimensions around 50 centres.
  std::vector<std::vector<double>> centres(50, std::vector<double>(256));
  for (auto& c : centres) {
    for (auto& x : c) x = g.real(-1.0, 1.0);
  }
  std::vector<EmbeddingVector> big(10000);
  for (std::size_t i = 0; i < big.size(); ++i) {
    big[i].sample_id = "b" + std::to_string(100000 + i);
    const auto& c = centres[i % centres.size()];
    big[i].values.resize(256);
    for (std::size_t t = 0; t < 256; ++t) big[i].values[t] = c[t] + g.real(-0.1, 0.1);
  }
  const auto t0 = Clock::now();
  const auto r = kmeans(big, {50, 7});
  const double secs = seconds_since(t0);
  bool monotone = true;
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
    monotone = monotone && r.inertia_history[i] <= r.inertia_history[i - 1] * (1.0 + 1e-12);
  }
  o.expect(monotone, "inertia increased on 10k x 256");
  o.expect(secs < 60.0, "10k x 256 clustering over 60 s");
  o.detail << "permutation-invariant on 10 trials, k=n inertia 0, 10000x256 k=50 in " << secs
           << " s (" << r.iterations << " iterations)";
}

void parser_fixtures(Outcome& o) {
  const auto cases = fixtures::cot_cases();
  std::size_t ok = 0;
  for (const auto& c : cases) {
    const auto got = parse_answer(c.output, InferenceMode::kCot, AnswerParser{c.labels});
    if (got == c.expected) {
      ++ok;
    } else {
      o.expect(false, "fixture '" + c.name + "'");
    }
  }
  o.expect(cases.size() >= 20, "fewer than 20 fixtures");

  const auto registry = TemplateRegistry::with_defaults();
  std::size_t recovered = 0;
  std::size_t total = 0;
  const std::vector<std::string> kinds{"sentiment_en", "paraphrase_zh", "topic_zh", "ner_zh"};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const auto ds = make_synthetic_dataset(kinds[k], 250, 21 + k);
    const auto samples = ingest_dataset(ds.records, ds.spec);
    std::map<std::string, RationaleRecord> rationales;
    std::map<std::string, std::string> gold;
    for (const auto& s : samples) {
      RationaleRecord r;
      r.sample_id = s.id;
      r.text = "First, read the input.\nSecond, weigh the evidence.\n" +
               answer_sentence(ds.spec.language, label_text(s.label));
      r.status = RationaleStatus::kAccepted;
      rationales[s.id] = r;
      gold[s.id] = label_text(s.label);
    }
    const auto parser = AnswerParser::for_dataset(ds.spec);
    for (const auto& e : emit_examples(samples, rationales, ds.spec, Method::kReason, registry)) {
      ++total;
      if (parse_answer(e.target, InferenceMode::kCot, parser) == gold.at(e.sample_id)) ++recovered;
    }
  }
  o.expect(total == 1000 && recovered == total, "reason round trip lost labels");
  o.detail << ok << "/" << cases.size() << " CoT fixtures; reason round trip " << recovered << "/"
           << total;
}

void metric_fixtures(Outcome& o) {
  const std::vector<Span> pred{{"PER", "张三", std::nullopt}};
  const std::vector<Span> gold{{"PER", "张三", std::nullopt}, {"LOC", "上海", std::nullopt}};
  const auto s = span_f1(pred, gold);
  o.expect(s.precision == 1.0 && s.recall == 0.5 && std::abs(s.f1 - 0.667) <= 0.001,
           "span f1 hand case");
  fixtures::Gen g(1004);
  std::size_t ok = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> xs(g.size(1, 30));
    long double sum = 0.0L;
    for (auto& x : xs) {
      x = g.real(0.0, 1.0);
      sum += x;
    }
    if (rel_close(macro_average(xs), static_cast<double>(sum / xs.size()), 1e-12)) ++ok;
  }
  o.expect(ok == 1000, "macro average differs from the arithmetic mean");
  char buf[96];
  std::snprintf(buf, sizeof buf, "span f1 (%.3f, %.3f, %.3f); macro average %zu/1000", s.precision,
                s.recall, s.f1, ok);
  o.detail << buf;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    const auto top = rel.substr(0, rel.find('/'));
    // Manifests carry timings; caches and the review journal are bookkeeping.
    if (top == "manifests" || top == "cache" || top == "review") continue;
    out[rel] = read_text_file(e.path());
  }
  return out;
}

void end_to_end(Outcome& o) {
  fixtures::TempDir dir;
  const auto ws = write_synthetic_workspace(dir / "data", 200, 42);
  const auto config = load_config(ws.config);
  const auto requests_before = http_request_count();
  double worst = 0.0;
  for (const char* name : {"run1", "run2"}) {
    RunOptions opts;
    opts.workdir = dir / name;
    opts.dry_run = true;
    const auto t0 = Clock::now();
    Pipeline(config, opts).run_all();
    worst = std::max(worst, seconds_since(t0));
  }
  const auto network = http_request_count() - requests_before;
  const auto a = tree_contents(dir / "run1");
  const auto b = tree_contents(dir / "run2");
  o.expect(a == b, "runs differ");
  std::size_t training_files = 0;
  for (const auto& d : ws.datasets) {
    for (auto m : all_methods()) {
      const auto rel = "emit/" + d + "/train_" + std::string(to_string(m)) + ".jsonl";
      if (a.count(rel)) ++training_files;
      o.expect(a.count(rel) == 1, "missing " + rel);
    }
  }
  o.expect(a.count("report/report.json") == 1, "missing report");
  o.expect(network == 0, "network calls made");
  o.expect(worst < 30.0, "run over 30 s");
  o.expect(verify_workdir(dir / "run1").ok, "verify failed");
  o.detail << ws.records << " samples, " << a.size() << " files byte-identical across runs, "
           << training_files << " training files over " << ws.datasets.size()
           << " datasets, report present, " << network << " network calls, slowest run "
           << worst << " s";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"loss-kernel oracle equivalence", loss_oracle},
      {"hand-derived kernel fixtures", kernel_fixtures},
      {"affinity in lambda", affinity},
      {"judge vote table", judge_votes},
      {"filter boundary and rule order", filter_boundary},
      {"emission counts", emission_counts},
      {"split and caps", split_and_caps},
      {"k-means determinism and sanity", kmeans_sanity},
      {"parser fixtures and reason round trip", parser_fixtures},
      {"metric fixtures", metric_fixtures},
      {"end-to-end dry run", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str();
    for (const auto& f : o.failures) std::cout << " [" << f << "]";
    std::cout << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
