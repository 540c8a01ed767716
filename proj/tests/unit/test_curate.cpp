#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "rforge/curate.hpp"
#include "rforge/embedding.hpp"

using namespace rforge;
using fixtures::error_of;

namespace {

std::vector<EmbeddingVector> random_points(fixtures::Gen& g, std::size_t n, std::size_t d) {
  std::vector<EmbeddingVector> pts;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingVector v;
    v.sample_id = "p" + std::to_string(1000 + i);
    for (std::size_t t = 0; t < d; ++t) v.values.push_back(g.real(-1.0, 1.0));
    pts.push_back(std::move(v));
  }
  return pts;
}

double sq(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Minimum inertia over every split of `pts` into two non-empty groups.
double brute_force_two_means(const std::vector<EmbeddingVector>& pts, unsigned& best_mask) {
  const std::size_t n = pts.size();
  const std::size_t d = pts[0].values.size();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double total = 0.0;
    for (unsigned side = 0; side < 2; ++side) {
      std::vector<double> mean(d, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != side) continue;
        for (std::size_t t = 0; t < d; ++t) mean[t] += pts[i].values[t];
        ++count;
      }
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) == side) total += sq(pts[i].values, mean);
      }
    }
    if (total < best) {
      best = total;
      best_mask = mask;
    }
  }
  return best;
}

VectorTable table_of(const std::vector<Sample>& samples, std::size_t dim = 8) {
  HashingEmbeddingClient client(dim);
  std::vector<std::string> texts;
  for (const auto& s : samples) texts.push_back(s.id);
  const auto vecs = client.embed(texts);
  VectorTable t;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto v = vecs[i];
    l2_normalize(v);
    t[samples[i].id] = v;
  }
  return t;
}

}  // namespace

TEST_SUITE("curate") {
  TEST_CASE("dedup keeps first occurrences") {
    auto samples = fixtures::samples_of("sentiment_en", 5, 1);
    std::vector<Sample> input{samples[0], samples[0], samples[1]};
    const auto out = dedup(input);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == samples[0]);
    CHECK(out[1] == samples[1]);
    CHECK(dedup(out) == out);

    const auto spec = fixtures::sentiment_spec();
    const std::vector<json> raw{{{"review", "Good value"}, {"label", "Positive"}},
                                {{"review", "  Good value \n"}, {"label", "Positive"}}};
    CHECK(dedup(ingest_dataset(raw, spec)).size() == 1);
  }

  TEST_CASE("k = n gives zero inertia and every point its own representative") {
    fixtures::Gen g(1);
    const auto pts = random_points(g, 12, 3);
    const auto r = kmeans(pts, {12, 5});
    CHECK(r.inertia == doctest::Approx(0.0));
    std::set<std::string> reps(r.representatives.begin(), r.representatives.end());
    CHECK(reps.size() == 12);
  }

  TEST_CASE("two separated groups match the brute-force partition") {
    std::vector<EmbeddingVector> pts{{"a", {0.0, 0.0}},
                                     {"b", {0.1, 0.0}},
                                     {"c", {5.0, 5.0}},
                                     {"d", {5.0, 5.2}}};
    unsigned mask = 0;
    const double best = brute_force_two_means(pts, mask);
    const auto r = kmeans(pts, {2, 3});
    CHECK(r.inertia == doctest::Approx(best).epsilon(1e-12));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const bool same = ((mask >> i) & 1u) == ((mask >> j) & 1u);
        CHECK((r.assignments.at(pts[i].sample_id) == r.assignments.at(pts[j].sample_id)) == same);
      }
    }
    std::set<std::size_t> rep_clusters;
    for (const auto& id : r.representatives) rep_clusters.insert(r.assignments.at(id));
    CHECK(rep_clusters.size() == 2);
    // Ties go to the smaller id: a and b are equidistant from their mean.
    CHECK(std::count(r.representatives.begin(), r.representatives.end(), "a") == 1);
    CHECK(std::count(r.representatives.begin(), r.representatives.end(), "c") == 1);
  }

  TEST_CASE("clustering ignores input order") {
    fixtures::Gen g(2);
    for (int trial = 0; trial < 10; ++trial) {
      auto pts = random_points(g, g.size(5, 120), g.size(2, 16));
      const auto k = g.size(1, pts.size());
      const auto seed = g.rng().next();
      const auto a = kmeans(pts, {k, seed});
      g.rng().shuffle(std::span<EmbeddingVector>(pts));
      const auto b = kmeans(pts, {k, seed});
      CHECK(a.representatives == b.representatives);
      CHECK(a.assignments == b.assignments);
      CHECK(a.inertia == b.inertia);
    }
  }

  TEST_CASE("inertia is non-increasing and clusters are well formed") {
    fixtures::Gen g(3);
    for (int trial = 0; trial < 20; ++trial) {
      const auto pts = random_points(g, g.size(2, 300), g.size(1, 12));
      const auto k = g.size(1, std::min<std::size_t>(pts.size(), 40));
      const auto r = kmeans(pts, {k, g.rng().next()});
      for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
        CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] * (1.0 + 1e-12) + 1e-12);
      }
      REQUIRE(r.representatives.size() == k);
      for (std::size_t c = 0; c < k; ++c) {
        CHECK(r.assignments.at(r.representatives[c]) == c);
      }
      for (const auto& [id, c] : r.assignments) CHECK(c < k);
      CHECK(r.inertia >= 0.0);
    }
  }

  TEST_CASE("kmeans errors") {
    std::vector<EmbeddingVector> pts{{"a", {0.0}}, {"b", {1.0}}};
    CHECK(error_of([&] { kmeans(pts, {3, 0}); }) == ErrorCode::kKTooLarge);
    CHECK(error_of([&] { kmeans(pts, {0, 0}); }) == ErrorCode::kKTooLarge);
    pts.push_back({"c", {1.0, 2.0}});
    CHECK(error_of([&] { kmeans(pts, {2, 0}); }) == ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("select_training_subset sizes") {
    const auto samples = fixtures::samples_of("topic_zh", 400, 8);
    const auto vectors = table_of(samples);
    CHECK(select_training_subset(samples, vectors, 1000, 1).size() == 400);
    const auto subset = select_training_subset(samples, vectors, 150, 1);
    CHECK(subset.size() == 150);
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.id);
    for (const auto& s : subset) CHECK(ids.count(s.id) == 1);
    CHECK(select_training_subset(samples, vectors, 150, 1) == subset);
  }

  TEST_CASE("eval caps") {
    CHECK(eval_cap(25000) == 3125);
    CHECK(eval_cap(8000) == 1000);
    CHECK(eval_cap(7) == 0);
    const auto dev = fixtures::samples_of("topic_zh", 300, 21, Split::kDev);
    const auto test = fixtures::samples_of("topic_zh", 40, 22, Split::kTest);
    auto all = dev;
    all.insert(all.end(), test.begin(), test.end());
    const auto vectors = table_of(all);
    const auto r = apply_eval_caps(800, dev, test, vectors, 4);
    CHECK(r.cap == 100);
    CHECK(r.dev.size() == 100);
    CHECK(r.test.size() == 40);
    CHECK(apply_eval_caps(800, dev, test, vectors, 4, {}, 4).dev.size() == 200);
  }

  TEST_CASE("vector cache round trip is bit-identical") {
    fixtures::TempDir dir;
    const auto samples = fixtures::samples_of("paraphrase_zh", 30, 2);
    const auto spec = fixtures::paraphrase_spec();
    HashingEmbeddingClient client(16);
    VectorCache cache(dir / "v.bin", client.model(), 16);
    const auto first = embed_samples(samples, spec, client, cache, {7, 2, 1});
    CHECK(first.embedded == 30);
    CHECK(first.requests == 5);
    cache.save();
    for (const auto& [id, v] : cache.table()) {
      double norm = 0.0;
      for (double x : v) norm += x * x;
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }

    VectorCache reloaded(dir / "v.bin", client.model(), 16);
    reloaded.load();
    CHECK(reloaded.table() == cache.table());
    const auto second = embed_samples(samples, spec, client, reloaded);
    CHECK(second.cached == 30);
    CHECK(second.requests == 0);

    VectorCache other_model(dir / "v.bin", "another-model", 16);
    other_model.load();
    CHECK(other_model.table().empty());
  }
}
