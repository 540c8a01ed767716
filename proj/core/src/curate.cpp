#include "rforge/curate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "rforge/error.hpp"
#include "rforge/rng.hpp"

namespace rforge {

void l2_normalize(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 <= 0.0) return;
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
}

std::vector<Sample> dedup(std::span<const Sample> samples) {
  std::vector<Sample> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.id).second) out.push_back(s);
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

inline double dist2(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// Row-major n x d point matrix in sample-id order.
struct PointSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;
  std::vector<std::string> ids;

  const double* row(std::size_t i) const { return data.data() + i * d; }
};

PointSet gather(std::span<const EmbeddingVector> vectors) {
  PointSet ps;
  ps.n = vectors.size();
  ps.d = vectors.front().dim();
  std::vector<std::size_t> order(ps.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return vectors[a].sample_id < vectors[b].sample_id;
  });
  ps.data.reserve(ps.n * ps.d);
  ps.ids.reserve(ps.n);
  for (std::size_t i : order) {
    ps.data.insert(ps.data.end(), vectors[i].values.begin(), vectors[i].values.end());
    ps.ids.push_back(vectors[i].sample_id);
  }
  return ps;
}

std::vector<double> seed_plus_plus(const PointSet& ps, std::size_t k, Rng& rng) {
  const std::size_t n = ps.n;
  const std::size_t d = ps.d;
  std::vector<double> centroids;
  if (n == 0 || k == 0) return centroids;
  centroids.reserve(k * d);
  std::vector<char> chosen(n, 0);
  std::vector<double> nearest(n, kInf);

  auto take = [&](std::size_t idx) {
    chosen[idx] = 1;
    const double* c = ps.row(idx);
    centroids.insert(centroids.end(), c, c + d);
    for (std::size_t i = 0; i < n; ++i) {
      const double dd = dist2(ps.row(i), c, d);
      if (dd < nearest[i]) nearest[i] = dd;
    }
  };

  take(static_cast<std::size_t>(rng.below(n)));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) total += nearest[i];
    }
    std::size_t pick = kNone;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      std::size_t last_positive = kNone;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || nearest[i] <= 0.0) continue;
        last_positive = i;
        acc += nearest[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
      if (pick == kNone) pick = last_positive;
    } else {
      // Remaining points coincide with chosen centres; pick uniformly.
      std::size_t remaining = n - c;
      std::size_t r = static_cast<std::size_t>(rng.below(remaining));
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    take(pick);
  }
  return centroids;
}

}  // namespace

ClusteringResult kmeans(std::span<const EmbeddingVector> vectors, const KMeansOptions& options) {
  const std::size_t k = options.k;
  if (k == 0 || k > vectors.size()) {
    throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(k) + " with " +
                                           std::to_string(vectors.size()) + " vectors");
  }
  const std::size_t dim = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() != dim || dim == 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  v.sample_id + " has dim " + std::to_string(v.dim()) + ", expected " +
                      std::to_string(dim));
    }
  }

  const PointSet ps = gather(vectors);
  const std::size_t n = ps.n;
  const std::size_t d = ps.d;
  Rng rng(options.seed);
  std::vector<double> centroids = seed_plus_plus(ps, k, rng);
  auto centroid = [&](std::size_t j) { return centroids.data() + j * d; };

  std::vector<std::size_t> assign(n, kNone);
  std::vector<double> upper(n, kInf);  // >= distance to own centroid
  std::vector<double> lower(n, 0.0);   // <= distance to any other centroid
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> next(k * d);
  std::vector<double> jump(k, 0.0);   // repair moves this iteration
  std::vector<double> moved(k, 0.0);  // total centre movement this iteration

  ClusteringResult result;
  result.k = k;

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    // Assignment. Bounds let most points skip the full scan once centroids
    // settle; a point keeps its cluster on exact ties.
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = ps.row(i);
      if (assign[i] != kNone) {
        if (upper[i] * (1.0 + 1e-9) < lower[i]) continue;
        upper[i] = std::sqrt(dist2(x, centroid(assign[i]), d));
        if (upper[i] * (1.0 + 1e-9) < lower[i]) continue;
      }
      std::size_t best = assign[i];
      double best_d = best == kNone ? kInf : dist2(x, centroid(best), d);
      double second_d = kInf;
      for (std::size_t j = 0; j < k; ++j) {
        if (j == assign[i]) continue;
        const double dd = dist2(x, centroid(j), d);
        if (dd < best_d || (dd == best_d && best == kNone)) {
          second_d = best_d;
          best_d = dd;
          best = j;
        } else if (dd < second_d) {
          second_d = dd;
        }
      }
      assign[i] = best;
      upper[i] = std::sqrt(best_d);
      lower[i] = std::sqrt(second_d);
    }

    std::fill(counts.begin(), counts.end(), 0);
    std::fill(jump.begin(), jump.end(), 0.0);
    bool repaired = false;
    for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
    for (std::size_t e = 0; e < k; ++e) {
      if (counts[e] != 0) continue;
      const std::size_t largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = kNone;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != largest) continue;
        const double dd = dist2(ps.row(i), centroid(largest), d);
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      assign[far] = e;
      --counts[largest];
      counts[e] = 1;
      // The centre teleports; remember how far so the bounds stay valid.
      jump[e] += std::sqrt(dist2(ps.row(far), centroid(e), d));
      std::copy(ps.row(far), ps.row(far) + d, centroid(e));
      repaired = true;
      upper[far] = kInf;
      lower[far] = 0.0;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += dist2(ps.row(i), centroid(assign[i]), d);
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;

    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* acc = next.data() + assign[i] * d;
      const double* x = ps.row(i);
      for (std::size_t t = 0; t < d; ++t) acc[t] += x[t];
    }
    double max_shift = 0.0;
    double max_moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double* acc = next.data() + j * d;
      const double inv = 1.0 / static_cast<double>(counts[j]);
      for (std::size_t t = 0; t < d; ++t) acc[t] *= inv;
      const double s = std::sqrt(dist2(acc, centroid(j), d));
      max_shift = std::max(max_shift, s);
      moved[j] = s + jump[j];
      max_moved = std::max(max_moved, moved[j]);
    }
    centroids.swap(next);
    for (std::size_t i = 0; i < n; ++i) {
      upper[i] += moved[assign[i]];
      lower[i] -= max_moved;
    }
    if (!repaired && max_shift < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.centroids.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    result.centroids[j].assign(centroid(j), centroid(j) + d);
  }
  result.inertia = 0.0;
  result.representatives.assign(k, std::string());
  std::vector<double> rep_d(k, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = assign[i];
    const double dd = dist2(ps.row(i), centroid(c), d);
    result.inertia += dd;
    result.assignments[ps.ids[i]] = c;
    // Points are visited in id order, so strict < keeps the smallest id.
    if (dd < rep_d[c]) {
      rep_d[c] = dd;
      result.representatives[c] = ps.ids[i];
    }
  }
  return result;
}

std::vector<Sample> select_training_subset(std::span<const Sample> samples,
                                           const VectorTable& vectors,
                                           std::size_t target_size, std::uint64_t seed,
                                           const ClusterParams& params) {
  if (target_size == 0) {
    throw Error(ErrorCode::kKTooLarge, "target_size must be >= 1");
  }
  if (samples.size() <= target_size) return {samples.begin(), samples.end()};
  std::vector<EmbeddingVector> points;
  points.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = vectors.find(s.id);
    if (it == vectors.end()) {
      throw Error(ErrorCode::kDimensionMismatch, "no embedding for sample " + s.id);
    }
    points.push_back(EmbeddingVector{s.id, it->second});
  }
  const auto result = kmeans(points, KMeansOptions{target_size, seed, params.max_iter, params.tol});
  std::unordered_set<std::string> keep(result.representatives.begin(),
                                       result.representatives.end());
  std::vector<Sample> out;
  out.reserve(target_size);
  for (const auto& s : samples) {
    if (keep.erase(s.id)) out.push_back(s);
  }
  return out;
}

EvalCapResult apply_eval_caps(std::size_t train_size, std::span<const Sample> dev,
                              std::span<const Sample> test, const VectorTable& vectors,
                              std::uint64_t seed, const ClusterParams& params,
                              std::size_t divisor) {
  EvalCapResult r;
  r.cap = eval_cap(train_size, divisor);
  if (r.cap == 0) return r;
  r.dev = select_training_subset(dev, vectors, r.cap, derive_seed(seed, "dev"), params);
  r.test = select_training_subset(test, vectors, r.cap, derive_seed(seed, "test"), params);
  return r;
}

}  // namespace rforge
