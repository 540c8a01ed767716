#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rforge/corpus.hpp"

namespace rforge {

struct EmbeddingVector {
  std::string sample_id;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

using VectorTable = std::unordered_map<std::string, std::vector<double>>;

void l2_normalize(std::vector<double>& v);

// Keeps the first occurrence of each sample id (ids are canonical content
// hashes), preserving order.
std::vector<Sample> dedup(std::span<const Sample> samples);

struct ClusterParams {
  std::size_t max_iter = 100;
  double tol = 1e-4;
};

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-4;  // stop when every centroid moves less than this
};

struct ClusteringResult {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignments;
  std::vector<std::vector<double>> centroids;
  // representatives[c] is the member of cluster c nearest its centroid,
  // ties broken by the smallest sample id.
  std::vector<std::string> representatives;
  double inertia = 0.0;
  // Inertia measured after each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd iterations with k-means++ seeding on squared Euclidean distance.
// Inputs are ordered by sample id before seeding, so the result depends only
// on the set of vectors and the seed. Empty clusters are repaired by moving
// the point farthest from the centroid of the largest cluster.
// Throws kKTooLarge (k == 0 or k > n) and kDimensionMismatch.
ClusteringResult kmeans(std::span<const EmbeddingVector> vectors, const KMeansOptions& options);

// Returns all samples when there are at most `target_size`, otherwise the
// k-means representatives for k = target_size, in input order.
std::vector<Sample> select_training_subset(std::span<const Sample> samples,
                                           const VectorTable& vectors,
                                           std::size_t target_size, std::uint64_t seed,
                                           const ClusterParams& params = {});

struct EvalCapResult {
  std::size_t cap = 0;
  std::vector<Sample> dev;
  std::vector<Sample> test;
};

inline std::size_t eval_cap(std::size_t train_size, std::size_t divisor = 8) {
  return train_size / divisor;
}

// dev and test each reduced to at most floor(train_size / divisor).
EvalCapResult apply_eval_caps(std::size_t train_size, std::span<const Sample> dev,
                              std::span<const Sample> test, const VectorTable& vectors,
                              std::uint64_t seed, const ClusterParams& params = {},
                              std::size_t divisor = 8);

}  // namespace rforge
