#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "factsteer/common/error.hpp"
#include "factsteer/common/vec.hpp"

namespace factsteer::eval {

struct Clustering {
  std::vector<int> assignment;        // point -> cluster
  std::vector<Vector> centroids;
  std::vector<std::size_t> medoids;   // cluster -> index of the member nearest its centroid
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Lloyd's algorithm with seeded k-means++ initialization. k is clamped to the
// number of points.
inline Clustering kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                         int max_iter = 100) {
  if (points.empty()) throw InvalidArgument("kmeans: no points");
  if (k == 0) throw InvalidArgument("kmeans: k must be >= 1");
  const std::size_t n = points.size();
  k = std::min(k, n);
  std::mt19937_64 rng(seed);

  Clustering c;
  c.centroids.push_back(points[rng() % n]);
  std::vector<double> d2(n);
  while (c.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (const auto& cen : c.centroids) d2[i] = std::min(d2[i], squared_distance(points[i], cen));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n && r >= d2[pick]; ++pick) r -= d2[pick];
    } else {
      pick = c.centroids.size();  // all points coincide
    }
    c.centroids.push_back(points[pick]);
  }

  c.assignment.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = squared_distance(points[i], c.centroids[j]);
        if (d < bd) bd = d, best = static_cast<int>(j);
      }
      if (c.assignment[i] != best) c.assignment[i] = best, changed = true;
    }
    std::vector<Vector> sums(k, Vector(points[0].size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(c.assignment[i]);
      for (std::size_t d = 0; d < sums[j].size(); ++d) sums[j][d] += points[i][d];
      ++counts[j];
    }
    for (std::size_t j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (std::size_t d = 0; d < sums[j].size(); ++d) c.centroids[j][d] = sums[j][d] / counts[j];
    if (!changed) break;
  }

  c.medoids.assign(k, n);
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(c.assignment[i]);
    const double d = squared_distance(points[i], c.centroids[j]);
    if (d < best[j]) best[j] = d, c.medoids[j] = i;
  }
  return c;
}

}  // namespace factsteer::eval
