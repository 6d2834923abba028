#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/tensor.hpp"
#include "dmvc/random.hpp"

namespace dmvc::training {

using ng::Tensor;

struct KMeansOptions {
  std::size_t restarts = 20;
  std::size_t max_iterations = 300;
};

struct KMeansResult {
  Tensor centroids;  // K x J
  std::vector<std::size_t> labels;
  double objective = 0.0;  // within-cluster sum of squares
  std::size_t iterations = 0;
  std::vector<double> trace;  // objective after each assignment step of the kept restart
};

namespace detail {

inline double sq_dist(const Tensor& x, std::size_t i, const Tensor& c, std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const double d = x(i, j) - c(k, j);
    s += d * d;
  }
  return s;
}

/// Nearest centroid per point (ties to the lowest index); returns the objective.
inline double assign(const Tensor& x, const Tensor& c, std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(x, i, c, 0);
    for (std::size_t k = 1; k < c.rows(); ++k) {
      const double d = sq_dist(x, i, c, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    labels[i] = best;
    total += best_d;
  }
  return total;
}

inline double objective(const Tensor& x, const Tensor& c, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += sq_dist(x, i, c, labels[i]);
  return total;
}

}  // namespace detail

/// k-means++ seeding: first centroid uniform, then proportional to squared distance.
inline Tensor kmeans_plus_plus(const Tensor& x, std::size_t K, std::mt19937_64& rng) {
  const std::size_t n = x.rows(), J = x.cols();
  Tensor c({K, J});
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng() % n);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) c(k, j) = x(pick, j);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sq_dist(x, i, c, k));
      total += d2[i];
    }
    if (k + 1 == K) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng() % n);
      continue;
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= d2[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
  }
  return c;
}

/// Lloyd iterations from the given centroids until assignments stop changing.
/// An empty cluster is reseeded at the point farthest from its own centroid.
inline KMeansResult lloyd(const Tensor& x, Tensor centroids, std::size_t max_iterations) {
  const std::size_t n = x.rows(), J = x.cols(), K = centroids.rows();
  KMeansResult r;
  r.labels.assign(n, 0);
  std::vector<std::size_t> previous;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    r.trace.push_back(detail::assign(x, centroids, r.labels));
    r.iterations = it + 1;
    if (r.labels == previous) break;
    previous = r.labels;

    Tensor sums({K, J});
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.labels[i]];
      for (std::size_t j = 0; j < J; ++j) sums(r.labels[i], j) += x(i, j);
    }
    for (std::size_t k = 0; k < K; ++k)
      if (counts[k] > 0)
        for (std::size_t j = 0; j < J; ++j) centroids(k, j) = sums(k, j) / static_cast<double>(counts[k]);
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[r.labels[i]] < 2) continue;
        const double d = detail::sq_dist(x, i, centroids, r.labels[i]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0.0) continue;
      --counts[r.labels[far]];
      r.labels[far] = k;
      counts[k] = 1;
      for (std::size_t j = 0; j < J; ++j) centroids(k, j) = x(far, j);
    }
  }
  r.objective = detail::objective(x, centroids, r.labels);
  r.centroids = std::move(centroids);
  return r;
}

/// Best of `restarts` k-means++ seeded Lloyd runs by within-cluster sum of squares.
inline KMeansResult kmeans(const Tensor& x, std::size_t K, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (K == 0) throw UsageError("kmeans needs K >= 1");
  if (x.rows() < K)
    throw UsageError("kmeans needs at least K points (n = " + std::to_string(x.rows()) + ", K = " + std::to_string(K) +
                     ")");
  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t restart = 0; restart < std::max<std::size_t>(1, opt.restarts); ++restart) {
    auto rng = make_rng(seed, RngStream::kmeans, {restart});
    auto r = lloyd(x, kmeans_plus_plus(x, K, rng), opt.max_iterations);
    if (r.objective < best.objective) best = std::move(r);
  }
  return best;
}

}  // namespace dmvc::training
