#pragma once

// Enumeration oracles for the clustering metrics; shared with the acceptance binary.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace dmvc::oracle {

inline double brute_force_assignment(const std::vector<double>& cost, std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t r = 0; r < k; ++r) s += cost[r * k + perm[r]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Max over injective maps of predicted labels into (padded) true labels.
inline double brute_force_accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  const std::size_t kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const std::size_t kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const std::size_t k = std::max(kp, kt);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[pred[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

/// Adjusted Rand index from explicit pair agreement counts.
inline double pair_enumeration_ari(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::size_t n = a.size();
  double both = 0, same_a = 0, same_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      same_a += sa;
      same_b += sb;
      pairs += 1;
    }
  const double expected = same_a * same_b / pairs;
  const double max_index = 0.5 * (same_a + same_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

}  // namespace dmvc::oracle
