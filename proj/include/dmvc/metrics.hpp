#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dmvc/error.hpp"

namespace dmvc::metrics {

using Labels = std::span<const std::size_t>;

/// Counts of (predicted, true) label pairs. Labels are compacted to
/// 0..k-1 in increasing order of their original value.
struct Contingency {
  std::size_t rows = 0;  // predicted clusters
  std::size_t cols = 0;  // true classes
  std::size_t n = 0;
  std::vector<std::size_t> counts;  // rows x cols, row-major

  std::size_t operator()(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }

  std::vector<std::size_t> row_sums() const {
    std::vector<std::size_t> s(rows, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) s[r] += (*this)(r, c);
    return s;
  }
  std::vector<std::size_t> col_sums() const {
    std::vector<std::size_t> s(cols, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) s[c] += (*this)(r, c);
    return s;
  }
};

namespace detail {

inline std::vector<std::size_t> compact(Labels labels, std::size_t& count) {
  std::map<std::size_t, std::size_t> ids;
  for (auto l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [_, id] : ids) id = next++;
  count = next;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  return out;
}

inline void check_lengths(Labels pred, Labels truth, const char* what) {
  if (pred.size() != truth.size())
    throw UsageError(std::string(what) + ": predicted and true labels differ in length (" +
                     std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) + ")");
  if (pred.empty()) throw UsageError(std::string(what) + ": no labels");
}

}  // namespace detail

inline Contingency contingency(Labels pred, Labels truth) {
  detail::check_lengths(pred, truth, "contingency");
  Contingency t;
  const auto p = detail::compact(pred, t.rows);
  const auto q = detail::compact(truth, t.cols);
  t.n = pred.size();
  t.counts.assign(t.rows * t.cols, 0);
  for (std::size_t i = 0; i < p.size(); ++i) ++t.counts[p[i] * t.cols + q[i]];
  return t;
}

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (row-major), via
/// shortest augmenting paths with potentials. O(k^3).
inline Assignment hungarian(std::span<const double> cost, std::size_t k) {
  if (cost.size() != k * k)
    throw UsageError("hungarian needs a square cost matrix, got " + std::to_string(cost.size()) +
                     " entries for k = " + std::to_string(k));
  for (double c : cost)
    if (!std::isfinite(c)) throw UsageError("hungarian needs finite costs");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
  std::vector<std::size_t> row_of(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= k; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.column_of_row.assign(k, 0);
  for (std::size_t j = 1; j <= k; ++j) a.column_of_row[row_of[j] - 1] = j - 1;
  for (std::size_t r = 0; r < k; ++r) a.cost += cost[r * k + a.column_of_row[r]];
  return a;
}

/// Best one-to-one mapping of predicted clusters to classes, as a fraction of samples.
inline double accuracy(Labels pred, Labels truth) {
  detail::check_lengths(pred, truth, "accuracy");
  const auto t = contingency(pred, truth);
  const std::size_t k = std::max(t.rows, t.cols);
  std::vector<double> cost(k * k, 0.0);
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) cost[r * k + c] = -static_cast<double>(t(r, c));
  const auto a = hungarian(cost, k);
  std::size_t matched = 0;
  for (std::size_t r = 0; r < t.rows; ++r)
    if (a.column_of_row[r] < t.cols) matched += t(r, a.column_of_row[r]);
  return static_cast<double>(matched) / static_cast<double>(t.n);
}

/// Mutual information over the arithmetic mean of the two entropies.
inline double nmi(Labels pred, Labels truth) {
  detail::check_lengths(pred, truth, "nmi");
  const auto t = contingency(pred, truth);
  const double n = static_cast<double>(t.n);
  const auto a = t.row_sums();
  const auto b = t.col_sums();
  auto entropy = [n](const std::vector<std::size_t>& counts) {
    double h = 0.0;
    for (auto c : counts)
      if (c > 0) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
      }
    return h;
  };
  const double ha = entropy(a), hb = entropy(b);
  if (t.rows == 1 && t.cols == 1) return 1.0;
  if (t.rows == 1 || t.cols == 1) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) {
      const double nij = static_cast<double>(t(r, c));
      if (nij == 0.0) continue;
      mi += nij / n * std::log(nij * n / (static_cast<double>(a[r]) * static_cast<double>(b[c])));
    }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

/// Adjusted Rand index from pair counts. When the expected and maximum
/// indices coincide (both partitions trivial) the index is 1.
inline double ari(Labels pred, Labels truth) {
  detail::check_lengths(pred, truth, "ari");
  if (pred.size() < 2) throw UsageError("ari needs at least two samples");
  const auto t = contingency(pred, truth);
  // integer pair counts; the index is (2 I P - 2 A B) / ((A + B) P - 2 A B)
  using Wide = __int128;
  auto pairs = [](std::size_t c) { return static_cast<Wide>(c) * static_cast<Wide>(c - (c > 0)) / 2; };
  Wide index = 0, sum_a = 0, sum_b = 0;
  for (auto c : t.counts) index += pairs(c);
  for (auto c : t.row_sums()) sum_a += pairs(c);
  for (auto c : t.col_sums()) sum_b += pairs(c);
  const Wide total = pairs(t.n);
  const Wide num = 2 * index * total - 2 * sum_a * sum_b;
  const Wide den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
  if (den == 0) return 1.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

/// Fraction of samples that carry the majority class of their predicted cluster.
inline double purity(Labels pred, Labels truth) {
  detail::check_lengths(pred, truth, "purity");
  const auto t = contingency(pred, truth);
  std::size_t total = 0;
  for (std::size_t r = 0; r < t.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < t.cols; ++c) best = std::max(best, t(r, c));
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(t.n);
}

struct Report {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double purity = 0.0;
};

inline Report evaluate(Labels pred, Labels truth) {
  return {accuracy(pred, truth), nmi(pred, truth), pred.size() >= 2 ? ari(pred, truth) : 1.0, purity(pred, truth)};
}

}  // namespace dmvc::metrics
