#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/labeling.hpp"

namespace xrisk {

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1_risky = 0.0;
  double macro_f1 = 0.0;
};

// Positive class is Risky. Zero denominators yield 0 by convention.
inline ClassificationMetrics classification_metrics(
    const std::vector<RiskClass>& predicted,
    const std::vector<RiskClass>& truth) {
  if (predicted.size() != truth.size())
    throw InputError("classification_metrics: length mismatch (" +
                     std::to_string(predicted.size()) + " vs " +
                     std::to_string(truth.size()) + ")");
  if (predicted.empty())
    throw InputError("classification_metrics: empty input");

  auto f1_for = [&](RiskClass positive) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      bool p = predicted[i] == positive;
      bool t = truth[i] == positive;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    double prec = (tp + fp) == 0 ? 0.0 : double(tp) / double(tp + fp);
    double rec = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
    double f1 = (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    return std::array<double, 3>{prec, rec, f1};
  };

  auto risky = f1_for(RiskClass::Risky);
  auto nonrisky = f1_for(RiskClass::NonRisky);
  ClassificationMetrics m;
  m.precision = risky[0];
  m.recall = risky[1];
  m.f1_risky = risky[2];
  m.macro_f1 = 0.5 * (risky[2] + nonrisky[2]);
  return m;
}

namespace detail {

// Tie correction term: sum over equal-value groups of t*(t-1)/2.
inline double tie_term(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    double t = static_cast<double>(j - i);
    total += t * (t - 1.0) / 2.0;
    i = j;
  }
  return total;
}

// Strict inversion count (y_i > y_j for i < j) via merge sort.
inline std::size_t count_inversions(std::vector<double>& v, std::size_t lo,
                                    std::size_t hi, std::vector<double>& tmp) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::size_t inv = count_inversions(v, lo, mid, tmp) +
                    count_inversions(v, mid, hi, tmp);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      tmp[k++] = v[i++];
    } else {
      inv += mid - i;  // every remaining left element exceeds v[j]
      tmp[k++] = v[j++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return inv;
}

}  // namespace detail

// Kendall tau-b via Knight's algorithm: C - D from merge-sort inversion
// counting, tie terms from group counts. Returns nullopt when either side
// is entirely tied (the denominator vanishes).
inline std::optional<double> kendall_tau_b(const std::vector<double>& x,
                                           const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (y.size() != n)
    throw InputError("kendall_tau_b: length mismatch");
  if (n < 2) throw InputError("kendall_tau_b: need at least 2 observations");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  double n0 = 0.5 * double(n) * double(n - 1);
  double n1 = detail::tie_term(x);
  double n2 = detail::tie_term(y);
  if (n1 == n0 || n2 == n0) return std::nullopt;

  // joint ties
  double n3 = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]] && y[order[j]] == y[order[i]])
      ++j;
    double t = static_cast<double>(j - i);
    n3 += t * (t - 1.0) / 2.0;
    i = j;
  }

  // Within an equal-x group y is sorted ascending, so strict inversions in
  // the y sequence count exactly the discordant pairs.
  std::vector<double> ys(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
  std::vector<double> tmp(n);
  double discordant =
      static_cast<double>(detail::count_inversions(ys, 0, n, tmp));

  double both_ranked = n0 - n1 - n2 + n3;  // pairs untied on both sides
  double concordant = both_ranked - discordant;
  return (concordant - discordant) / std::sqrt((n0 - n1) * (n0 - n2));
}

// Average ranks: ties share the mean of the ranks they span (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    double mean_rank = 0.5 * (double(i + 1) + double(j));  // 1-based average
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean_rank;
    i = j;
  }
  return ranks;
}

// Spearman rho: Pearson correlation of average-ranked sequences. Returns
// nullopt when either side has zero rank variance.
inline std::optional<double> spearman_rho(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (y.size() != n)
    throw InputError("spearman_rho: length mismatch");
  if (n < 2) throw InputError("spearman_rho: need at least 2 observations");

  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / double(n);
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double dx = rx[k] - mx, dy = ry[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct MetricReport {
  int test_year = 0;
  std::uint64_t seed = 0;
  double f1_risky = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> kendall_tau_b;
  std::optional<double> spearman_rho;
  std::size_t n_test = 0;
};

}  // namespace xrisk
