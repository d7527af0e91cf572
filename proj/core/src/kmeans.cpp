#include <algorithm>
#include <cmath>
#include <vector>

#include "mplab/error.hpp"
#include "mplab/sparse.hpp"

namespace mplab {

std::size_t nearest_center(std::span<const double> centers, double v) {
  // First center >= v, then compare with its left neighbour.
  const auto it = std::lower_bound(centers.begin(), centers.end(), v);
  if (it == centers.begin()) return 0;
  if (it == centers.end()) return centers.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - centers.begin());
  const std::size_t lo = hi - 1;
  return std::fabs(v - centers[hi]) < std::fabs(v - centers[lo]) ? hi : lo;
}

namespace {

// Sorted values are assigned in contiguous runs; `first[j]` is the first
// index of cluster j, with first[k] = n.
std::vector<std::size_t> assign_runs(std::span<const double> xs, std::span<const double> c) {
  std::vector<std::size_t> first(c.size() + 1, xs.size());
  std::size_t j = 0;
  first[0] = 0;
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const std::size_t id = nearest_center(c, xs[q]);
    while (j < id) first[++j] = q;
  }
  while (j < c.size()) first[++j] = xs.size();
  return first;
}

double inertia(std::span<const double> xs, std::span<const double> c,
               const std::vector<std::size_t>& first) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t q = first[j]; q < first[j + 1]; ++q) {
      const double d = xs[q] - c[j];
      s += d * d;
    }
  return s;
}

}  // namespace

KMeans1d kmeans1d_detailed(std::span<const double> values, std::size_t k,
                           std::size_t max_iters, Rng& rng) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "kmeans1d: no values");
  if (k == 0 || k > kMaxClusters) {
    throw Error(ErrorCode::invalid_argument, "kmeans1d: k must lie in [1, 256]");
  }
  std::vector<double> xs(values.begin(), values.end());
  std::sort(xs.begin(), xs.end());
  std::vector<double> distinct;
  for (double v : xs)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);

  KMeans1d out;
  if (distinct.size() <= k) {
    out.centers = distinct;
    out.inertia.push_back(0.0);
    return out;
  }

  // k-means++ seeding.
  std::vector<double> c{xs[rng.below(xs.size())]};
  std::vector<double> d2(xs.size());
  for (std::size_t q = 0; q < xs.size(); ++q) d2[q] = (xs[q] - c[0]) * (xs[q] - c[0]);
  while (c.size() < k) {
    double total = 0.0;
    for (double w : d2) total += w;
    if (total == 0.0) break;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = xs.size() - 1;
    for (std::size_t q = 0; q < xs.size(); ++q) {
      acc += d2[q];
      if (acc > target && d2[q] > 0.0) {
        pick = q;
        break;
      }
    }
    while (d2[pick] == 0.0) --pick;  // rounding at the tail of the sum
    const double nc = xs[pick];
    c.push_back(nc);
    for (std::size_t q = 0; q < xs.size(); ++q) d2[q] = std::min(d2[q], (xs[q] - nc) * (xs[q] - nc));
  }
  std::sort(c.begin(), c.end());

  auto first = assign_runs(xs, c);
  out.inertia.push_back(inertia(xs, c, first));
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> next = c;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const std::size_t cnt = first[j + 1] - first[j];
      if (cnt == 0) continue;  // empty cluster keeps its center
      double s = 0.0;
      for (std::size_t q = first[j]; q < first[j + 1]; ++q) s += xs[q];
      next[j] = s / static_cast<double>(cnt);
    }
    std::sort(next.begin(), next.end());
    const bool moved = next != c;
    c = std::move(next);
    first = assign_runs(xs, c);
    out.inertia.push_back(inertia(xs, c, first));
    if (!moved) break;
  }
  out.centers = std::move(c);
  return out;
}

Vector kmeans1d(std::span<const double> values, std::size_t k, std::size_t max_iters, Rng& rng) {
  return kmeans1d_detailed(values, k, max_iters, rng).centers;
}

}  // namespace mplab
