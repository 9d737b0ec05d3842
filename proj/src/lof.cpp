#include "mcode/lof.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mcode/errors.hpp"
#include "parallel.hpp"

namespace mcode {

double euclidean_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

namespace {

struct Neighbor {
  std::size_t group;
  double distance;
};

}  // namespace

Vector lof_scores(const Matrix& points, std::size_t k, std::size_t threads) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  const std::size_t dim = static_cast<std::size_t>(points.cols());
  if (k == 0) throw ArgumentError("LOF needs k >= 1");
  if (n <= k) throw ArgumentError("LOF needs more than k = " + std::to_string(k) + " points, got " + std::to_string(n));
  if (!points.allFinite()) throw ArgumentError("LOF input contains non-finite values");

  // Collapse exact duplicates; groups are numbered by first occurrence.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row_less = [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double x = points(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
      const double y = points(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c));
      if (x != y) return x < y;
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), row_less);
  std::vector<std::size_t> raw_group(n);
  std::vector<std::size_t> first_of_raw;
  for (std::size_t i = 0; i < n; ++i) {
    const bool same = i > 0 && (points.row(static_cast<Eigen::Index>(order[i])) ==
                                points.row(static_cast<Eigen::Index>(order[i - 1])));
    if (!same) first_of_raw.push_back(order[i]);
    raw_group[order[i]] = first_of_raw.size() - 1;
  }
  std::vector<std::size_t> rank(first_of_raw.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return first_of_raw[a] < first_of_raw[b]; });
  std::vector<std::size_t> renumber(first_of_raw.size());
  for (std::size_t g = 0; g < rank.size(); ++g) renumber[rank[g]] = g;
  const std::size_t groups = first_of_raw.size();
  std::vector<std::size_t> group_of(n);
  std::vector<std::size_t> rep(groups);
  std::vector<std::size_t> count(groups, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = renumber[raw_group[i]];
    group_of[i] = g;
    if (count[g]++ == 0) rep[g] = i;
  }

  // k-distance and neighborhood of each group (neighbors listed by group, ascending).
  std::vector<double> kdist(groups);
  std::vector<std::vector<Neighbor>> hood(groups);
  detail::parallel_for(groups, threads, [&](std::size_t g) {
    const double* p = points.row(static_cast<Eigen::Index>(rep[g])).data();
    std::vector<Neighbor> all(groups);
    for (std::size_t h = 0; h < groups; ++h)
      all[h] = {h, h == g ? 0.0 : euclidean_distance(p, points.row(static_cast<Eigen::Index>(rep[h])).data(), dim)};
    std::vector<Neighbor> by_dist(all);
    std::sort(by_dist.begin(), by_dist.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance || (a.distance == b.distance && a.group < b.group); });
    std::size_t seen = 0;
    double kd = 0.0;
    for (const Neighbor& nb : by_dist) {
      const std::size_t others = nb.group == g ? count[g] - 1 : count[nb.group];
      if (others == 0) continue;
      seen += others;
      if (seen >= k) {
        kd = nb.distance;
        break;
      }
    }
    kdist[g] = kd;
    std::vector<Neighbor> mine;
    for (const Neighbor& nb : all) {
      const std::size_t others = nb.group == g ? count[g] - 1 : count[nb.group];
      if (others > 0 && nb.distance <= kd) mine.push_back(nb);
    }
    hood[g] = std::move(mine);
  });

  auto members = [&](std::size_t g, std::size_t nb) { return nb == g ? count[g] - 1 : count[nb]; };

  std::vector<double> lrd(groups);
  detail::parallel_for(groups, threads, [&](std::size_t g) {
    double total = 0.0;
    std::size_t size = 0;
    for (const Neighbor& nb : hood[g]) {
      const double reach = std::max(kdist[nb.group], nb.distance);
      for (std::size_t c = members(g, nb.group); c > 0; --c) total += reach;
      size += members(g, nb.group);
    }
    lrd[g] = total > 0.0 ? std::min(static_cast<double>(size) / total, kLrdCap) : kLrdCap;
  });

  std::vector<double> factor(groups);
  detail::parallel_for(groups, threads, [&](std::size_t g) {
    double total = 0.0;
    std::size_t size = 0;
    for (const Neighbor& nb : hood[g]) {
      const double ratio = (lrd[nb.group] == kLrdCap && lrd[g] == kLrdCap) ? 1.0 : lrd[nb.group] / lrd[g];
      for (std::size_t c = members(g, nb.group); c > 0; --c) total += ratio;
      size += members(g, nb.group);
    }
    factor[g] = total / static_cast<double>(size);
  });

  Vector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = factor[group_of[i]];
  return out;
}

}  // namespace mcode
