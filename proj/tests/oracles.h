#ifndef STRATA_TESTS_ORACLES_H_
#define STRATA_TESTS_ORACLES_H_

// Slow reference implementations used as test oracles.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "strata/forest.h"
#include "strata/random.h"

namespace strata::oracle {

inline double impurity(forest::Criterion criterion, uint64_t a, uint64_t b) {
  const double n = static_cast<double>(a + b);
  const double pa = static_cast<double>(a) / n;
  const double pb = static_cast<double>(b) / n;
  if (criterion == forest::Criterion::kGini) {
    double sum_sq = 0;
    sum_sq += pa * pa;
    sum_sq += pb * pb;
    return 1.0 - sum_sq;
  }
  double h = 0;
  if (a > 0) h -= pa * std::log2(pa);
  if (b > 0) h -= pb * std::log2(pb);
  return h;
}

// Tries every feature and every midpoint between distinct values, counting
// both sides from scratch for each candidate.
inline std::optional<forest::Split> brute_force_split(const forest::Dataset& data,
                                                      const std::vector<uint32_t>& rows,
                                                      std::vector<size_t> features,
                                                      forest::Criterion criterion) {
  if (rows.size() < 2) return std::nullopt;
  std::sort(features.begin(), features.end());
  uint64_t pa = 0, pb = 0;
  for (uint32_t r : rows) (data.samples[r].label == Origin::kSanskrit ? pa : pb)++;
  const double parent = impurity(criterion, pa, pb);
  const double n = static_cast<double>(rows.size());
  std::optional<forest::Split> best;
  for (size_t f : features) {
    std::vector<double> values;
    for (uint32_t r : rows) values.push_back(data.samples[r].features[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = (values[i] + values[i + 1]) / 2;
      uint64_t la = 0, lb = 0, ra = 0, rb = 0;
      for (uint32_t r : rows) {
        const bool left = data.samples[r].features[f] <= t;
        const bool a = data.samples[r].label == Origin::kSanskrit;
        (left ? (a ? la : lb) : (a ? ra : rb))++;
      }
      const double nl = static_cast<double>(la + lb);
      const double nr = static_cast<double>(ra + rb);
      const double decrease =
          parent - (nl / n * impurity(criterion, la, lb) + nr / n * impurity(criterion, ra, rb));
      if (decrease > forest::kMinImpurityDecrease && (!best || decrease > best->impurity_decrease)) {
        best = forest::Split{f, t, decrease};
      }
    }
  }
  return best;
}

// E[f(x) | x_S] under the path-dependent (cover-weighted) model.
inline double conditional_value(const forest::Tree& tree, size_t node, const std::vector<double>& x,
                                unsigned mask) {
  const auto& nd = tree.nodes[node];
  if (nd.is_leaf()) return nd.value();
  if (mask & (1u << nd.feature)) {
    return conditional_value(tree, x[nd.feature] <= nd.threshold ? nd.left : nd.right, x, mask);
  }
  const auto& l = tree.nodes[nd.left];
  const auto& r = tree.nodes[nd.right];
  const double c = static_cast<double>(nd.cover);
  return static_cast<double>(l.cover) / c * conditional_value(tree, nd.left, x, mask) +
         static_cast<double>(r.cover) / c * conditional_value(tree, nd.right, x, mask);
}

// Shapley values by enumerating every coalition of the `m` features.
inline std::vector<double> brute_force_shapley(const forest::Tree& tree,
                                               const std::vector<double>& x, size_t m) {
  std::vector<double> factorial(m + 1, 1.0);
  for (size_t i = 1; i <= m; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> phi(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    for (unsigned s = 0; s < (1u << m); ++s) {
      if (s & (1u << i)) continue;
      const size_t size = static_cast<size_t>(__builtin_popcount(s));
      const double weight = factorial[size] * factorial[m - size - 1] / factorial[m];
      phi[i] += weight * (conditional_value(tree, 0, x, s | (1u << i)) -
                          conditional_value(tree, 0, x, s));
    }
  }
  return phi;
}

// Small random dataset; coarse values make ties between samples common.
inline forest::Dataset random_dataset(Rng& rng, size_t n, size_t features, bool coarse) {
  std::uniform_int_distribution<int> level(0, 3);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  forest::Dataset d;
  d.feature_count = features;
  for (size_t i = 0; i < n; ++i) {
    forest::Sample s;
    for (size_t f = 0; f < features; ++f) {
      s.features.push_back(coarse ? static_cast<double>(level(rng)) * 0.5 : normal(rng));
    }
    s.label = coin(rng) ? Origin::kPersoArabic : Origin::kSanskrit;
    s.word = "w" + std::to_string(i);
    s.group = static_cast<int64_t>(i / 2);
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace strata::oracle

#endif  // STRATA_TESTS_ORACLES_H_
