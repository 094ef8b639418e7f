#include "strata/explain.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "strata/error.h"
#include "strata/parallel.h"

namespace strata::explain {

namespace {

// One element of the feature path from the root to the current node.
struct PathElement {
  int32_t feature = -1;
  // Fraction of cover flowing this way when the feature is absent.
  double zero_fraction = 0.0;
  // 1 if x follows this way when the feature is present, else 0.
  double one_fraction = 0.0;
  // Permutation weight of subsets of the preceding elements.
  double weight = 0.0;
};

using Path = std::vector<PathElement>;

void extend(Path& path, double zero_fraction, double one_fraction,
            int32_t feature) {
  const size_t depth = path.size();
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  for (size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) /
                          static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) /
                     static_cast<double>(depth + 1);
  }
}

void unwind(Path& path, size_t index) {
  const size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  for (size_t i = depth; i-- > 0;) {
    if (one != 0) {
      const double w = path[i].weight;
      path[i].weight = next * static_cast<double>(depth + 1) /
                       (static_cast<double>(i + 1) * one);
      next = w - path[i].weight * zero * static_cast<double>(depth - i) /
                     static_cast<double>(depth + 1);
    } else {
      path[i].weight = path[i].weight * static_cast<double>(depth + 1) /
                       (zero * static_cast<double>(depth - i));
    }
  }
  for (size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
  path.pop_back();
}

// Total permutation weight of the path with element `index` removed.
double unwound_sum(const Path& path, size_t index) {
  const size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  double total = 0;
  for (size_t i = depth; i-- > 0;) {
    if (one != 0) {
      const double tmp = next * static_cast<double>(depth + 1) /
                         (static_cast<double>(i + 1) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * static_cast<double>(depth - i) /
                                  static_cast<double>(depth + 1);
    } else {
      total += path[i].weight * static_cast<double>(depth + 1) /
               (zero * static_cast<double>(depth - i));
    }
  }
  return total;
}

void recurse(const forest::Tree& tree, int32_t node_index,
             std::span<const double> x, Path path, double zero_fraction,
             double one_fraction, int32_t feature, std::vector<double>& phi) {
  extend(path, zero_fraction, one_fraction, feature);
  const auto& node = tree.nodes[node_index];
  if (node.is_leaf()) {
    const double value = node.value();
    for (size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_sum(path, i);
      phi[path[i].feature] +=
          w * (path[i].one_fraction - path[i].zero_fraction) * value;
    }
    return;
  }
  const bool goes_left = x[node.feature] <= node.threshold;
  const int32_t hot = goes_left ? node.left : node.right;
  const int32_t cold = goes_left ? node.right : node.left;

  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  for (size_t i = 1; i < path.size(); ++i) {
    if (path[i].feature == node.feature) {
      incoming_zero = path[i].zero_fraction;
      incoming_one = path[i].one_fraction;
      unwind(path, i);
      break;
    }
  }
  const double cover = static_cast<double>(node.cover);
  recurse(tree, hot, x, path,
          incoming_zero * static_cast<double>(tree.nodes[hot].cover) / cover,
          incoming_one, node.feature, phi);
  recurse(tree, cold, x, std::move(path),
          incoming_zero * static_cast<double>(tree.nodes[cold].cover) / cover,
          0.0, node.feature, phi);
}

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  return sum;
}

}  // namespace

ShapExplanation tree_shap(const forest::Tree& tree, std::span<const double> x,
                          size_t feature_count) {
  if (tree.nodes.empty()) throw DataError("cannot explain an empty tree");
  for (const auto& node : tree.nodes) {
    if (node.cover == 0 || node.class_counts[0] + node.class_counts[1] != node.cover) {
      throw DataError("tree_shap needs cover counts on every node");
    }
    if (!node.is_leaf() && static_cast<size_t>(node.feature) >= feature_count) {
      throw DataError("tree splits on a feature outside the explained range");
    }
  }
  if (x.size() < feature_count) throw DataError("sample has too few features");
  ShapExplanation out;
  out.phi.assign(feature_count, 0.0);
  out.base_value = tree.nodes.front().value();
  recurse(tree, 0, x, {}, 1.0, 1.0, -1, out.phi);
  return out;
}

ShapExplanation forest_shap(const forest::Forest& forest,
                            std::span<const double> x) {
  if (forest.trees.empty()) throw DataError("cannot explain an empty forest");
  const size_t dim = forest.feature_count;
  const size_t n_trees = forest.trees.size();
  std::vector<std::vector<double>> per_feature(dim, std::vector<double>(n_trees));
  std::vector<double> bases(n_trees);
  for (size_t t = 0; t < n_trees; ++t) {
    auto e = tree_shap(forest.trees[t], x, dim);
    bases[t] = e.base_value;
    for (size_t f = 0; f < dim; ++f) per_feature[f][t] = e.phi[f];
  }
  ShapExplanation out;
  const double n = static_cast<double>(n_trees);
  out.base_value = sorted_sum(bases) / n;
  out.phi.resize(dim);
  for (size_t f = 0; f < dim; ++f) out.phi[f] = sorted_sum(per_feature[f]) / n;
  return out;
}

std::vector<DimensionSummary> shap_summary(const forest::Forest& forest,
                                           const forest::Dataset& data,
                                           int workers) {
  if (data.empty()) throw DataError("shap_summary needs at least one sample");
  const size_t dim = forest.feature_count;
  std::vector<std::vector<double>> phis(data.size());
  parallel_for(data.size(), workers, [&](size_t i) {
    phis[i] = forest_shap(forest, data.samples[i].features).phi;
  });

  std::vector<DimensionSummary> summary(dim);
  for (size_t f = 0; f < dim; ++f) {
    auto& s = summary[f];
    s.dimension = f;
    s.min_phi = phis.front()[f];
    s.max_phi = phis.front()[f];
    double sum_abs = 0;
    for (const auto& phi : phis) {
      sum_abs += std::abs(phi[f]);
      s.min_phi = std::min(s.min_phi, phi[f]);
      s.max_phi = std::max(s.max_phi, phi[f]);
    }
    s.mean_abs_phi = sum_abs / static_cast<double>(phis.size());
  }
  std::vector<size_t> order(dim);
  for (size_t f = 0; f < dim; ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return summary[a].mean_abs_phi > summary[b].mean_abs_phi;
  });
  for (size_t pos = 0; pos < dim; ++pos) {
    const bool tied = pos > 0 && summary[order[pos]].mean_abs_phi ==
                                     summary[order[pos - 1]].mean_abs_phi;
    summary[order[pos]].rank = tied ? summary[order[pos - 1]].rank : pos + 1;
  }
  return summary;
}

void write_summary_csv(const std::vector<DimensionSummary>& summary,
                       std::ostream& out) {
  out << "dimension,mean_abs_phi,min_phi,max_phi,rank\n";
  for (const auto& s : summary) {
    out << fmt::format("{},{},{},{},{}\n", s.dimension, s.mean_abs_phi,
                       s.min_phi, s.max_phi, s.rank);
  }
}

}  // namespace strata::explain
