#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "oracles.h"
#include "strata/error.h"
#include "strata/explain.h"
#include "strata/syngen.h"

namespace strata::explain {
namespace {

using forest::Dataset;
using forest::ForestParams;

constexpr auto kS = Origin::kSanskrit;
constexpr auto kP = Origin::kPersoArabic;

Dataset make(std::vector<std::pair<std::vector<double>, Origin>> rows) {
  Dataset d;
  d.feature_count = rows[0].first.size();
  for (size_t i = 0; i < rows.size(); ++i) {
    d.samples.push_back({rows[i].first, rows[i].second, "w" + std::to_string(i),
                         static_cast<int64_t>(i)});
  }
  return d;
}

std::vector<uint32_t> all_rows(const Dataset& d) {
  std::vector<uint32_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

ForestParams exhaustive(int depth) {
  ForestParams p;
  p.max_depth = depth;
  p.max_features = 1000;
  p.bootstrap = false;
  p.n_estimators = 1;
  return p;
}

TEST(TreeShap, SingleLeafHasZeroAttributions) {
  forest::Tree tree;
  tree.nodes.push_back(forest::Node{});
  tree.nodes[0].class_counts = {1, 2};
  tree.nodes[0].cover = 3;
  const auto e = tree_shap(tree, std::vector<double>{5, 5}, 2);
  EXPECT_EQ(e.phi, (std::vector<double>{0, 0}));
  EXPECT_DOUBLE_EQ(e.base_value, 2.0 / 3.0);
}

TEST(TreeShap, StumpClosedForm) {
  // Left leaf 3 Sanskrit, right leaf 1 Sanskrit + 1 Perso-Arabic.
  const auto d = make({{{0}, kS}, {{1}, kS}, {{2}, kS}, {{5}, kS}, {{5}, kP}});
  Rng rng(1);
  const auto tree = forest::grow_tree(d, all_rows(d), exhaustive(1), rng);
  ASSERT_EQ(tree.nodes.size(), 3u);
  const double base = 0.6 * 0.0 + 0.4 * 0.5;
  const auto left = tree_shap(tree, std::vector<double>{0}, 1);
  EXPECT_DOUBLE_EQ(left.base_value, base);
  EXPECT_DOUBLE_EQ(left.phi[0], 0.0 - base);
  const auto right = tree_shap(tree, std::vector<double>{9}, 1);
  EXPECT_DOUBLE_EQ(right.phi[0], 0.5 - base);
}

TEST(TreeShapProperty, MatchesCoalitionEnumeration) {
  Rng rng(31);
  std::uniform_int_distribution<size_t> dims(1, 4);
  std::uniform_int_distribution<size_t> size(4, 40);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 300; ++trial) {
    const size_t m = dims(rng);
    const auto d = oracle::random_dataset(rng, size(rng), m, trial % 3 == 0);
    auto p = exhaustive(1 + trial % 6);
    p.max_features = 1 + trial % m;
    const auto tree = forest::grow_tree(d, all_rows(d), p, rng);
    for (int probe = 0; probe < 5; ++probe) {
      std::vector<double> x(m);
      for (auto& v : x) v = probe == 0 ? d.samples[0].features[&v - x.data()] : normal(rng);
      const auto got = tree_shap(tree, x, m);
      const auto want = oracle::brute_force_shapley(tree, x, m);
      for (size_t i = 0; i < m; ++i) ASSERT_NEAR(got.phi[i], want[i], 1e-9) << "trial " << trial;
      EXPECT_NEAR(got.base_value, oracle::conditional_value(tree, 0, x, 0), 1e-12);
    }
  }
}

TEST(TreeShapProperty, LocalAccuracyAndDummyFeatures) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto d = oracle::random_dataset(rng, 60, 3, false);
    // Feature 3 is constant, so no tree can split on it.
    d.feature_count = 4;
    for (auto& s : d.samples) s.features.push_back(1.0);
    const auto tree = forest::grow_tree(d, all_rows(d), exhaustive(5), rng);
    for (const auto& s : d.samples) {
      const auto e = tree_shap(tree, s.features, 4);
      const double sum = std::accumulate(e.phi.begin(), e.phi.end(), e.base_value);
      EXPECT_NEAR(sum, tree.leaf_for(s.features).value(), 1e-12);
      EXPECT_EQ(e.phi[3], 0.0);
    }
  }
}

forest::Forest fitted(int trees, uint64_t seed) {
  syngen::PlantConfig c;
  c.n_samples = 200;
  c.dim = 8;
  c.informative_dim = 2;
  c.seed = seed;
  ForestParams p;
  p.n_estimators = trees;
  p.seed = seed;
  return forest::fit(syngen::plant_single_dimension(c), p);
}

TEST(ForestShap, LocalAccuracy) {
  const auto f = fitted(20, 3);
  std::vector<double> x = {0.3, -1, 0.5, 2, -0.2, 0.1, 0.7, -0.4};
  const auto e = forest_shap(f, x);
  const double sum = std::accumulate(e.phi.begin(), e.phi.end(), e.base_value);
  EXPECT_NEAR(sum, forest::predict(f, x).score, 1e-12);
}

TEST(ForestShap, IdenticalTreesMatchSingleTree) {
  auto f = fitted(1, 5);
  const auto tree = f.trees[0];
  f.trees.assign(7, tree);
  f.tree_seeds.assign(7, f.tree_seeds[0]);
  std::vector<double> x = {1, -1, 0.2, 0, 0, 3, -2, 0.5};
  const auto forest_e = forest_shap(f, x);
  const auto tree_e = tree_shap(tree, x, 8);
  for (size_t i = 0; i < 8; ++i) EXPECT_NEAR(forest_e.phi[i], tree_e.phi[i], 1e-15);
}

TEST(ForestShap, TreeOrderInvariant) {
  auto f = fitted(25, 6);
  std::vector<double> x = {1, -1, 0.2, 0, 0, 3, -2, 0.5};
  const auto a = forest_shap(f, x);
  Rng rng(2);
  std::shuffle(f.trees.begin(), f.trees.end(), rng);
  const auto b = forest_shap(f, x);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.base_value, b.base_value);
}

TEST(ShapSummary, PlantedDimensionRanksFirst) {
  const auto f = fitted(50, 7);
  syngen::PlantConfig c;
  c.n_samples = 100;
  c.dim = 8;
  c.informative_dim = 2;
  c.seed = 70;
  const auto summary = shap_summary(f, syngen::plant_single_dimension(c));
  ASSERT_EQ(summary.size(), 8u);
  EXPECT_EQ(summary[2].rank, 1u);
  for (size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(summary[i].dimension, i);
    EXPECT_LE(summary[i].min_phi, summary[i].max_phi);
    EXPECT_GE(summary[i].mean_abs_phi, 0.0);
    if (i != 2) EXPECT_LT(summary[i].mean_abs_phi, summary[2].mean_abs_phi);
  }
}

TEST(ShapSummary, WorkerIndependent) {
  const auto f = fitted(20, 8);
  syngen::PlantConfig c;
  c.n_samples = 50;
  c.dim = 8;
  c.informative_dim = 2;
  const auto data = syngen::plant_single_dimension(c);
  std::ostringstream a, b;
  write_summary_csv(shap_summary(f, data, 1), a);
  write_summary_csv(shap_summary(f, data, 3), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "dimension,mean_abs_phi,min_phi,max_phi,rank");
}

TEST(ShapSummary, ConstantModelTiesEveryRank) {
  forest::Forest f;
  f.feature_count = 3;
  forest::Tree leaf;
  leaf.nodes.push_back(forest::Node{});
  leaf.nodes[0].class_counts = {2, 2};
  leaf.nodes[0].cover = 4;
  f.trees = {leaf};
  f.tree_seeds = {0};
  const auto d = make({{{0, 0, 0}, kS}, {{1, 1, 1}, kP}});
  for (const auto& row : shap_summary(f, d)) {
    EXPECT_EQ(row.rank, 1u);
    EXPECT_EQ(row.mean_abs_phi, 0.0);
  }
}

}  // namespace
}  // namespace strata::explain
