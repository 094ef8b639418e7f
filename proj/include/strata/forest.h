#ifndef STRATA_FOREST_H_
#define STRATA_FOREST_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "strata/lexicon.h"
#include "strata/random.h"

namespace strata::forest {

struct Sample {
  std::vector<double> features;
  Origin label = Origin::kSanskrit;
  std::string word;
  // Pair id; used to keep pair members on the same side of a split.
  int64_t group = 0;
};

struct Dataset {
  size_t feature_count = 0;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::array<size_t, 2> class_counts() const;
  // Throws DataError if feature vectors disagree with feature_count.
  void validate() const;

  Dataset subset(std::span<const size_t> rows) const;
  // Keeps the given columns, in the given order.
  Dataset project(std::span<const size_t> features) const;
  Dataset prefix(size_t n) const;
};

enum class Criterion { kGini, kEntropy };

std::string_view criterion_name(Criterion criterion);
std::optional<Criterion> parse_criterion(std::string_view name);

struct ForestParams {
  int n_estimators = 50;
  int max_depth = 5;
  Criterion criterion = Criterion::kGini;
  // 0 means floor(sqrt(feature_count)).
  int max_features = 0;
  int min_samples_split = 2;
  bool bootstrap = true;
  uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  size_t resolved_max_features(size_t feature_count) const;
};

nlohmann::json to_json(const ForestParams& params);
ForestParams params_from_json(const nlohmann::json& j);

// Gini: 1 - sum p_i^2. Entropy: -sum p_i log2 p_i. Throws DataError when
// all counts are zero.
double impurity(Criterion criterion, std::span<const uint64_t> class_counts);

struct Split {
  size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;

  bool operator==(const Split&) const = default;
};

// Decreases at or below this are treated as no gain.
inline constexpr double kMinImpurityDecrease = 1e-12;

// Exhaustive search over midpoints between consecutive distinct values of
// each candidate feature. A sample goes left when its value is <= the
// threshold. Maximizes parent impurity minus the size-weighted child
// impurities; ties go to the lower feature index, then the lower threshold.
// `rows` may repeat indices (bootstrap multiplicity).
std::optional<Split> best_split(const Dataset& data,
                                std::span<const uint32_t> rows,
                                std::span<const size_t> candidate_features,
                                Criterion criterion);

struct Node {
  // -1 for leaves.
  int32_t feature = -1;
  double threshold = 0.0;
  int32_t left = -1;
  int32_t right = -1;
  // Training samples (with bootstrap multiplicity) reaching the node, per
  // class; cover is their sum.
  std::array<uint64_t, 2> class_counts{0, 0};
  uint64_t cover = 0;
  Origin label = Origin::kSanskrit;

  bool is_leaf() const { return feature < 0; }
  // Training fraction of PERSO_ARABIC at this node.
  double value() const {
    return static_cast<double>(class_counts[1]) / static_cast<double>(cover);
  }
};

// Nodes in pre-order; the root is nodes[0].
struct Tree {
  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const {
    return leaf_for(x).value();
  }
  size_t depth() const;
};

// Grows a CART tree on `rows`. Stops at max_depth, purity, fewer than
// min_samples_split samples, or when no candidate split gains. Each
// internal node draws max_features candidate features without replacement
// from rng. Leaf labels are the majority class, SANSKRIT on ties.
Tree grow_tree(const Dataset& data, std::span<const uint32_t> rows,
               const ForestParams& params, Rng& rng);

struct Forest {
  ForestParams params;
  size_t feature_count = 0;
  std::vector<uint64_t> tree_seeds;
  std::vector<Tree> trees;
};

// Tree i is grown from Rng(split_mix(params.seed, i)) on a bootstrap
// resample of size n drawn from that same generator (or on all rows when
// bootstrap is off). Trees are independent, so `workers` does not change
// the result. Throws DataError for a single-class dataset.
Forest fit(const Dataset& data, const ForestParams& params, int workers = 1);

struct Prediction {
  Origin label = Origin::kSanskrit;
  // Mean PERSO_ARABIC leaf fraction over trees.
  double score = 0.0;
};

// The label is PERSO_ARABIC iff score > 0.5. Leaf values are summed in
// sorted order, so the score does not depend on tree order.
Prediction predict(const Forest& forest, std::span<const double> x);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<bool> correct;
  size_t errors = 0;
};

// Throws DataError for an empty test set.
Evaluation evaluate(const Forest& forest, const Dataset& test);

nlohmann::json to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace strata::forest

#endif  // STRATA_FOREST_H_
