#include "strata/forest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "strata/error.h"
#include "strata/parallel.h"

namespace strata::forest {

std::array<size_t, 2> Dataset::class_counts() const {
  std::array<size_t, 2> counts{0, 0};
  for (const auto& s : samples) ++counts[static_cast<size_t>(s.label)];
  return counts;
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (s.features.size() != feature_count) {
      throw DataError(fmt::format("sample '{}' has {} features, expected {}",
                                  s.word, s.features.size(), feature_count));
    }
  }
}

Dataset Dataset::subset(std::span<const size_t> rows) const {
  Dataset out;
  out.feature_count = feature_count;
  out.samples.reserve(rows.size());
  for (size_t r : rows) out.samples.push_back(samples.at(r));
  return out;
}

Dataset Dataset::project(std::span<const size_t> features) const {
  Dataset out;
  out.feature_count = features.size();
  out.samples.reserve(samples.size());
  for (const auto& s : samples) {
    Sample p{{}, s.label, s.word, s.group};
    p.features.reserve(features.size());
    for (size_t f : features) p.features.push_back(s.features.at(f));
    out.samples.push_back(std::move(p));
  }
  return out;
}

Dataset Dataset::prefix(size_t n) const {
  std::vector<size_t> features(std::min(n, feature_count));
  std::iota(features.begin(), features.end(), size_t{0});
  return project(features);
}

std::string_view criterion_name(Criterion criterion) {
  return criterion == Criterion::kGini ? "gini" : "entropy";
}

std::optional<Criterion> parse_criterion(std::string_view name) {
  if (name == "gini" || name == "GINI") return Criterion::kGini;
  if (name == "entropy" || name == "ENTROPY") return Criterion::kEntropy;
  return std::nullopt;
}

void ForestParams::validate() const {
  if (n_estimators < 1) throw ConfigError("forest.n_estimators must be >= 1");
  if (max_depth < 1) throw ConfigError("forest.max_depth must be >= 1");
  if (max_features < 0) throw ConfigError("forest.max_features must be >= 0");
  if (min_samples_split < 2) {
    throw ConfigError("forest.min_samples_split must be >= 2");
  }
}

size_t ForestParams::resolved_max_features(size_t feature_count) const {
  size_t k = max_features > 0
                 ? static_cast<size_t>(max_features)
                 : static_cast<size_t>(std::floor(std::sqrt(static_cast<double>(feature_count))));
  return std::clamp<size_t>(k, 1, std::max<size_t>(feature_count, 1));
}

nlohmann::json to_json(const ForestParams& params) {
  nlohmann::json j;
  j["n_estimators"] = params.n_estimators;
  j["max_depth"] = params.max_depth;
  j["criterion"] = criterion_name(params.criterion);
  if (params.max_features == 0) {
    j["max_features"] = "sqrt";
  } else {
    j["max_features"] = params.max_features;
  }
  j["min_samples_split"] = params.min_samples_split;
  j["bootstrap"] = params.bootstrap;
  j["seed"] = params.seed;
  return j;
}

ForestParams params_from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  auto criterion = parse_criterion(j.at("criterion").get<std::string>());
  if (!criterion) throw ConfigError("unknown split criterion");
  p.criterion = *criterion;
  const auto& mf = j.at("max_features");
  p.max_features = mf.is_string() ? 0 : mf.get<int>();
  if (mf.is_string() && mf.get<std::string>() != "sqrt") {
    throw ConfigError("max_features must be \"sqrt\" or an integer");
  }
  p.min_samples_split = j.at("min_samples_split").get<int>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  p.seed = j.at("seed").get<uint64_t>();
  return p;
}

double impurity(Criterion criterion, std::span<const uint64_t> class_counts) {
  uint64_t total = 0;
  for (uint64_t c : class_counts) total += c;
  if (total == 0) throw DataError("impurity of an empty node is undefined");
  const double n = static_cast<double>(total);
  if (criterion == Criterion::kGini) {
    double sum_sq = 0;
    for (uint64_t c : class_counts) {
      const double p = static_cast<double>(c) / n;
      sum_sq += p * p;
    }
    return 1.0 - sum_sq;
  }
  double h = 0;
  for (uint64_t c : class_counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

std::optional<Split> best_split(const Dataset& data,
                                std::span<const uint32_t> rows,
                                std::span<const size_t> candidate_features,
                                Criterion criterion) {
  if (rows.size() < 2) return std::nullopt;
  std::array<uint64_t, 2> parent{0, 0};
  for (uint32_t r : rows) ++parent[static_cast<size_t>(data.samples[r].label)];
  const double parent_impurity = impurity(criterion, parent);
  const double n = static_cast<double>(rows.size());

  std::vector<size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());

  std::optional<Split> best;
  std::vector<std::pair<double, uint8_t>> column(rows.size());
  for (size_t feature : features) {
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto& s = data.samples[rows[i]];
      column[i] = {s.features[feature], static_cast<uint8_t>(s.label)};
    }
    std::sort(column.begin(), column.end());
    std::array<uint64_t, 2> left{0, 0};
    for (size_t i = 0; i + 1 < column.size(); ++i) {
      ++left[column[i].second];
      if (!(column[i].first < column[i + 1].first)) continue;
      const std::array<uint64_t, 2> right{parent[0] - left[0], parent[1] - left[1]};
      const double n_left = static_cast<double>(i + 1);
      const double n_right = n - n_left;
      const double decrease =
          parent_impurity - (n_left / n * impurity(criterion, left) +
                             n_right / n * impurity(criterion, right));
      if (decrease > kMinImpurityDecrease &&
          (!best || decrease > best->impurity_decrease)) {
        best = Split{feature, std::midpoint(column[i].first, column[i + 1].first),
                     decrease};
      }
    }
  }
  return best;
}

const Node& Tree::leaf_for(std::span<const double> x) const {
  const Node* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[x[node->feature] <= node->threshold ? node->left : node->right];
  }
  return *node;
}

size_t Tree::depth() const {
  std::vector<size_t> depth(nodes.size(), 0);
  size_t deepest = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[nodes[i].left] = depth[i] + 1;
      depth[nodes[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, Rng& rng)
      : data_(data), params_(params), rng_(rng),
        max_features_(params.resolved_max_features(data.feature_count)),
        all_features_(data.feature_count) {
    std::iota(all_features_.begin(), all_features_.end(), size_t{0});
  }

  Tree build(std::vector<uint32_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int32_t grow(std::vector<uint32_t> rows, int depth) {
    Node node;
    for (uint32_t r : rows) ++node.class_counts[static_cast<size_t>(data_.samples[r].label)];
    node.cover = rows.size();
    node.label = node.class_counts[1] > node.class_counts[0] ? Origin::kPersoArabic
                                                             : Origin::kSanskrit;
    const auto index = static_cast<int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(node);

    const bool pure = node.class_counts[0] == 0 || node.class_counts[1] == 0;
    if (pure || depth >= params_.max_depth ||
        rows.size() < static_cast<size_t>(params_.min_samples_split)) {
      return index;
    }
    candidates_.clear();
    std::sample(all_features_.begin(), all_features_.end(),
                std::back_inserter(candidates_), max_features_, rng_);
    const auto split = best_split(data_, rows, candidates_, params_.criterion);
    if (!split) return index;

    std::vector<uint32_t> left;
    std::vector<uint32_t> right;
    for (uint32_t r : rows) {
      (data_.samples[r].features[split->feature] <= split->threshold ? left : right)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int32_t l = grow(std::move(left), depth + 1);
    const int32_t r = grow(std::move(right), depth + 1);
    auto& self = tree_.nodes[index];
    self.feature = static_cast<int32_t>(split->feature);
    self.threshold = split->threshold;
    self.left = l;
    self.right = r;
    return index;
  }

  const Dataset& data_;
  const ForestParams& params_;
  Rng& rng_;
  size_t max_features_;
  std::vector<size_t> all_features_;
  std::vector<size_t> candidates_;
  Tree tree_;
};

}  // namespace

Tree grow_tree(const Dataset& data, std::span<const uint32_t> rows,
               const ForestParams& params, Rng& rng) {
  if (rows.empty()) throw DataError("cannot grow a tree on zero samples");
  return TreeBuilder(data, params, rng).build({rows.begin(), rows.end()});
}

Forest fit(const Dataset& data, const ForestParams& params, int workers) {
  params.validate();
  data.validate();
  const auto counts = data.class_counts();
  if (counts[0] == 0 || counts[1] == 0) {
    throw DataError("training data must contain both classes");
  }
  Forest forest;
  forest.params = params;
  forest.feature_count = data.feature_count;
  const auto n_trees = static_cast<size_t>(params.n_estimators);
  forest.tree_seeds.resize(n_trees);
  forest.trees.resize(n_trees);
  const auto n = static_cast<uint32_t>(data.size());
  parallel_for(n_trees, workers, [&](size_t t) {
    const uint64_t seed = split_mix(params.seed, t);
    forest.tree_seeds[t] = seed;
    Rng rng(seed);
    std::vector<uint32_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<uint32_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), uint32_t{0});
    }
    forest.trees[t] = grow_tree(data, rows, params, rng);
  });
  return forest;
}

Prediction predict(const Forest& forest, std::span<const double> x) {
  std::vector<double> values;
  values.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) values.push_back(tree.predict_proba(x));
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  Prediction p;
  p.score = sum / static_cast<double>(values.size());
  p.label = p.score > 0.5 ? Origin::kPersoArabic : Origin::kSanskrit;
  return p;
}

Evaluation evaluate(const Forest& forest, const Dataset& test) {
  if (test.empty()) throw DataError("cannot evaluate on an empty test set");
  Evaluation eval;
  eval.correct.reserve(test.size());
  for (const auto& s : test.samples) {
    const bool ok = predict(forest, s.features).label == s.label;
    eval.correct.push_back(ok);
    if (!ok) ++eval.errors;
  }
  eval.accuracy = 1.0 - static_cast<double>(eval.errors) / static_cast<double>(test.size());
  return eval;
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int32_t index) {
  const Node& node = tree.nodes[index];
  nlohmann::json j;
  j["cover"] = node.cover;
  j["class_counts"] = node.class_counts;
  j["label"] = origin_name(node.label);
  if (!node.is_leaf()) {
    j["feature"] = node.feature;
    j["threshold"] = node.threshold;
    j["left"] = node_to_json(tree, node.left);
    j["right"] = node_to_json(tree, node.right);
  }
  return j;
}

int32_t node_from_json(const nlohmann::json& j, Tree& tree) {
  Node node;
  node.cover = j.at("cover").get<uint64_t>();
  node.class_counts = j.at("class_counts").get<std::array<uint64_t, 2>>();
  const auto label = parse_origin(j.at("label").get<std::string>());
  if (!label) throw DataError("forest file: bad node label");
  node.label = *label;
  if (node.cover != node.class_counts[0] + node.class_counts[1] || node.cover == 0) {
    throw DataError("forest file: class counts do not sum to cover");
  }
  const auto index = static_cast<int32_t>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (j.contains("feature")) {
    const auto feature = j.at("feature").get<int32_t>();
    const double threshold = j.at("threshold").get<double>();
    const int32_t l = node_from_json(j.at("left"), tree);
    const int32_t r = node_from_json(j.at("right"), tree);
    auto& self = tree.nodes[index];
    self.feature = feature;
    self.threshold = threshold;
    self.left = l;
    self.right = r;
  }
  return index;
}

}  // namespace

nlohmann::json to_json(const Forest& forest) {
  nlohmann::json j;
  j["params"] = to_json(forest.params);
  j["feature_count"] = forest.feature_count;
  j["tree_seeds"] = forest.tree_seeds;
  j["trees"] = nlohmann::json::array();
  for (const auto& tree : forest.trees) j["trees"].push_back(node_to_json(tree, 0));
  return j;
}

Forest forest_from_json(const nlohmann::json& j) {
  try {
    Forest forest;
    forest.params = params_from_json(j.at("params"));
    forest.feature_count = j.at("feature_count").get<size_t>();
    forest.tree_seeds = j.at("tree_seeds").get<std::vector<uint64_t>>();
    for (const auto& t : j.at("trees")) {
      Tree tree;
      node_from_json(t, tree);
      for (const auto& node : tree.nodes) {
        if (!node.is_leaf() && (node.feature < 0 ||
                                static_cast<size_t>(node.feature) >= forest.feature_count)) {
          throw DataError("forest file: split feature out of range");
        }
      }
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.size() != static_cast<size_t>(forest.params.n_estimators)) {
      throw DataError("forest file: tree count differs from n_estimators");
    }
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("forest file: {}", e.what()));
  }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << to_json(forest).dump() << '\n';
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("forest file {}: {}", path.string(), e.what()));
  }
  return forest_from_json(j);
}

}  // namespace strata::forest
