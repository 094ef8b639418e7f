#ifndef STRATA_EXPLAIN_H_
#define STRATA_EXPLAIN_H_

#include <iosfwd>
#include <span>
#include <vector>

#include "strata/forest.h"

namespace strata::explain {

// Attributions for the PERSO_ARABIC score. Local accuracy:
// base_value + sum(phi) equals the explained model output.
struct ShapExplanation {
  std::vector<double> phi;
  double base_value = 0.0;
};

// Path-dependent TreeSHAP. Conditional expectations over absent features
// are estimated from node covers, so the base value is the cover-weighted
// mean leaf value. Throws DataError for a tree without cover counts.
ShapExplanation tree_shap(const forest::Tree& tree, std::span<const double> x,
                          size_t feature_count);

// Per-tree explanations averaged over the forest. Each average is summed in
// sorted order, so the result does not depend on tree order.
ShapExplanation forest_shap(const forest::Forest& forest,
                            std::span<const double> x);

struct DimensionSummary {
  size_t dimension = 0;
  double mean_abs_phi = 0.0;
  double min_phi = 0.0;
  double max_phi = 0.0;
  // 1 = largest mean |phi|; equal values share the smaller rank.
  size_t rank = 1;
};

// Dispersion of signed attributions across `data`, one row per dimension in
// dimension order.
std::vector<DimensionSummary> shap_summary(const forest::Forest& forest,
                                           const forest::Dataset& data,
                                           int workers = 1);

// "dimension,mean_abs_phi,min_phi,max_phi,rank"
void write_summary_csv(const std::vector<DimensionSummary>& summary,
                       std::ostream& out);

}  // namespace strata::explain

#endif  // STRATA_EXPLAIN_H_
