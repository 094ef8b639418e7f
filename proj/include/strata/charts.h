#ifndef STRATA_CHARTS_H_
#define STRATA_CHARTS_H_

#include <filesystem>
#include <vector>

namespace strata::app {

// Renders each recognized result CSV in `run_dir` as a static SVG with the
// same base name: bar charts for misclassification rankings (colored by
// origin), line charts with +-1 std bands for sweeps and ablations, a
// heatmap per correlation panel, and range bars for SHAP summaries. Output
// depends only on the CSV contents. Returns the files written, in name
// order; unrecognized CSVs are skipped.
std::vector<std::filesystem::path> emit_charts(const std::filesystem::path& run_dir);

}  // namespace strata::app

#endif  // STRATA_CHARTS_H_
