#ifndef STRATA_CONFIG_H_
#define STRATA_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "strata/embed.h"
#include "strata/lab.h"
#include "strata/lexicon.h"
#include "strata/syngen.h"

namespace strata::app {

namespace fs = std::filesystem;

inline constexpr std::string_view kDefaultPreset = "default";
inline constexpr std::string_view kPaperPreset = "paper-replication";

struct Paths {
  std::vector<fs::path> corpus;
  std::vector<fs::path> control_corpus;
  fs::path lexicon;
  fs::path rules;
  fs::path model;
  fs::path control_model;
  fs::path misclass;
  fs::path control_misclass;
  fs::path out;
};

struct SweepConfig {
  std::vector<lab::SweepParameter> parameters;
  std::vector<int> n_estimators_grid;
  std::vector<int> max_depth_grid;
  int repetitions = 20;
};

struct AblateConfig {
  bool prefix = true;
  bool random = true;
  // Empty: 1, 2, 5, 10, 20, 50, 100, 200 up to and including the full
  // dimension.
  std::vector<size_t> grid;
  int repetitions = 20;
};

struct RunConfig {
  std::string preset{kDefaultPreset};
  Paths paths;
  uint64_t min_count = 10;
  bool fold_nuqta = false;
  lexicon::ValidationMode lexicon_mode = lexicon::ValidationMode::kLenient;
  uint64_t warn_below = 10;
  embed::EmbedConfig embed;
  lab::EvalProtocol eval;
  SweepConfig sweep;
  AblateConfig ablate;
  size_t exclude_k = 50;
  std::vector<size_t> overlap_k;
  syngen::SynthConfig syngen;
  bool charts = true;
  // Resolved document, echoed into manifests.
  nlohmann::json document;
};

// The full schema with the preset's values. Every accepted key appears
// here; anything else is rejected.
nlohmann::json default_document(std::string_view preset);

// Layers, later wins: preset defaults, `file_doc` (relative paths resolved
// against `file_dir`), then "section.key=value" overrides (values parsed
// as JSON, else taken as strings). Throws ConfigError on unknown keys,
// wrong types and invalid values.
RunConfig resolve_config(const nlohmann::json& file_doc, const fs::path& file_dir,
                         const std::vector<std::string>& overrides,
                         std::optional<std::string> preset = std::nullopt);

RunConfig load_config(const std::optional<fs::path>& config_file,
                      const std::vector<std::string>& overrides,
                      std::optional<std::string> preset = std::nullopt);

}  // namespace strata::app

#endif  // STRATA_CONFIG_H_
