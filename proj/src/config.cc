#include "strata/config.h"

#include <fstream>

#include <fmt/format.h>

#include "strata/error.h"

namespace strata::app {

using nlohmann::json;

json default_document(std::string_view preset) {
  const bool paper = preset == kPaperPreset;
  if (!paper && preset != kDefaultPreset) {
    throw ConfigError(fmt::format("unknown preset '{}' (expected '{}' or '{}')",
                                  preset, kDefaultPreset, kPaperPreset));
  }
  std::vector<int> n_estimators_grid = {1, 5, 10, 25, 50, 100};
  std::vector<int> max_depth_grid = {1, 2, 3, 5, 8};
  std::vector<int> ablate_grid;
  if (paper) {
    n_estimators_grid.clear();
    for (int n = 1; n <= 200; ++n) n_estimators_grid.push_back(n);
    max_depth_grid.clear();
    for (int d = 1; d <= 20; ++d) max_depth_grid.push_back(d);
    for (int n = 1; n <= 200; ++n) ablate_grid.push_back(n);
  }
  const embed::EmbedConfig e;
  const syngen::SynthConfig s;
  return json{
      {"preset", std::string(preset)},
      {"paths",
       {{"corpus", json::array()},
        {"control_corpus", json::array()},
        {"lexicon", ""},
        {"rules", ""},
        {"model", ""},
        {"control_model", ""},
        {"misclass", ""},
        {"control_misclass", ""},
        {"out", "run"}}},
      {"textnorm", {{"min_count", 10}, {"fold_nuqta", false}}},
      {"lexicon", {{"mode", "lenient"}, {"warn_below", 10}}},
      {"embed",
       {{"dim", e.dim},
        {"window", e.window},
        {"negatives", e.negatives},
        {"epochs", e.epochs},
        {"initial_step_size", e.initial_step_size},
        {"min_step_size", e.min_step_size},
        {"subsample_threshold", e.subsample_threshold},
        {"noise_power", e.noise_power},
        {"seed", e.seed},
        {"workers", 1}}},
      {"forest",
       {{"n_estimators", 50},
        {"max_depth", 5},
        {"criterion", "gini"},
        {"max_features", "sqrt"},
        {"min_samples_split", 2},
        {"bootstrap", true}}},
      {"eval",
       {{"iterations", paper ? 100000 : 1000},
        {"test_fraction", 0.2},
        {"split_unit", "word"},
        {"seed", 0},
        {"workers", 1}}},
      {"sweep",
       {{"parameters", {"n_estimators", "max_depth", "criterion"}},
        {"n_estimators_grid", n_estimators_grid},
        {"max_depth_grid", max_depth_grid},
        {"repetitions", paper ? 100 : 20}}},
      {"ablate",
       {{"modes", {"prefix", "random"}},
        {"grid", ablate_grid},
        {"repetitions", paper ? 100 : 20}}},
      {"exclude", {{"k", 50}}},
      {"overlap", {{"k_list", {10, 20, 30}}}},
      {"syngen",
       {{"n_pairs", s.n_pairs},
        {"n_context_words", s.n_context_words},
        {"separation", s.separation},
        {"sentences_per_word", s.sentences_per_word},
        {"sentence_length", s.sentence_length},
        {"zipf_exponent", s.zipf_exponent},
        {"topic_words", s.topic_words},
        {"common_words", s.common_words},
        {"weak_fraction", s.weak_fraction},
        {"weak_separation", s.weak_separation},
        {"devanagari", s.devanagari},
        {"seed", s.seed}}},
      {"charts", {{"enabled", true}}},
  };
}

namespace {

bool compatible(const json& schema, const json& value) {
  if (schema.is_number()) return value.is_number();
  if (schema.is_string() && value.is_number()) return false;
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_array()) return value.is_array() || value.is_string();
  if (schema.is_string()) return value.is_string() || value.is_number();
  return schema.type() == value.type();
}

// Overlays `layer` onto `base`; keys must already exist in `base`.
void overlay(json& base, const json& layer, const std::string& prefix) {
  if (!layer.is_object()) {
    throw ConfigError(fmt::format("config '{}' must be an object",
                                  prefix.empty() ? "<root>" : prefix));
  }
  for (const auto& [key, value] : layer.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", name));
    auto& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, name);
    } else {
      // forest.max_features accepts "sqrt" or an integer.
      const bool max_features = name == "forest.max_features" && value.is_number_integer();
      if (!max_features && !compatible(slot, value)) {
        throw ConfigError(fmt::format("config '{}' has the wrong type", name));
      }
      slot = slot.is_array() && value.is_string() ? json::array({value}) : value;
    }
  }
}

void resolve_paths(json& paths, const fs::path& dir) {
  for (auto& [key, value] : paths.items()) {
    auto resolve = [&](json& v) {
      const std::string s = v.get<std::string>();
      if (!s.empty() && fs::path(s).is_relative()) v = (dir / s).lexically_normal().string();
    };
    if (value.is_array()) {
      for (auto& v : value) resolve(v);
    } else if (value.is_string()) {
      resolve(value);
    }
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

template <typename T>
T get(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config '{}.{}' has an invalid value", section, key));
  }
}

template <typename T>
T positive(const json& doc, const char* section, const char* key) {
  const auto v = get<int64_t>(doc, section, key);
  if (v < 0) throw ConfigError(fmt::format("config '{}.{}' must be >= 0", section, key));
  return static_cast<T>(v);
}

fs::path path_of(const json& doc, const char* key) {
  return fs::path(get<std::string>(doc, "paths", key));
}

std::vector<fs::path> paths_of(const json& doc, const char* key) {
  std::vector<fs::path> out;
  for (const auto& s : get<std::vector<std::string>>(doc, "paths", key)) out.emplace_back(s);
  return out;
}

RunConfig typed(const json& doc) {
  RunConfig c;
  c.document = doc;
  c.preset = doc.at("preset").get<std::string>();
  c.paths.corpus = paths_of(doc, "corpus");
  c.paths.control_corpus = paths_of(doc, "control_corpus");
  c.paths.lexicon = path_of(doc, "lexicon");
  c.paths.rules = path_of(doc, "rules");
  c.paths.model = path_of(doc, "model");
  c.paths.control_model = path_of(doc, "control_model");
  c.paths.misclass = path_of(doc, "misclass");
  c.paths.control_misclass = path_of(doc, "control_misclass");
  c.paths.out = path_of(doc, "out");
  if (c.paths.out.empty()) throw ConfigError("paths.out must not be empty");

  c.min_count = positive<uint64_t>(doc, "textnorm", "min_count");
  if (c.min_count < 1) throw ConfigError("textnorm.min_count must be >= 1");
  c.fold_nuqta = get<bool>(doc, "textnorm", "fold_nuqta");
  const auto mode = get<std::string>(doc, "lexicon", "mode");
  if (mode == "strict") {
    c.lexicon_mode = lexicon::ValidationMode::kStrict;
  } else if (mode == "lenient") {
    c.lexicon_mode = lexicon::ValidationMode::kLenient;
  } else {
    throw ConfigError("lexicon.mode must be 'strict' or 'lenient'");
  }
  c.warn_below = positive<uint64_t>(doc, "lexicon", "warn_below");

  auto& e = c.embed;
  e.dim = get<int>(doc, "embed", "dim");
  e.window = get<int>(doc, "embed", "window");
  e.negatives = get<int>(doc, "embed", "negatives");
  e.epochs = get<int>(doc, "embed", "epochs");
  e.initial_step_size = get<double>(doc, "embed", "initial_step_size");
  e.min_step_size = get<double>(doc, "embed", "min_step_size");
  e.subsample_threshold = get<double>(doc, "embed", "subsample_threshold");
  e.noise_power = get<double>(doc, "embed", "noise_power");
  e.seed = positive<uint64_t>(doc, "embed", "seed");
  e.workers = get<int>(doc, "embed", "workers");
  e.validate();

  auto& f = c.eval.forest;
  f.n_estimators = get<int>(doc, "forest", "n_estimators");
  f.max_depth = get<int>(doc, "forest", "max_depth");
  const auto criterion = forest::parse_criterion(get<std::string>(doc, "forest", "criterion"));
  if (!criterion) throw ConfigError("forest.criterion must be 'gini' or 'entropy'");
  f.criterion = *criterion;
  const auto& mf = doc.at("forest").at("max_features");
  if (mf.is_string()) {
    if (mf.get<std::string>() != "sqrt") {
      throw ConfigError("forest.max_features must be \"sqrt\" or an integer");
    }
    f.max_features = 0;
  } else {
    f.max_features = mf.get<int>();
    if (f.max_features < 1) throw ConfigError("forest.max_features must be >= 1");
  }
  f.min_samples_split = get<int>(doc, "forest", "min_samples_split");
  f.bootstrap = get<bool>(doc, "forest", "bootstrap");

  c.eval.iterations = get<int>(doc, "eval", "iterations");
  c.eval.test_fraction = get<double>(doc, "eval", "test_fraction");
  const auto unit = lab::parse_split_unit(get<std::string>(doc, "eval", "split_unit"));
  if (!unit) throw ConfigError("eval.split_unit must be 'word' or 'pair'");
  c.eval.split_unit = *unit;
  c.eval.master_seed = positive<uint64_t>(doc, "eval", "seed");
  c.eval.workers = get<int>(doc, "eval", "workers");
  c.eval.validate();

  for (const auto& name : get<std::vector<std::string>>(doc, "sweep", "parameters")) {
    const auto p = lab::parse_sweep_parameter(name);
    if (!p) throw ConfigError(fmt::format("unknown sweep parameter '{}'", name));
    c.sweep.parameters.push_back(*p);
  }
  c.sweep.n_estimators_grid = get<std::vector<int>>(doc, "sweep", "n_estimators_grid");
  c.sweep.max_depth_grid = get<std::vector<int>>(doc, "sweep", "max_depth_grid");
  c.sweep.repetitions = get<int>(doc, "sweep", "repetitions");
  if (c.sweep.repetitions < 1) throw ConfigError("sweep.repetitions must be >= 1");
  for (int v : c.sweep.n_estimators_grid) {
    if (v < 1) throw ConfigError("sweep.n_estimators_grid values must be >= 1");
  }
  for (int v : c.sweep.max_depth_grid) {
    if (v < 1) throw ConfigError("sweep.max_depth_grid values must be >= 1");
  }

  c.ablate.prefix = false;
  c.ablate.random = false;
  for (const auto& m : get<std::vector<std::string>>(doc, "ablate", "modes")) {
    if (m == "prefix") {
      c.ablate.prefix = true;
    } else if (m == "random") {
      c.ablate.random = true;
    } else {
      throw ConfigError(fmt::format("unknown ablation mode '{}'", m));
    }
  }
  for (int n : get<std::vector<int>>(doc, "ablate", "grid")) {
    if (n < 1) throw ConfigError("ablate.grid values must be >= 1");
    c.ablate.grid.push_back(static_cast<size_t>(n));
  }
  c.ablate.repetitions = get<int>(doc, "ablate", "repetitions");
  if (c.ablate.repetitions < 1) throw ConfigError("ablate.repetitions must be >= 1");

  c.exclude_k = positive<size_t>(doc, "exclude", "k");
  for (int k : get<std::vector<int>>(doc, "overlap", "k_list")) {
    if (k < 1) throw ConfigError("overlap.k_list values must be >= 1");
    c.overlap_k.push_back(static_cast<size_t>(k));
  }

  auto& s = c.syngen;
  s.n_pairs = get<int>(doc, "syngen", "n_pairs");
  s.n_context_words = get<int>(doc, "syngen", "n_context_words");
  s.separation = get<double>(doc, "syngen", "separation");
  s.sentences_per_word = get<int>(doc, "syngen", "sentences_per_word");
  s.sentence_length = get<int>(doc, "syngen", "sentence_length");
  s.zipf_exponent = get<double>(doc, "syngen", "zipf_exponent");
  s.topic_words = get<int>(doc, "syngen", "topic_words");
  s.common_words = get<int>(doc, "syngen", "common_words");
  s.weak_fraction = get<double>(doc, "syngen", "weak_fraction");
  s.weak_separation = get<double>(doc, "syngen", "weak_separation");
  s.devanagari = get<bool>(doc, "syngen", "devanagari");
  s.seed = positive<uint64_t>(doc, "syngen", "seed");
  s.validate();

  c.charts = get<bool>(doc, "charts", "enabled");
  return c;
}

}  // namespace

RunConfig resolve_config(const json& file_doc, const fs::path& file_dir,
                         const std::vector<std::string>& overrides,
                         std::optional<std::string> preset) {
  if (!file_doc.is_null() && !file_doc.is_object()) {
    throw ConfigError("config file must contain a JSON object");
  }
  if (!preset) {
    preset = std::string(kDefaultPreset);
    if (file_doc.is_object() && file_doc.contains("preset")) {
      if (!file_doc["preset"].is_string()) throw ConfigError("config 'preset' must be a string");
      preset = file_doc["preset"].get<std::string>();
    }
  }
  json doc = default_document(*preset);
  if (file_doc.is_object()) {
    json layer = file_doc;
    if (layer.contains("paths") && layer["paths"].is_object()) {
      // Type errors are reported by overlay(); only resolve well-typed paths.
      json checked = doc["paths"];
      overlay(checked, layer["paths"], "paths");
      resolve_paths(layer["paths"], file_dir);
    }
    overlay(doc, layer, "");
  }
  for (const auto& item : overrides) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(fmt::format("override '{}' is not KEY=VALUE", item));
    }
    const std::string key = item.substr(0, eq);
    json nested = parse_override_value(item.substr(eq + 1));
    std::vector<std::string> parts;
    for (size_t start = 0;;) {
      const size_t dot = key.find('.', start);
      parts.push_back(key.substr(start, dot == std::string::npos ? dot : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (parts.front() == "paths") {
      auto absolutize = [](json& v) {
        if (v.is_string() && !v.get<std::string>().empty()) {
          v = fs::absolute(v.get<std::string>()).lexically_normal().string();
        }
      };
      if (nested.is_array()) {
        for (auto& v : nested) absolutize(v);
      } else {
        absolutize(nested);
      }
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) nested = json{{*it, nested}};
    overlay(doc, nested, "");
  }
  if (doc["preset"].get<std::string>() != *preset) {
    throw ConfigError("the preset can only be chosen with --preset or the file's 'preset' key");
  }
  // Remaining relative defaults (paths.out) resolve against the working
  // directory.
  resolve_paths(doc["paths"], fs::current_path());
  return typed(doc);
}

RunConfig load_config(const std::optional<fs::path>& config_file,
                      const std::vector<std::string>& overrides,
                      std::optional<std::string> preset) {
  json file_doc;
  fs::path dir = fs::current_path();
  if (config_file) {
    std::ifstream in(*config_file, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open config {}", config_file->string()));
    try {
      in >> file_doc;
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("config {}: {}", config_file->string(), e.what()));
    }
    dir = fs::absolute(*config_file).parent_path();
  }
  return resolve_config(file_doc, dir, overrides, std::move(preset));
}

}  // namespace strata::app
