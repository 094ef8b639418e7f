#include "strata/app.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "strata/charts.h"
#include "strata/csv.h"
#include "strata/error.h"
#include "strata/explain.h"
#include "strata/lab.h"
#include "strata/syngen.h"

namespace strata::app {

namespace fs = std::filesystem;
using nlohmann::json;

textnorm::NormalizationTable make_table(const RunConfig& config) {
  if (config.paths.rules.empty()) {
    return textnorm::NormalizationTable::default_table(config.fold_nuqta);
  }
  return textnorm::NormalizationTable::load(config.paths.rules, config.fold_nuqta);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<textnorm::Sentence> read_corpus(const std::vector<fs::path>& files,
                                            const textnorm::NormalizationTable& table,
                                            const lexicon::Lexicon* lexicon) {
  std::vector<textnorm::Sentence> sentences;
  for (const auto& file : files) {
    auto part = textnorm::normalize(read_file(file), table);
    sentences.insert(sentences.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
  }
  if (lexicon) textnorm::apply_aliases(sentences, lexicon->aliases());
  return sentences;
}

LabeledData build_dataset(const lexicon::Lexicon& lexicon, const embed::EmbeddingModel& model,
                          lexicon::ValidationMode mode) {
  LabeledData out;
  for (const auto& entry : lexicon.entries()) {
    if (embed::vector(model, entry.surface, &lexicon)) continue;
    if (mode == lexicon::ValidationMode::kStrict) {
      throw DataError(fmt::format("lexicon word '{}' (pair {}) has no embedding",
                                  entry.surface, entry.pair_id));
    }
    if (std::find(out.dropped_pairs.begin(), out.dropped_pairs.end(), entry.pair_id) ==
        out.dropped_pairs.end()) {
      out.dropped_pairs.push_back(entry.pair_id);
    }
  }
  out.lexicon = out.dropped_pairs.empty() ? lexicon : lexicon.without_pairs(out.dropped_pairs);
  out.dataset.feature_count = model.dim();
  for (const auto& entry : out.lexicon.entries()) {
    auto v = embed::vector(model, entry.surface, &out.lexicon);
    out.dataset.samples.push_back({std::move(*v), entry.origin, entry.surface, entry.pair_id});
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialization failed");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), in.gcount());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

class RunContext {
 public:
  RunContext(std::string command, const RunConfig& config, std::ostream& log)
      : command_(std::move(command)),
        config_(config),
        log_(log),
        start_(std::chrono::steady_clock::now()),
        started_at_(std::time(nullptr)) {
    fs::create_directories(config.paths.out);
  }

  void stage(std::string name) {
    stage_ = std::move(name);
    log_ << fmt::format("strata {}: {}\n", command_, stage_) << std::flush;
  }
  const std::string& current_stage() const { return stage_; }

  fs::path output(const std::string& name) {
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) {
      outputs_.push_back(name);
    }
    return config_.paths.out / name;
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    const auto path = output(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    fn(out);
    out.flush();
    if (!out) throw DataError(fmt::format("write to {} failed", path.string()));
  }

  void input(const fs::path& path) {
    const auto key = path.string();
    if (!inputs_.contains(key)) inputs_[key] = sha256_file(path);
  }

  json& results() { return results_; }
  void resamples(const std::string& what, uint64_t n) { resamples_[what] = n; }

  void write_manifest(bool ok, const std::string& error) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started_at_));
    json manifest = {
        {"command", command_},
        {"status", ok ? "ok" : "failed"},
        {"failed_stage", ok ? json(nullptr) : json(stage_)},
        {"error", ok ? json(nullptr) : json(error)},
        {"partial", !ok && !outputs_.empty()},
        {"config", config_.document},
        {"seeds",
         {{"eval", config_.eval.master_seed},
          {"embed", config_.embed.seed},
          {"syngen", config_.syngen.seed}}},
        {"inputs", inputs_},
        {"outputs", outputs_},
        {"resamples", resamples_},
        {"results", results_},
        {"started_at", stamp},
        {"wall_clock_seconds", seconds},
    };
    std::ofstream out(config_.paths.out / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

 private:
  std::string command_;
  const RunConfig& config_;
  std::ostream& log_;
  std::chrono::steady_clock::time_point start_;
  std::time_t started_at_;
  std::string stage_ = "setup";
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, uint64_t> resamples_;
  json results_ = json::object();
};

struct Corpus {
  // Every token, for frequency statistics.
  textnorm::Vocabulary raw;
  textnorm::Vocabulary vocab;
  textnorm::TokenStream stream;
  // Lexicon restricted to pairs found in `vocab`.
  std::optional<lexicon::Lexicon> kept;
};

lexicon::Lexicon stage_lexicon(RunContext& ctx, const RunConfig& c,
                               const textnorm::NormalizationTable& table) {
  ctx.stage("lexicon");
  ctx.input(c.paths.lexicon);
  auto lex = lexicon::load_lexicon(c.paths.lexicon, table);
  if (lex.empty()) throw DataError("the lexicon has no entries");
  ctx.results()["lexicon"] = {{"entries", lex.size()}, {"pairs", lex.size() / 2}};
  return lex;
}

Corpus stage_vocab(RunContext& ctx, const RunConfig& c, const textnorm::NormalizationTable& table,
                   const lexicon::Lexicon* lex, const std::vector<fs::path>& files,
                   const std::string& prefix) {
  ctx.stage(prefix + "vocab");
  for (const auto& f : files) ctx.input(f);
  const auto sentences = read_corpus(files, table, lex);
  textnorm::TokenCounts counts;
  counts.add(sentences);
  Corpus corpus;
  corpus.raw = textnorm::Vocabulary::build(counts, 1);
  corpus.vocab = textnorm::Vocabulary::build(counts, c.min_count);
  if (corpus.vocab.empty()) {
    throw DataError(fmt::format("no token occurs at least {} times", c.min_count));
  }
  ctx.write(prefix + "vocab.tsv", [&](std::ostream& o) { corpus.vocab.save(o); });
  ctx.results()[prefix + "corpus"] = {{"tokens", counts.total()},
                                      {"types", corpus.raw.size()},
                                      {"vocabulary", corpus.vocab.size()}};
  if (lex) {
    const auto report = lexicon::validate_against_vocab(*lex, corpus.vocab, c.lexicon_mode,
                                                        c.warn_below);
    ctx.write(prefix + "lexicon_report.csv", [&](std::ostream& o) {
      o << "surface,pair_id,status,count\n";
      for (const auto& issue : report.issues) {
        o << csv::field(issue.surface) << ',' << issue.pair_id << ','
          << (issue.missing ? "missing" : "rare") << ',' << issue.count << '\n';
      }
    });
    const auto stats = lexicon::pair_stats(report.kept, corpus.raw);
    ctx.write(prefix + "pair_stats.csv", [&](std::ostream& o) {
      o << "surface,origin,pair_id,raw_count,rel_share,signed_diff\n";
      for (size_t i = 0; i < stats.size(); ++i) {
        const auto& e = report.kept.entries()[i];
        o << csv::field(e.surface) << ',' << origin_name(e.origin) << ',' << e.pair_id << ','
          << stats[i].raw_count << ',' << fmt::format("{}", stats[i].rel_share) << ','
          << fmt::format("{}", stats[i].signed_diff) << '\n';
      }
    });
    ctx.results()[prefix + "lexicon_validation"] = {
        {"dropped_pairs", report.dropped_pairs},
        {"issues", report.issues.size()},
        {"kept_entries", report.kept.size()}};
    corpus.kept = report.kept;
  }
  corpus.stream = textnorm::encode(sentences, corpus.vocab);
  return corpus;
}

embed::EmbeddingModel stage_train(RunContext& ctx, const RunConfig& c, const Corpus& corpus,
                                  const std::string& prefix) {
  ctx.stage(prefix + "train-embed");
  auto model = embed::train(corpus.stream, corpus.vocab, c.embed);
  ctx.write(prefix + "model.tsv", [&](std::ostream& o) { embed::save_model(model, o); });
  ctx.results()[prefix + "model"] = {{"dim", model.dim()}, {"words", model.size()}};
  return model;
}

// The model from paths, or one trained on the corpus.
embed::EmbeddingModel obtain_model(RunContext& ctx, const RunConfig& c,
                                   const textnorm::NormalizationTable& table,
                                   const lexicon::Lexicon* lex, bool control) {
  const std::string prefix = control ? "control_" : "";
  const auto& path = control ? c.paths.control_model : c.paths.model;
  if (!path.empty()) {
    ctx.stage(prefix + "load-model");
    ctx.input(path);
    return embed::load_model(path);
  }
  const auto corpus =
      stage_vocab(ctx, c, table, lex, control ? c.paths.control_corpus : c.paths.corpus, prefix);
  return stage_train(ctx, c, corpus, prefix);
}

LabeledData stage_dataset(RunContext& ctx, const RunConfig& c, const lexicon::Lexicon& lex,
                          const embed::EmbeddingModel& model, const std::string& prefix) {
  ctx.stage(prefix + "dataset");
  auto data = build_dataset(lex, model, c.lexicon_mode);
  const auto counts = data.dataset.class_counts();
  ctx.results()[prefix + "dataset"] = {{"samples", data.dataset.size()},
                                       {"sanskrit", counts[0]},
                                       {"perso_arabic", counts[1]},
                                       {"dim", data.dataset.feature_count},
                                       {"dropped_pairs", data.dropped_pairs}};
  return data;
}

lab::MisclassTable stage_classify(RunContext& ctx, const RunConfig& c,
                                  const forest::Dataset& data, const std::string& prefix) {
  ctx.stage(prefix + "classify");
  auto table = lab::repeated_eval(data, c.eval);
  ctx.write(prefix + "misclass.csv", [&](std::ostream& o) { lab::write_misclass_csv(table, o); });
  ctx.write(prefix + "iterations.csv",
            [&](std::ostream& o) { lab::write_iterations_csv(table, o); });
  const auto ranking = lab::rank_errors(table);
  const auto top20 = lab::origin_error_share(table, 20);
  const auto top50 = lab::origin_error_share(table, 50);
  ctx.resamples(prefix + "classify", table.total_resamples());
  ctx.results()[prefix + "classify"] = {
      {"iterations", table.iterations.size()},
      {"mean_accuracy", table.mean_accuracy()},
      {"std_accuracy", table.std_accuracy()},
      {"total_errors", ranking.total_errors},
      {"top20_percent_error_share", ranking.top20_share},
      // Undefined when the top words have no errors.
      {"sanskrit_share_top20", top20.errors > 0 ? json(top20.sanskrit) : json(nullptr)},
      {"sanskrit_share_top50", top50.errors > 0 ? json(top50.sanskrit) : json(nullptr)},
      {"resamples", table.total_resamples()}};
  return table;
}

std::optional<lab::MisclassTable> stage_exclude(RunContext& ctx, const RunConfig& c,
                                                const forest::Dataset& data,
                                                const lab::MisclassTable& table) {
  if (c.exclude_k == 0) return std::nullopt;
  ctx.stage("exclude");
  auto excluded = lab::exclude_and_retrain(data, table, c.exclude_k, c.eval);
  ctx.write("misclass_excluded.csv",
            [&](std::ostream& o) { lab::write_misclass_csv(excluded, o); });
  ctx.resamples("exclude", excluded.total_resamples());
  ctx.results()["exclude"] = {{"k", c.exclude_k},
                              {"removed", lab::top_words(table, c.exclude_k)},
                              {"mean_accuracy", excluded.mean_accuracy()},
                              {"std_accuracy", excluded.std_accuracy()},
                              {"gain", excluded.mean_accuracy() - table.mean_accuracy()},
                              {"resamples", excluded.total_resamples()}};
  return excluded;
}

void stage_sweep(RunContext& ctx, const RunConfig& c, const forest::Dataset& data) {
  ctx.stage("sweep");
  json results = json::object();
  for (const auto parameter : c.sweep.parameters) {
    std::vector<int> grid;
    switch (parameter) {
      case lab::SweepParameter::kNEstimators: grid = c.sweep.n_estimators_grid; break;
      case lab::SweepParameter::kMaxDepth: grid = c.sweep.max_depth_grid; break;
      case lab::SweepParameter::kCriterion: grid = {0, 1}; break;
    }
    const auto points = lab::hyperparam_sweep(data, c.eval, parameter, grid, c.sweep.repetitions);
    const std::string name(lab::sweep_parameter_name(parameter));
    ctx.write("sweep_" + name + ".csv",
              [&](std::ostream& o) { lab::write_sweep_csv(parameter, points, o); });
    json rows = json::array();
    for (const auto& p : points) {
      rows.push_back({{"value", p.value},
                      {"mean_accuracy", p.mean_accuracy},
                      {"std_error", p.std_error}});
    }
    results[name] = rows;
  }
  ctx.results()["sweep"] = results;
}

std::vector<size_t> ablation_grid(const RunConfig& c, size_t dim) {
  if (c.ablate.grid.empty()) {
    std::vector<size_t> grid;
    for (size_t n : {1, 2, 5, 10, 20, 50, 100, 200}) {
      if (n < dim) grid.push_back(n);
    }
    grid.push_back(dim);
    return grid;
  }
  for (size_t n : c.ablate.grid) {
    if (n > dim) {
      throw DataError(fmt::format("ablate.grid value {} exceeds the {} embedding dimensions", n,
                                  dim));
    }
  }
  return c.ablate.grid;
}

void stage_ablate(RunContext& ctx, const RunConfig& c, const forest::Dataset& data) {
  ctx.stage("ablate");
  const auto grid = ablation_grid(c, data.feature_count);
  auto summarize = [](const lab::AblationCurve& curve) {
    json rows = json::array();
    for (const auto& p : curve) {
      rows.push_back({{"n_dims", p.n_dims}, {"mean_accuracy", p.mean_accuracy}});
    }
    return rows;
  };
  if (c.ablate.prefix) {
    const auto curve = lab::prefix_ablation(data, c.eval, grid, c.ablate.repetitions);
    ctx.write("ablation_prefix.csv", [&](std::ostream& o) { lab::write_ablation_csv(curve, o); });
    ctx.results()["ablation_prefix"] = summarize(curve);
  }
  if (c.ablate.random) {
    const auto curve = lab::random_dim_ablation(data, c.eval, grid, c.ablate.repetitions);
    ctx.write("ablation_random.csv", [&](std::ostream& o) { lab::write_ablation_csv(curve, o); });
    ctx.results()["ablation_random"] = summarize(curve);
  }
}

void stage_explain(RunContext& ctx, const RunConfig& c, const forest::Dataset& data) {
  ctx.stage("explain");
  auto params = c.eval.forest;
  params.seed = c.eval.master_seed;
  const auto model = forest::fit(data, params, c.eval.workers);
  forest::save_forest(model, ctx.output("forest.json"));
  const auto summary = explain::shap_summary(model, data, c.eval.workers);
  ctx.write("shap_summary.csv",
            [&](std::ostream& o) { explain::write_summary_csv(summary, o); });
  auto ranked = summary;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.rank < b.rank; });
  json top = json::array();
  for (size_t i = 0; i < std::min<size_t>(5, ranked.size()); ++i) {
    top.push_back({{"dimension", ranked[i].dimension},
                   {"mean_abs_phi", ranked[i].mean_abs_phi}});
  }
  ctx.results()["explain"] = {{"top_dimensions", top}};
}

void stage_correlate(RunContext& ctx, const lexicon::Lexicon& lex, const Corpus& corpus,
                     const embed::EmbeddingModel& model, const lab::MisclassTable& table,
                     const std::optional<lab::MisclassTable>& excluded) {
  ctx.stage("correlate");
  const auto stats = lexicon::pair_stats(lex, corpus.raw);
  std::vector<std::pair<std::string, lab::CorrelationMatrix>> panels;
  panels.emplace_back("full", lab::correlation_matrix(table, lex, stats, model));
  if (excluded) {
    panels.emplace_back("excluded", lab::correlation_matrix(*excluded, lex, stats, model));
  }
  ctx.write("correlation.csv",
            [&](std::ostream& o) { lab::write_correlation_csv(panels, o); });
  json results = json::object();
  for (const auto& [name, m] : panels) {
    json row = json::object();
    for (size_t j = 1; j < m.variables.size(); ++j) {
      const double r = m.at(0, j);
      row[m.variables[j]] = std::isnan(r) ? json(nullptr) : json(r);
    }
    results[name] = {{"error_count_vs", row}};
  }
  ctx.results()["correlation"] = results;
}

std::vector<lab::OverlapPoint> stage_overlap(RunContext& ctx, const RunConfig& c,
                                             const lab::MisclassTable& a,
                                             const lab::MisclassTable& b) {
  ctx.stage("overlap");
  const auto points = lab::cross_corpus_overlap(a, b, c.overlap_k);
  ctx.write("overlap.csv", [&](std::ostream& o) { lab::write_overlap_csv(points, o); });
  json rows = json::array();
  for (const auto& p : points) {
    rows.push_back(
        {{"k", p.k}, {"jaccard", p.jaccard}, {"expected_random_jaccard", p.expected_random}});
  }
  ctx.results()["overlap"] = rows;
  return points;
}

lab::MisclassTable read_table(RunContext& ctx, const fs::path& path) {
  ctx.input(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return lab::read_misclass_csv(in);
}

// Reference values for the Hindi corpora and a +-0.05 band around each.
void stage_compare(RunContext& ctx) {
  ctx.stage("compare");
  const json& r = ctx.results();
  auto value = [&](std::initializer_list<const char*> keys) -> std::optional<double> {
    const json* node = &r;
    for (const char* key : keys) {
      if (!node->contains(key)) return std::nullopt;
      node = &(*node)[key];
    }
    return node->is_number() ? std::optional<double>(node->get<double>()) : std::nullopt;
  };
  std::optional<double> jaccard;
  if (r.contains("overlap") && !r["overlap"].empty()) {
    double sum = 0;
    for (const auto& p : r["overlap"]) sum += p["jaccard"].get<double>();
    jaccard = sum / static_cast<double>(r["overlap"].size());
  }
  struct Row {
    const char* metric;
    double reference;
    std::optional<double> observed;
  };
  const std::vector<Row> rows = {
      {"mean_accuracy", 0.88, value({"classify", "mean_accuracy"})},
      {"mean_accuracy_excluded", 0.95, value({"exclude", "mean_accuracy"})},
      {"sanskrit_share_top20", 0.58, value({"classify", "sanskrit_share_top20"})},
      {"sanskrit_share_top50", 0.52, value({"classify", "sanskrit_share_top50"})},
      {"mean_jaccard_control", 0.43, jaccard},
  };
  constexpr double kBand = 0.05;
  json summary = json::array();
  ctx.write("paper_comparison.csv", [&](std::ostream& o) {
    o << "metric,reference,observed,lower,upper,within_band\n";
    for (const auto& row : rows) {
      const double lo = std::round((row.reference - kBand) * 1e9) / 1e9;
      const double hi = std::round((row.reference + kBand) * 1e9) / 1e9;
      const char* verdict = "not_available";
      if (row.observed) verdict = *row.observed >= lo && *row.observed <= hi ? "yes" : "no";
      o << row.metric << ',' << row.reference << ','
        << (row.observed ? fmt::format("{}", *row.observed) : "nan") << ','
        << fmt::format("{}", lo) << ',' << fmt::format("{}", hi) << ',' << verdict << '\n';
      summary.push_back({{"metric", row.metric},
                         {"reference", row.reference},
                         {"observed", row.observed ? json(*row.observed) : json(nullptr)},
                         {"within_band", verdict}});
    }
  });
  ctx.results()["paper_comparison"] = summary;
}

void stage_charts(RunContext& ctx, const RunConfig& c) {
  if (!c.charts) return;
  ctx.stage("charts");
  for (const auto& path : emit_charts(c.paths.out)) ctx.output(path.filename().string());
}

void cmd_normalize(RunContext& ctx, const RunConfig& c) {
  const auto table = make_table(c);
  std::optional<lexicon::Lexicon> lex;
  if (!c.paths.lexicon.empty()) lex = stage_lexicon(ctx, c, table);
  ctx.stage("normalize");
  for (const auto& f : c.paths.corpus) ctx.input(f);
  const auto sentences = read_corpus(c.paths.corpus, table, lex ? &*lex : nullptr);
  uint64_t tokens = 0;
  ctx.write("normalized.txt", [&](std::ostream& o) {
    for (const auto& s : sentences) {
      for (size_t i = 0; i < s.size(); ++i) o << (i ? " " : "") << s[i];
      o << '\n';
      tokens += s.size();
    }
  });
  ctx.results()["normalize"] = {{"sentences", sentences.size()}, {"tokens", tokens}};
}

void cmd_vocab(RunContext& ctx, const RunConfig& c) {
  const auto table = make_table(c);
  std::optional<lexicon::Lexicon> lex;
  if (!c.paths.lexicon.empty()) lex = stage_lexicon(ctx, c, table);
  stage_vocab(ctx, c, table, lex ? &*lex : nullptr, c.paths.corpus, "");
}

void cmd_train_embed(RunContext& ctx, const RunConfig& c) {
  const auto table = make_table(c);
  std::optional<lexicon::Lexicon> lex;
  if (!c.paths.lexicon.empty()) lex = stage_lexicon(ctx, c, table);
  const lexicon::Lexicon* lp = lex ? &*lex : nullptr;
  stage_train(ctx, c, stage_vocab(ctx, c, table, lp, c.paths.corpus, ""), "");
  if (!c.paths.control_corpus.empty()) {
    stage_train(ctx, c, stage_vocab(ctx, c, table, lp, c.paths.control_corpus, "control_"),
                "control_");
  }
}

// Lexicon, model and labeled data shared by the classifier subcommands.
LabeledData prepare(RunContext& ctx, const RunConfig& c, bool control = false) {
  const auto table = make_table(c);
  const auto lex = stage_lexicon(ctx, c, table);
  const auto model = obtain_model(ctx, c, table, &lex, control);
  return stage_dataset(ctx, c, lex, model, control ? "control_" : "");
}

void cmd_classify(RunContext& ctx, const RunConfig& c) {
  const auto data = prepare(ctx, c);
  stage_classify(ctx, c, data.dataset, "");
}

void cmd_sweep(RunContext& ctx, const RunConfig& c) { stage_sweep(ctx, c, prepare(ctx, c).dataset); }

void cmd_ablate(RunContext& ctx, const RunConfig& c) {
  stage_ablate(ctx, c, prepare(ctx, c).dataset);
}

void cmd_explain(RunContext& ctx, const RunConfig& c) {
  stage_explain(ctx, c, prepare(ctx, c).dataset);
}

void cmd_correlate(RunContext& ctx, const RunConfig& c) {
  const auto table = make_table(c);
  const auto lex = stage_lexicon(ctx, c, table);
  const auto corpus = stage_vocab(ctx, c, table, &lex, c.paths.corpus, "");
  embed::EmbeddingModel model;
  if (c.paths.model.empty()) {
    model = stage_train(ctx, c, corpus, "");
  } else {
    model = obtain_model(ctx, c, table, &lex, false);
  }
  const auto data = stage_dataset(ctx, c, *corpus.kept, model, "");
  const auto misclass = c.paths.misclass.empty() ? stage_classify(ctx, c, data.dataset, "")
                                                 : read_table(ctx, c.paths.misclass);
  const auto excluded = stage_exclude(ctx, c, data.dataset, misclass);
  stage_correlate(ctx, data.lexicon, corpus, model, misclass, excluded);
}

void cmd_overlap(RunContext& ctx, const RunConfig& c) {
  auto table_for = [&](bool control) {
    const auto& path = control ? c.paths.control_misclass : c.paths.misclass;
    if (!path.empty()) return read_table(ctx, path);
    const auto data = prepare(ctx, c, control);
    return stage_classify(ctx, c, data.dataset, control ? "control_" : "");
  };
  const auto main = table_for(false);
  const auto control = table_for(true);
  stage_overlap(ctx, c, main, control);
}

void cmd_syngen(RunContext& ctx, const RunConfig& c) {
  ctx.stage("syngen");
  const auto corpus = syngen::generate(c.syngen);
  ctx.write("corpus.txt", [&](std::ostream& o) { o << corpus.text; });
  ctx.write("lexicon.tsv", [&](std::ostream& o) { o << corpus.lexicon_tsv; });
  ctx.results()["syngen"] = {{"tokens", corpus.tokens}, {"pairs", c.syngen.n_pairs}};
}

void cmd_replicate(RunContext& ctx, const RunConfig& c) {
  const auto table = make_table(c);
  const auto lex = stage_lexicon(ctx, c, table);
  const auto corpus = stage_vocab(ctx, c, table, &lex, c.paths.corpus, "");
  const auto model = c.paths.model.empty() ? stage_train(ctx, c, corpus, "")
                                           : obtain_model(ctx, c, table, &lex, false);
  const auto data = stage_dataset(ctx, c, *corpus.kept, model, "");
  const auto misclass = stage_classify(ctx, c, data.dataset, "");
  const auto excluded = stage_exclude(ctx, c, data.dataset, misclass);
  stage_sweep(ctx, c, data.dataset);
  stage_ablate(ctx, c, data.dataset);
  stage_explain(ctx, c, data.dataset);
  stage_correlate(ctx, data.lexicon, corpus, model, misclass, excluded);
  if (!c.paths.control_corpus.empty() || !c.paths.control_model.empty()) {
    const auto control_model = obtain_model(ctx, c, table, &lex, true);
    const auto control_data = stage_dataset(ctx, c, lex, control_model, "control_");
    const auto control = stage_classify(ctx, c, control_data.dataset, "control_");
    stage_overlap(ctx, c, misclass, control);
  }
  if (c.preset == kPaperPreset) stage_compare(ctx);
  ctx.stage("summary");
  ctx.write("summary.json", [&](std::ostream& o) { o << ctx.results().dump(2) << '\n'; });
  stage_charts(ctx, c);
}

using Command = void (*)(RunContext&, const RunConfig&);

struct CommandInfo {
  const char* name;
  const char* help;
  Command fn;
};

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"normalize", "Canonicalize and tokenize the corpus", cmd_normalize},
      {"vocab", "Count tokens and build the vocabulary", cmd_vocab},
      {"train-embed", "Train skip-gram embeddings", cmd_train_embed},
      {"classify", "Repeated random-split classification", cmd_classify},
      {"sweep", "Hyperparameter sweeps", cmd_sweep},
      {"ablate", "Dimension ablations", cmd_ablate},
      {"explain", "SHAP attributions per dimension", cmd_explain},
      {"correlate", "Correlates of misclassification", cmd_correlate},
      {"overlap", "Top-k overlap between two corpora", cmd_overlap},
      {"syngen", "Generate a synthetic two-stratum corpus", cmd_syngen},
      {"replicate", "Run the full experiment battery", cmd_replicate},
  };
  return list;
}

void require(bool ok, const std::string& command, const char* what) {
  if (!ok) throw ConfigError(fmt::format("'{}' needs {}", command, what));
}

void check_inputs(const std::string& command, const RunConfig& c) {
  const bool corpus = !c.paths.corpus.empty();
  const bool lex = !c.paths.lexicon.empty();
  const bool model = !c.paths.model.empty() || corpus;
  const bool control_model = !c.paths.control_model.empty() || !c.paths.control_corpus.empty();
  if (command == "normalize" || command == "vocab" || command == "train-embed") {
    require(corpus, command, "paths.corpus");
  } else if (command == "classify" || command == "sweep" || command == "ablate" ||
             command == "explain") {
    require(lex, command, "paths.lexicon");
    require(model, command, "paths.model or paths.corpus");
  } else if (command == "correlate" || command == "replicate") {
    require(lex, command, "paths.lexicon");
    require(corpus, command, "paths.corpus");
  } else if (command == "overlap") {
    require(!c.paths.misclass.empty() || (lex && model), command,
            "paths.misclass, or paths.lexicon with paths.model or paths.corpus");
    require(!c.paths.control_misclass.empty() || (lex && control_model), command,
            "paths.control_misclass, or paths.lexicon with paths.control_model or "
            "paths.control_corpus");
  }
}

std::string json_string(const std::string& s) { return json(s).dump(); }

std::string json_string(const std::vector<std::string>& v) { return json(v).dump(); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Etymological strata in word embeddings"};
  cli.name("strata");
  cli.require_subcommand(1);
  cli.fallthrough();

  std::optional<std::string> config_file;
  std::optional<std::string> preset;
  std::vector<std::string> sets;
  std::optional<std::string> out_dir, lexicon, rules, model, control_model, misclass,
      control_misclass;
  std::vector<std::string> corpus, control_corpus;
  std::optional<uint64_t> seed;
  std::optional<int> iterations, workers;
  cli.add_option("--config", config_file, "JSON config file");
  cli.add_option("--preset", preset, "default or paper-replication");
  cli.add_option("--set", sets, "Override a config value: section.key=value");
  cli.add_option("--out", out_dir, "Run directory");
  cli.add_option("--seed", seed, "Seed for evaluation, embeddings and synthesis");
  cli.add_option("--iterations", iterations, "Repeated-evaluation iterations");
  cli.add_option("--workers", workers, "Evaluation worker threads");
  cli.add_option("--corpus", corpus, "Corpus file (repeatable)");
  cli.add_option("--control-corpus", control_corpus, "Control corpus file (repeatable)");
  cli.add_option("--lexicon", lexicon, "Lexicon TSV");
  cli.add_option("--rules", rules, "Extra normalization rules");
  cli.add_option("--model", model, "Embedding model file");
  cli.add_option("--control-model", control_model, "Control embedding model file");
  cli.add_option("--misclass", misclass, "misclass.csv of a previous run");
  cli.add_option("--control-misclass", control_misclass, "misclass.csv of a control run");

  std::string chosen;
  for (const auto& c : commands()) {
    cli.add_subcommand(c.name, c.help)->callback([&chosen, name = c.name] { chosen = name; });
  }
  cli.add_subcommand("charts", "Render the CSVs of a run directory as SVG")
      ->callback([&chosen] { chosen = "charts"; });

  if (!args.empty() && !args[0].starts_with('-') && !cli.get_subcommand_no_throw(args[0])) {
    err << fmt::format("strata: unknown command '{}'\n", args[0]);
    return kExitConfig;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    cli.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    cli.exit(e, out, err);
    return kExitConfig;
  }

  std::vector<std::string> overrides = sets;
  if (out_dir) overrides.push_back("paths.out=" + json_string(*out_dir));
  if (seed) {
    for (const char* key : {"eval.seed", "embed.seed", "syngen.seed"}) {
      overrides.push_back(fmt::format("{}={}", key, *seed));
    }
  }
  if (iterations) overrides.push_back(fmt::format("eval.iterations={}", *iterations));
  if (workers) overrides.push_back(fmt::format("eval.workers={}", *workers));
  if (!corpus.empty()) overrides.push_back("paths.corpus=" + json_string(corpus));
  if (!control_corpus.empty()) {
    overrides.push_back("paths.control_corpus=" + json_string(control_corpus));
  }
  const std::pair<const char*, const std::optional<std::string>*> path_flags[] = {
      {"lexicon", &lexicon},   {"rules", &rules},       {"model", &model},
      {"control_model", &control_model}, {"misclass", &misclass},
      {"control_misclass", &control_misclass}};
  for (const auto& [key, value] : path_flags) {
    if (*value) overrides.push_back(fmt::format("paths.{}={}", key, json_string(**value)));
  }

  RunConfig config;
  try {
    config = load_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt,
                         overrides, preset);
    if (chosen != "charts") check_inputs(chosen, config);
  } catch (const ConfigError& e) {
    err << "strata: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "strata: config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (chosen == "charts") {
    try {
      const auto written = emit_charts(config.paths.out);
      if (written.empty()) {
        err << fmt::format("strata charts: warning: no result CSVs in {}\n",
                           config.paths.out.string());
      }
      for (const auto& p : written) out << p.string() << '\n';
      return kExitOk;
    } catch (const DataError& e) {
      err << "strata charts: " << e.what() << '\n';
      return kExitData;
    } catch (const std::exception& e) {
      err << "strata charts: internal error: " << e.what() << '\n';
      return kExitInternal;
    }
  }

  const auto& info = *std::find_if(commands().begin(), commands().end(),
                                   [&](const CommandInfo& c) { return chosen == c.name; });
  std::optional<RunContext> ctx;
  try {
    ctx.emplace(chosen, config, err);
  } catch (const std::exception& e) {
    err << fmt::format("strata {}: cannot create {}: {}\n", chosen, config.paths.out.string(),
                       e.what());
    return kExitData;
  }
  auto fail = [&](int code, const char* kind, const std::exception& e) {
    err << fmt::format("strata {}: {} in stage '{}': {}\n", chosen, kind, ctx->current_stage(),
                       e.what());
    try {
      ctx->write_manifest(false, e.what());
    } catch (const std::exception&) {
    }
    return code;
  };
  try {
    info.fn(*ctx, config);
    ctx->write_manifest(true, "");
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config error", e);
  } catch (const DataError& e) {
    return fail(kExitData, "data error", e);
  } catch (const std::exception& e) {
    return fail(kExitInternal, "internal error", e);
  }
  out << config.paths.out.string() << '\n';
  return kExitOk;
}

}  // namespace strata::app
