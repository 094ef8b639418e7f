#include "strata/lab.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "strata/csv.h"
#include "strata/error.h"
#include "strata/parallel.h"
#include "strata/random.h"

namespace strata::lab {

namespace {

constexpr uint64_t kRandomDimSalt = 0x5EEDD1D5ULL;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string_view split_unit_name(SplitUnit unit) {
  return unit == SplitUnit::kWord ? "word" : "pair";
}

std::optional<SplitUnit> parse_split_unit(std::string_view name) {
  if (name == "word" || name == "WORD") return SplitUnit::kWord;
  if (name == "pair" || name == "PAIR") return SplitUnit::kPair;
  return std::nullopt;
}

void EvalProtocol::validate() const {
  if (iterations < 1) throw ConfigError("eval.iterations must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("eval.test_fraction must lie strictly between 0 and 1");
  }
  if (workers < 1) throw ConfigError("eval.workers must be >= 1");
  if (max_resamples < 0) throw ConfigError("eval.max_resamples must be >= 0");
  forest.validate();
}

uint64_t MisclassTable::total_resamples() const {
  uint64_t total = 0;
  for (const auto& it : iterations) total += static_cast<uint64_t>(it.resamples);
  return total;
}

std::vector<double> MisclassTable::accuracies() const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) out.push_back(it.accuracy);
  return out;
}

double MisclassTable::mean_accuracy() const {
  if (iterations.empty()) return 0.0;
  const auto acc = accuracies();
  return mean_of(acc);
}

double MisclassTable::std_accuracy() const {
  const auto acc = accuracies();
  return sample_std(acc);
}

namespace {

size_t test_count(size_t units, double fraction) {
  const auto n = static_cast<size_t>(std::ceil(static_cast<double>(units) * fraction));
  return std::clamp<size_t>(n, 1, units - 1);
}

// Returns (train rows, test rows), both ascending.
std::pair<std::vector<size_t>, std::vector<size_t>> draw_split(
    const forest::Dataset& data, const EvalProtocol& protocol, Rng& rng) {
  const size_t n = data.size();
  std::vector<bool> in_test(n, false);
  if (protocol.split_unit == SplitUnit::kWord) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const size_t k = test_count(n, protocol.test_fraction);
    for (size_t i = 0; i < k; ++i) in_test[order[i]] = true;
  } else {
    std::vector<int64_t> groups;
    for (const auto& s : data.samples) groups.push_back(s.group);
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    if (groups.size() < 2) throw DataError("pair split needs at least two pairs");
    std::shuffle(groups.begin(), groups.end(), rng);
    const size_t k = test_count(groups.size(), protocol.test_fraction);
    const std::unordered_set<int64_t> test_groups(groups.begin(), groups.begin() + k);
    for (size_t i = 0; i < n; ++i) in_test[i] = test_groups.contains(data.samples[i].group);
  }
  std::pair<std::vector<size_t>, std::vector<size_t>> out;
  for (size_t i = 0; i < n; ++i) (in_test[i] ? out.second : out.first).push_back(i);
  return out;
}

bool has_both_classes(const forest::Dataset& data, std::span<const size_t> rows) {
  bool seen[2] = {false, false};
  for (size_t r : rows) seen[static_cast<size_t>(data.samples[r].label)] = true;
  return seen[0] && seen[1];
}

}  // namespace

IterationOutcome run_iteration(const forest::Dataset& data,
                               const EvalProtocol& protocol, uint64_t index) {
  const uint64_t seed = split_mix(protocol.master_seed, index);
  Rng rng(split_mix(seed, 0));
  IterationOutcome out;
  out.record.seed = seed;
  auto [train_rows, test_rows] = draw_split(data, protocol, rng);
  while (!has_both_classes(data, train_rows) || test_rows.empty()) {
    if (out.record.resamples >= protocol.max_resamples) {
      throw DataError(fmt::format(
          "iteration {}: no two-class training split after {} redraws", index,
          out.record.resamples));
    }
    ++out.record.resamples;
    std::tie(train_rows, test_rows) = draw_split(data, protocol, rng);
  }
  auto params = protocol.forest;
  params.seed = split_mix(seed, 1);
  const auto model = forest::fit(data.subset(train_rows), params);
  const auto eval = forest::evaluate(model, data.subset(test_rows));
  out.record.n_test = test_rows.size();
  out.record.n_errors = eval.errors;
  out.record.accuracy = eval.accuracy;
  out.test_rows = std::move(test_rows);
  out.correct = eval.correct;
  return out;
}

MisclassTable repeated_eval(const forest::Dataset& data,
                            const EvalProtocol& protocol) {
  protocol.validate();
  data.validate();
  if (data.size() < 10) {
    throw DataError(fmt::format("repeated evaluation needs >= 10 samples, got {}",
                                data.size()));
  }
  const auto counts = data.class_counts();
  if (counts[0] == 0 || counts[1] == 0) {
    throw DataError("repeated evaluation needs both classes in the dataset");
  }
  const auto iterations = static_cast<size_t>(protocol.iterations);
  std::vector<IterationOutcome> outcomes(iterations);
  parallel_for(iterations, protocol.workers, [&](size_t i) {
    outcomes[i] = run_iteration(data, protocol, i);
  });

  MisclassTable table;
  table.words.reserve(data.size());
  for (const auto& s : data.samples) {
    table.words.push_back({s.word, s.label, s.group, 0, 0});
  }
  table.iterations.reserve(iterations);
  for (auto& outcome : outcomes) {
    for (size_t t = 0; t < outcome.test_rows.size(); ++t) {
      auto& w = table.words[outcome.test_rows[t]];
      ++w.times_in_test;
      if (!outcome.correct[t]) ++w.times_misclassified;
    }
    table.iterations.push_back(outcome.record);
  }
  return table;
}

ErrorRanking rank_errors(const MisclassTable& table) {
  ErrorRanking ranking;
  for (const auto& w : table.words) {
    ranking.words.push_back(
        {w.word, w.origin, w.group, w.times_misclassified, w.times_in_test});
    ranking.total_errors += w.times_misclassified;
  }
  std::stable_sort(ranking.words.begin(), ranking.words.end(),
                   [](const RankedWord& a, const RankedWord& b) {
                     return a.errors > b.errors;
                   });
  if (ranking.total_errors > 0) {
    const auto top = static_cast<size_t>(
        std::ceil(0.2 * static_cast<double>(ranking.words.size())));
    uint64_t top_errors = 0;
    for (size_t i = 0; i < top; ++i) top_errors += ranking.words[i].errors;
    ranking.top20_share = static_cast<double>(top_errors) /
                          static_cast<double>(ranking.total_errors);
  }
  return ranking;
}

OriginShare origin_error_share(const MisclassTable& table, size_t k) {
  const auto ranking = rank_errors(table);
  OriginShare share;
  share.k = std::min(k, ranking.words.size());
  uint64_t by_origin[2] = {0, 0};
  for (size_t i = 0; i < share.k; ++i) {
    by_origin[static_cast<size_t>(ranking.words[i].origin)] += ranking.words[i].errors;
  }
  share.errors = by_origin[0] + by_origin[1];
  if (share.errors > 0) {
    const double total = static_cast<double>(share.errors);
    share.sanskrit = static_cast<double>(by_origin[0]) / total;
    share.perso_arabic = static_cast<double>(by_origin[1]) / total;
  }
  return share;
}

std::string_view sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::kNEstimators: return "n_estimators";
    case SweepParameter::kMaxDepth: return "max_depth";
    case SweepParameter::kCriterion: return "criterion";
  }
  return "";
}

std::optional<SweepParameter> parse_sweep_parameter(std::string_view name) {
  if (name == "n_estimators" || name == "N_ESTIMATORS") return SweepParameter::kNEstimators;
  if (name == "max_depth" || name == "MAX_DEPTH") return SweepParameter::kMaxDepth;
  if (name == "criterion" || name == "CRITERION") return SweepParameter::kCriterion;
  return std::nullopt;
}

std::vector<SweepPoint> hyperparam_sweep(const forest::Dataset& data,
                                         const EvalProtocol& protocol,
                                         SweepParameter parameter,
                                         std::span<const int> grid,
                                         int repetitions) {
  std::vector<SweepPoint> points;
  for (int value : grid) {
    auto p = protocol;
    p.iterations = repetitions;
    switch (parameter) {
      case SweepParameter::kNEstimators: p.forest.n_estimators = value; break;
      case SweepParameter::kMaxDepth: p.forest.max_depth = value; break;
      case SweepParameter::kCriterion:
        if (value != 0 && value != 1) {
          throw ConfigError("criterion grid values must be 0 (gini) or 1 (entropy)");
        }
        p.forest.criterion = value == 0 ? forest::Criterion::kGini
                                        : forest::Criterion::kEntropy;
        break;
    }
    const auto table = repeated_eval(data, p);
    const double sd = table.std_accuracy();
    points.push_back({value, table.mean_accuracy(), sd,
                      sd / std::sqrt(static_cast<double>(repetitions)), repetitions});
  }
  return points;
}

AblationCurve prefix_ablation(const forest::Dataset& data,
                              const EvalProtocol& protocol,
                              std::span<const size_t> n_grid, int repetitions) {
  AblationCurve curve;
  for (size_t n : n_grid) {
    if (n < 1 || n > data.feature_count) {
      throw ConfigError(fmt::format("ablation size {} outside [1, {}]", n,
                                    data.feature_count));
    }
    auto p = protocol;
    p.iterations = repetitions;
    const auto table = repeated_eval(data.prefix(n), p);
    curve.push_back({n, table.mean_accuracy(), table.std_accuracy(), repetitions});
  }
  return curve;
}

AblationCurve random_dim_ablation(const forest::Dataset& data,
                                  const EvalProtocol& protocol,
                                  std::span<const size_t> n_grid,
                                  int repetitions) {
  protocol.validate();
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  std::vector<size_t> all(data.feature_count);
  std::iota(all.begin(), all.end(), size_t{0});
  AblationCurve curve;
  for (size_t n : n_grid) {
    if (n < 1 || n > data.feature_count) {
      throw ConfigError(fmt::format("ablation size {} outside [1, {}]", n,
                                    data.feature_count));
    }
    std::vector<double> acc(static_cast<size_t>(repetitions));
    parallel_for(acc.size(), protocol.workers, [&](size_t r) {
      Rng rng(split_mix(split_mix(protocol.master_seed ^ kRandomDimSalt, n), r));
      std::vector<size_t> dims;
      std::sample(all.begin(), all.end(), std::back_inserter(dims), n, rng);
      acc[r] = run_iteration(data.project(dims), protocol, r).record.accuracy;
    });
    curve.push_back({n, mean_of(acc), sample_std(acc), repetitions});
  }
  return curve;
}

std::vector<std::string> top_words(const MisclassTable& table, size_t k) {
  const auto ranking = rank_errors(table);
  std::vector<std::string> out;
  for (size_t i = 0; i < std::min(k, ranking.words.size()); ++i) {
    out.push_back(ranking.words[i].word);
  }
  return out;
}

MisclassTable exclude_and_retrain(const forest::Dataset& data,
                                  const MisclassTable& table, size_t k,
                                  const EvalProtocol& protocol) {
  const auto excluded = top_words(table, k);
  const std::unordered_set<std::string> drop(excluded.begin(), excluded.end());
  std::vector<size_t> keep;
  for (size_t i = 0; i < data.size(); ++i) {
    if (!drop.contains(data.samples[i].word)) keep.push_back(i);
  }
  return repeated_eval(data.subset(keep), protocol);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2) throw DataError("pearson needs at least two points");
  // Exact test: the mean of equal values can differ from them by rounding.
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
  };
  if (constant(x) || constant(y)) {
    throw UndefinedError("pearson correlation is undefined for a constant input");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) {
    throw UndefinedError("pearson correlation is undefined for a constant input");
  }
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const MisclassTable& table,
                                     const lexicon::Lexicon& lexicon,
                                     std::span<const lexicon::PairStats> stats,
                                     const embed::EmbeddingModel& model) {
  CorrelationMatrix m;
  m.variables = {"error_count", "log10_frequency", "signed_freq_diff",
                 "pair_cosine", "frequency"};
  const size_t nv = m.variables.size();
  std::vector<std::vector<double>> columns(nv);
  for (const auto& w : table.words) {
    const auto index = lexicon.find(w.word);
    if (!index) {
      throw DataError(fmt::format("word '{}' is not in the lexicon", w.word));
    }
    const auto& st = stats[*index];
    const auto u = embed::vector(model, w.word, &lexicon);
    const auto v = embed::vector(model, lexicon.entries()[lexicon.partner(*index)].surface,
                                 &lexicon);
    if (!u || !v) {
      throw DataError(fmt::format("pair of '{}' lacks an embedding", w.word));
    }
    if (st.raw_count == 0) {
      throw UndefinedError(fmt::format("word '{}' has zero frequency", w.word));
    }
    columns[0].push_back(static_cast<double>(w.times_misclassified));
    columns[1].push_back(std::log10(static_cast<double>(st.raw_count)));
    columns[2].push_back(st.signed_diff);
    columns[3].push_back(embed::cosine(*u, *v));
    columns[4].push_back(static_cast<double>(st.raw_count));
  }
  m.values.assign(nv * nv, 1.0);
  for (size_t i = 0; i < nv; ++i) {
    for (size_t j = i + 1; j < nv; ++j) {
      double r;
      try {
        r = pearson(columns[i], columns[j]);
      } catch (const UndefinedError&) {
        r = std::nan("");
      }
      m.values[i * nv + j] = r;
      m.values[j * nv + i] = r;
    }
  }
  return m;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) /
         static_cast<double>(a.size() + b.size() - common);
}

double expected_random_jaccard(size_t universe, size_t k) {
  if (k > universe) throw DataError("k exceeds the universe size");
  if (k == 0) return 1.0;
  const auto log_choose = [](double n, double r) {
    return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1);
  };
  const double n = static_cast<double>(universe);
  const double kk = static_cast<double>(k);
  const double denom = log_choose(n, kk);
  const size_t lo = 2 * k > universe ? 2 * k - universe : 0;
  double expected = 0;
  for (size_t x = lo; x <= k; ++x) {
    const double xd = static_cast<double>(x);
    const double p = std::exp(log_choose(kk, xd) + log_choose(n - kk, kk - xd) - denom);
    expected += p * xd / (2 * kk - xd);
  }
  return expected;
}

std::vector<OverlapPoint> cross_corpus_overlap(const MisclassTable& a,
                                               const MisclassTable& b,
                                               std::span<const size_t> k_list) {
  std::unordered_set<std::string> in_b;
  for (const auto& w : b.words) in_b.insert(w.word);
  std::unordered_set<std::string> common;
  for (const auto& w : a.words) {
    if (in_b.contains(w.word)) common.insert(w.word);
  }
  auto restrict = [&](const MisclassTable& t) {
    MisclassTable out;
    for (const auto& w : t.words) {
      if (common.contains(w.word)) out.words.push_back(w);
    }
    return out;
  };
  const auto ra = rank_errors(restrict(a));
  const auto rb = rank_errors(restrict(b));
  std::vector<OverlapPoint> points;
  for (size_t k : k_list) {
    const size_t kk = std::min(k, common.size());
    std::set<std::string> top_a;
    std::set<std::string> top_b;
    for (size_t i = 0; i < kk; ++i) {
      top_a.insert(ra.words[i].word);
      top_b.insert(rb.words[i].word);
    }
    points.push_back({kk, jaccard(top_a, top_b),
                      expected_random_jaccard(common.size(), kk), common.size()});
  }
  return points;
}

void write_misclass_csv(const MisclassTable& table, std::ostream& out) {
  const auto ranking = rank_errors(table);
  out << "rank,word,origin,pair_id,times_in_test,times_misclassified,error_rate\n";
  for (size_t i = 0; i < ranking.words.size(); ++i) {
    const auto& w = ranking.words[i];
    const double rate = w.times_in_test == 0
                            ? 0.0
                            : static_cast<double>(w.errors) /
                                  static_cast<double>(w.times_in_test);
    out << fmt::format("{},{},{},{},{},{},{}\n", i + 1, csv::field(w.word),
                       origin_name(w.origin),
                       w.group, w.times_in_test, w.errors, rate);
  }
}

void write_iterations_csv(const MisclassTable& table, std::ostream& out) {
  out << "iteration,seed,n_test,n_errors,accuracy,resamples\n";
  for (size_t i = 0; i < table.iterations.size(); ++i) {
    const auto& it = table.iterations[i];
    out << fmt::format("{},{},{},{},{},{}\n", i, it.seed, it.n_test, it.n_errors,
                       it.accuracy, it.resamples);
  }
}

MisclassTable read_misclass_csv(std::istream& in) {
  MisclassTable table;
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("rank,word,origin,pair_id,times_in_test,times_misclassified", 0) != 0) {
    throw DataError("misclass.csv: unexpected header");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::parse_line(line);
    if (f.size() < 6) throw DataError(fmt::format("misclass.csv line {}: too few fields", line_no));
    const auto origin = parse_origin(f[2]);
    if (!origin) throw DataError(fmt::format("misclass.csv line {}: bad origin", line_no));
    try {
      table.words.push_back({f[1], *origin, std::stoll(f[3]), std::stoull(f[4]),
                             std::stoull(f[5])});
    } catch (const std::exception&) {
      throw DataError(fmt::format("misclass.csv line {}: bad number", line_no));
    }
  }
  return table;
}

void write_sweep_csv(SweepParameter parameter, std::span<const SweepPoint> points,
                     std::ostream& out) {
  out << "parameter,value,mean_accuracy,std_accuracy,std_error,repetitions\n";
  for (const auto& p : points) {
    const std::string value = parameter == SweepParameter::kCriterion
                                  ? std::string(p.value == 0 ? "gini" : "entropy")
                                  : std::to_string(p.value);
    out << fmt::format("{},{},{},{},{},{}\n", sweep_parameter_name(parameter), value,
                       p.mean_accuracy, p.std_accuracy, p.std_error, p.repetitions);
  }
}

void write_ablation_csv(const AblationCurve& curve, std::ostream& out) {
  out << "n_dims,mean_accuracy,std_accuracy,repetitions\n";
  for (const auto& p : curve) {
    out << fmt::format("{},{},{},{}\n", p.n_dims, p.mean_accuracy, p.std_accuracy,
                       p.repetitions);
  }
}

void write_correlation_csv(
    std::span<const std::pair<std::string, CorrelationMatrix>> panels,
    std::ostream& out) {
  if (panels.empty()) return;
  const auto& vars = panels.front().second.variables;
  out << "panel,variable";
  for (const auto& v : vars) out << ',' << v;
  out << '\n';
  for (const auto& [name, m] : panels) {
    for (size_t i = 0; i < m.variables.size(); ++i) {
      out << name << ',' << m.variables[i];
      for (size_t j = 0; j < m.variables.size(); ++j) {
        const double r = m.at(i, j);
        out << ',' << (std::isnan(r) ? std::string("nan") : fmt::format("{}", r));
      }
      out << '\n';
    }
  }
}

void write_overlap_csv(std::span<const OverlapPoint> points, std::ostream& out) {
  out << "k,jaccard,expected_random_jaccard,universe\n";
  for (const auto& p : points) {
    out << fmt::format("{},{},{},{}\n", p.k, p.jaccard, p.expected_random, p.universe);
  }
}

}  // namespace strata::lab
