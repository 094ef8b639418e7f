#ifndef STRATA_LAB_H_
#define STRATA_LAB_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strata/embed.h"
#include "strata/forest.h"
#include "strata/lexicon.h"

namespace strata::lab {

enum class SplitUnit { kWord, kPair };

std::string_view split_unit_name(SplitUnit unit);
std::optional<SplitUnit> parse_split_unit(std::string_view name);

struct EvalProtocol {
  int iterations = 1000;
  double test_fraction = 0.2;
  SplitUnit split_unit = SplitUnit::kWord;
  uint64_t master_seed = 0;
  // forest.seed is ignored: each iteration derives its own.
  forest::ForestParams forest;
  int workers = 1;
  // Single-class training splits are redrawn at most this many times per
  // iteration before the run fails.
  int max_resamples = 1000;

  // Throws ConfigError.
  void validate() const;
};

struct WordRecord {
  std::string word;
  Origin origin = Origin::kSanskrit;
  int64_t group = 0;
  uint64_t times_in_test = 0;
  uint64_t times_misclassified = 0;
};

struct IterationRecord {
  uint64_t seed = 0;
  size_t n_test = 0;
  size_t n_errors = 0;
  double accuracy = 0.0;
  // Redrawn splits whose training side had a single class.
  int resamples = 0;
};

// Cumulative per-word error counts over repeated random splits, with the
// raw per-iteration log. Words are in dataset order.
struct MisclassTable {
  std::vector<WordRecord> words;
  std::vector<IterationRecord> iterations;

  uint64_t total_resamples() const;
  double mean_accuracy() const;
  // Sample standard deviation (n - 1); 0 for a single iteration.
  double std_accuracy() const;
  std::vector<double> accuracies() const;
};

struct IterationOutcome {
  IterationRecord record;
  std::vector<size_t> test_rows;
  std::vector<bool> correct;
};

// One train/evaluate round. Iteration i draws its split from
// Rng(split_mix(split_mix(master_seed, i), 0)) and seeds its forest with
// split_mix(split_mix(master_seed, i), 1).
IterationOutcome run_iteration(const forest::Dataset& data,
                               const EvalProtocol& protocol, uint64_t index);

// Throws DataError for fewer than 10 samples or a split that stays
// single-class after max_resamples redraws.
MisclassTable repeated_eval(const forest::Dataset& data,
                            const EvalProtocol& protocol);

struct RankedWord {
  std::string word;
  Origin origin = Origin::kSanskrit;
  int64_t group = 0;
  uint64_t errors = 0;
  uint64_t times_in_test = 0;
};

struct ErrorRanking {
  // Descending error count; ties keep table order.
  std::vector<RankedWord> words;
  uint64_t total_errors = 0;
  // Share of all errors made on the top ceil(20%) of words.
  double top20_share = 0.0;
};

ErrorRanking rank_errors(const MisclassTable& table);

struct OriginShare {
  size_t k = 0;
  uint64_t errors = 0;
  // Both 0 when the top k words have no errors.
  double sanskrit = 0.0;
  double perso_arabic = 0.0;
};

// Split of the errors made on the k most misclassified words by origin.
// k is clipped to the number of words.
OriginShare origin_error_share(const MisclassTable& table, size_t k);

enum class SweepParameter { kNEstimators, kMaxDepth, kCriterion };

std::string_view sweep_parameter_name(SweepParameter p);
std::optional<SweepParameter> parse_sweep_parameter(std::string_view name);

struct SweepPoint {
  // Grid value; for kCriterion 0 = gini, 1 = entropy.
  int value = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double std_error = 0.0;
  int repetitions = 0;
};

// For every grid value, `repetitions` rounds of repeated_eval with that
// parameter overridden. Repetition r uses the same split at every grid
// value.
std::vector<SweepPoint> hyperparam_sweep(const forest::Dataset& data,
                                         const EvalProtocol& protocol,
                                         SweepParameter parameter,
                                         std::span<const int> grid,
                                         int repetitions);

struct AblationPoint {
  size_t n_dims = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int repetitions = 0;
};

using AblationCurve = std::vector<AblationPoint>;

// Accuracy using only the first n feature columns.
AblationCurve prefix_ablation(const forest::Dataset& data,
                              const EvalProtocol& protocol,
                              std::span<const size_t> n_grid, int repetitions);

// Accuracy using n feature columns drawn uniformly without replacement,
// redrawn for every repetition. Drawn columns keep their original order.
AblationCurve random_dim_ablation(const forest::Dataset& data,
                                  const EvalProtocol& protocol,
                                  std::span<const size_t> n_grid,
                                  int repetitions);

// The k most misclassified words (by rank_errors).
std::vector<std::string> top_words(const MisclassTable& table, size_t k);

// Drops the k most misclassified words and reruns repeated_eval.
MisclassTable exclude_and_retrain(const forest::Dataset& data,
                                  const MisclassTable& table, size_t k,
                                  const EvalProtocol& protocol);

// Throws DataError for mismatched lengths or fewer than two points and
// UndefinedError for a constant input.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
  std::vector<std::string> variables;
  // Row-major, variables.size() squared. Undefined entries (a constant
  // variable) are NaN; the diagonal is always 1.
  std::vector<double> values;

  double at(size_t i, size_t j) const { return values[i * variables.size() + j]; }
};

// Pearson correlations over the words of `table` between error_count,
// log10_frequency, signed_freq_diff, pair_cosine and raw frequency.
// Frequencies come from pair_stats (indexed like lexicon entries).
CorrelationMatrix correlation_matrix(const MisclassTable& table,
                                     const lexicon::Lexicon& lexicon,
                                     std::span<const lexicon::PairStats> stats,
                                     const embed::EmbeddingModel& model);

// |A n B| / |A u B|; two empty sets give 1.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// E[J] for two independent uniform k-subsets of an n-element universe.
double expected_random_jaccard(size_t universe, size_t k);

struct OverlapPoint {
  size_t k = 0;
  double jaccard = 0.0;
  double expected_random = 0.0;
  size_t universe = 0;
};

// Jaccard of the top-k misclassified sets of two runs, ranked over the
// words both tables contain.
std::vector<OverlapPoint> cross_corpus_overlap(const MisclassTable& a,
                                               const MisclassTable& b,
                                               std::span<const size_t> k_list);

// CSV writers for the run directory files.
void write_misclass_csv(const MisclassTable& table, std::ostream& out);
void write_iterations_csv(const MisclassTable& table, std::ostream& out);
// Reads the words of a misclass.csv file back (iterations stay empty).
MisclassTable read_misclass_csv(std::istream& in);
void write_sweep_csv(SweepParameter parameter, std::span<const SweepPoint> points,
                     std::ostream& out);
void write_ablation_csv(const AblationCurve& curve, std::ostream& out);
// `panels` pairs a panel name with its matrix.
void write_correlation_csv(
    std::span<const std::pair<std::string, CorrelationMatrix>> panels,
    std::ostream& out);
void write_overlap_csv(std::span<const OverlapPoint> points, std::ostream& out);

}  // namespace strata::lab

#endif  // STRATA_LAB_H_
