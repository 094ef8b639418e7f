#ifndef STRATA_APP_H_
#define STRATA_APP_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "strata/config.h"
#include "strata/embed.h"
#include "strata/forest.h"
#include "strata/lexicon.h"
#include "strata/textnorm.h"

namespace strata::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

textnorm::NormalizationTable make_table(const RunConfig& config);

// Normalized sentences of the concatenated files, with lexicon variants
// rewritten to their main surfaces when a lexicon is given.
std::vector<textnorm::Sentence> read_corpus(const std::vector<std::filesystem::path>& files,
                                            const textnorm::NormalizationTable& table,
                                            const lexicon::Lexicon* lexicon);

struct LabeledData {
  forest::Dataset dataset;
  // The lexicon restricted to the pairs in `dataset`.
  lexicon::Lexicon lexicon;
  std::vector<int64_t> dropped_pairs;
};

// One sample per lexicon entry, in lexicon order, with the entry's word
// vector as features and its pair id as group. Pairs with a member missing
// from the model are dropped (lenient) or rejected with DataError (strict).
LabeledData build_dataset(const lexicon::Lexicon& lexicon, const embed::EmbeddingModel& model,
                          lexicon::ValidationMode mode);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Runs one subcommand; `args` excludes the program name. Diagnostics go to
// `err`, the run directory path to `out`. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace strata::app

#endif  // STRATA_APP_H_
