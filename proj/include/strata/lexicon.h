#ifndef STRATA_LEXICON_H_
#define STRATA_LEXICON_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strata/textnorm.h"

namespace strata {

// Enum order matters: SANSKRIT is the first value and wins every tie.
enum class Origin : uint8_t { kSanskrit = 0, kPersoArabic = 1 };

std::string_view origin_name(Origin origin);
std::optional<Origin> parse_origin(std::string_view tag);

}  // namespace strata

namespace strata::lexicon {

struct LexiconEntry {
  std::string surface;
  Origin origin = Origin::kSanskrit;
  int64_t pair_id = 0;
  std::string gloss;
  std::vector<std::string> variants;
};

// A validated synonym-pair list: every pair id has exactly one SANSKRIT and
// one PERSO_ARABIC member, and no surface (main or variant) occurs twice.
class Lexicon {
 public:
  Lexicon() = default;

  // Validates and indexes already-normalized entries. Throws DataError.
  static Lexicon from_entries(std::vector<LexiconEntry> entries);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::optional<size_t> find(std::string_view surface) const;
  // Index of the other member of entries()[index]'s pair.
  size_t partner(size_t index) const { return partner_[index]; }

  // Variant surface -> main surface, for corpus rewriting and lookups.
  textnorm::AliasMap aliases() const;
  // Main surface for a main or variant surface; the input otherwise.
  std::string canonical(std::string_view surface) const;

  // Keeps only entries whose pair id is not in `pair_ids`.
  Lexicon without_pairs(const std::vector<int64_t>& pair_ids) const;

 private:
  std::vector<LexiconEntry> entries_;
  std::vector<size_t> partner_;
  std::unordered_map<std::string, size_t> index_;  // main surfaces
  std::unordered_map<std::string, size_t> variant_index_;
};

// Format, one entry per line:
//   surface<TAB>origin<TAB>pair_id<TAB>gloss<TAB>variant1,variant2
// gloss and variants may be empty or omitted. '#' lines and blank lines are
// skipped. Surfaces and variants are normalized with `table`. Errors name the
// offending line.
Lexicon parse_lexicon(std::string_view text,
                      const textnorm::NormalizationTable& table);
Lexicon load_lexicon(const std::filesystem::path& path,
                     const textnorm::NormalizationTable& table);

void save_lexicon(const Lexicon& lexicon, std::ostream& out);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

enum class ValidationMode { kStrict, kLenient };

struct ValidationIssue {
  std::string surface;
  int64_t pair_id = 0;
  // Absent from the vocabulary, or present with count below the warning
  // threshold.
  bool missing = false;
  uint64_t count = 0;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::vector<int64_t> dropped_pairs;
  // The lexicon restricted to complete pairs (unchanged when nothing is
  // missing).
  Lexicon kept;
};

// Checks every main surface against the vocabulary. Strict mode throws
// DataError naming the first missing word; lenient mode drops whole pairs.
ValidationReport validate_against_vocab(const Lexicon& lexicon,
                                        const textnorm::Vocabulary& vocab,
                                        ValidationMode mode,
                                        uint64_t warn_below = 0);

struct PairStats {
  std::string surface;
  uint64_t raw_count = 0;
  double rel_share = 0.0;
  double signed_diff = 0.0;
};

// Per-entry frequency statistics from raw corpus counts. The entry count is
// the sum of the main surface and variant counts present in the vocabulary.
// Throws UndefinedError when a pair has zero total count.
std::vector<PairStats> pair_stats(const Lexicon& lexicon,
                                  const textnorm::Vocabulary& vocab);

}  // namespace strata::lexicon

#endif  // STRATA_LEXICON_H_
