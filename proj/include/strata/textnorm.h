#ifndef STRATA_TEXTNORM_H_
#define STRATA_TEXTNORM_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace strata::textnorm {

inline constexpr char32_t kNuqta = 0x093C;

struct NormalizationRule {
  std::u32string source;
  std::u32string target;
};

// Ordered rewrite rules applied left to right with longest-match, followed
// by optional removal of every nuqta sign. Construction validates that the
// table is idempotent on its own output; violations raise ConfigError.
class NormalizationTable {
 public:
  // Canonical decompositions of the precomposed nuqta letters
  // (U+0929, U+0931, U+0934, U+0958..U+095F) to base + U+093C.
  static NormalizationTable default_table(bool fold_nuqta = false);

  static NormalizationTable from_rules(std::vector<NormalizationRule> rules,
                                       bool fold_nuqta);

  // Default rules extended by the rules in `path`.
  static NormalizationTable load(const std::filesystem::path& path,
                                 bool fold_nuqta);

  // Parses "SOURCE<TAB>TARGET" lines, each side a space-separated list of
  // hexadecimal code points (an optional "U+" prefix is accepted). Blank
  // lines and lines starting with '#' are skipped. An empty TARGET deletes
  // the source.
  static std::vector<NormalizationRule> parse_rules(std::string_view text);

  std::u32string apply(std::u32string_view text) const;
  std::string apply(std::string_view utf8_text) const;

  const std::vector<NormalizationRule>& rules() const { return rules_; }
  bool fold_nuqta() const { return fold_nuqta_; }

 private:
  NormalizationTable(std::vector<NormalizationRule> rules, bool fold_nuqta);

  std::vector<NormalizationRule> rules_;
  bool fold_nuqta_ = false;
  // First code point -> rule indices, longest source first.
  std::unordered_map<char32_t, std::vector<size_t>> by_first_;
};

using Sentence = std::vector<std::string>;

bool is_sentence_break(char32_t cp);
bool is_space(char32_t cp);
bool is_punctuation(char32_t cp);

// Canonicalizes and tokenizes raw UTF-8 text. Sentences end at danda,
// double danda, line breaks and ASCII '.', '!', '?'. Tokens are split on
// whitespace with leading and trailing punctuation stripped; tokens that
// are pure punctuation are dropped, and so are empty sentences.
std::vector<Sentence> normalize(std::string_view raw_text,
                                const NormalizationTable& table);

// Single-token form of normalize(), used for lexicon entries and vocabulary
// queries. Returns an empty string for pure punctuation.
std::string normalize_token(std::string_view surface,
                            const NormalizationTable& table);

// Replaces every token found in `aliases` by its mapped surface.
using AliasMap = std::unordered_map<std::string, std::string>;
void apply_aliases(std::vector<Sentence>& sentences, const AliasMap& aliases);

// Raw token frequencies. Partial counts from independent shards combine
// with merge(), which is associative and commutative.
class TokenCounts {
 public:
  void add(std::string_view token, uint64_t n = 1);
  void add(const std::vector<Sentence>& sentences);
  void merge(const TokenCounts& other);

  uint64_t total() const { return total_; }
  const std::unordered_map<std::string, uint64_t>& counts() const {
    return counts_;
  }

 private:
  std::unordered_map<std::string, uint64_t> counts_;
  uint64_t total_ = 0;
};

struct VocabEntry {
  std::string surface;
  uint64_t count = 0;
};

// Frequency-filtered vocabulary. Ids are dense, assigned by descending
// count with ties broken by code point order of the surface.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(const TokenCounts& counts, uint64_t min_count);
  static Vocabulary build(const std::vector<Sentence>& sentences,
                          uint64_t min_count);

  std::optional<int32_t> id(std::string_view surface) const;
  std::optional<uint64_t> count(std::string_view surface) const;
  const std::string& surface(int32_t id) const { return entries_[id].surface; }
  uint64_t count(int32_t id) const { return entries_[id].count; }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  uint64_t total_tokens() const { return total_tokens_; }
  uint64_t min_count() const { return min_count_; }
  const std::vector<VocabEntry>& entries() const { return entries_; }

  // "surface<TAB>id<TAB>count" per line, sorted by id.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  // total_tokens of a loaded vocabulary is the sum of stored counts and
  // min_count the smallest stored count.
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, int32_t> index_;
  uint64_t total_tokens_ = 0;
  uint64_t min_count_ = 1;
};

// Sentences of vocabulary ids; out-of-vocabulary tokens are dropped.
using TokenStream = std::vector<std::vector<int32_t>>;

TokenStream encode(const std::vector<Sentence>& sentences,
                   const Vocabulary& vocab);

// Looks up `surface` after normalizing it with `table`.
std::optional<uint64_t> frequency(const Vocabulary& vocab,
                                  std::string_view surface,
                                  const NormalizationTable& table);

}  // namespace strata::textnorm

#endif  // STRATA_TEXTNORM_H_
