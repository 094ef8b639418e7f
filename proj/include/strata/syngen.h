#ifndef STRATA_SYNGEN_H_
#define STRATA_SYNGEN_H_

#include <cstdint>
#include <string>

#include "strata/forest.h"

namespace strata::syngen {

// A corpus with two planted strata. Each pair i shares a meaning whose
// topic words both members co-occur with; with probability `separation` a
// sentence instead draws its context from the target's own stratum pool.
struct SynthConfig {
  int n_pairs = 100;
  // Size of each stratum's marker-word pool.
  int n_context_words = 50;
  double separation = 0.9;
  // Average sentences per target word; a pair gets 2x this in total.
  int sentences_per_word = 500;
  // Tokens per sentence, target included.
  int sentence_length = 10;
  // Within-pair frequency skew: the minor member's count relative to the
  // major one is r^-zipf_exponent with r uniform in [1, 10] per pair.
  double zipf_exponent = 0.0;
  // Topic words per meaning in the shared pool.
  int topic_words = 5;
  // Meaning-independent words in the shared pool.
  int common_words = 100;
  // Fraction of target words (individually chosen) generated with
  // weak_separation instead of separation.
  double weak_fraction = 0.0;
  double weak_separation = 0.2;
  // Devanagari surfaces with precomposed nuqta letters on the
  // Perso-Arabic side.
  bool devanagari = false;
  uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct SynthCorpus {
  // One sentence per line, each ending in a terminator.
  std::string text;
  // Lexicon TSV of the target words.
  std::string lexicon_tsv;
  uint64_t tokens = 0;
};

SynthCorpus generate(const SynthConfig& config);

struct PlantConfig {
  int n_samples = 400;
  int dim = 50;
  // Labels are PERSO_ARABIC iff this coordinate is positive.
  int informative_dim = 10;
  uint64_t seed = 1;
};

// Standard-normal features whose labels depend only on the sign of one
// coordinate. Words are "w0000", ...; consecutive samples share a group.
forest::Dataset plant_single_dimension(const PlantConfig& config);

}  // namespace strata::syngen

#endif  // STRATA_SYNGEN_H_
