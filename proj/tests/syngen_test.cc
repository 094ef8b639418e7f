#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "strata/error.h"
#include "strata/lexicon.h"
#include "strata/syngen.h"
#include "strata/textnorm.h"

namespace strata::syngen {
namespace {

SynthConfig small(uint64_t seed = 1) {
  SynthConfig c;
  c.n_pairs = 10;
  c.sentences_per_word = 40;
  c.seed = seed;
  return c;
}

std::map<std::string, uint64_t> token_counts(const std::string& text) {
  std::map<std::string, uint64_t> counts;
  std::istringstream in(text);
  std::string token;
  while (in >> token) ++counts[token];
  return counts;
}

TEST(Generate, Deterministic) {
  const auto a = generate(small(3));
  const auto b = generate(small(3));
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.lexicon_tsv, b.lexicon_tsv);
  EXPECT_NE(generate(small(4)).text, a.text);
}

TEST(Generate, ShapeAndTokenCount) {
  const auto c = small();
  const auto corpus = generate(c);
  uint64_t lines = 0, tokens = 0;
  std::istringstream in(corpus.text);
  std::string line;
  while (std::getline(in, line)) {
    ++lines;
    std::istringstream words(line);
    std::string w;
    uint64_t n = 0;
    while (words >> w) ++n;
    // Sentence tokens plus the terminator.
    EXPECT_EQ(n, static_cast<uint64_t>(c.sentence_length) + 1);
    EXPECT_EQ(w, ".");
    tokens += n - 1;
  }
  EXPECT_EQ(lines, static_cast<uint64_t>(2 * c.n_pairs * c.sentences_per_word));
  EXPECT_EQ(tokens, corpus.tokens);
}

TEST(Generate, LexiconValidatesAgainstCorpus) {
  const auto corpus = generate(small());
  const auto& table = textnorm::NormalizationTable::default_table();
  const auto lex = lexicon::parse_lexicon(corpus.lexicon_tsv, table);
  EXPECT_EQ(lex.size(), 20u);
  textnorm::TokenCounts counts;
  for (const auto& s : textnorm::normalize(corpus.text, table)) {
    for (const auto& t : s) counts.add(t);
  }
  const auto vocab = textnorm::Vocabulary::build(counts, 1);
  const auto report = lexicon::validate_against_vocab(lex, vocab, lexicon::ValidationMode::kStrict, 5);
  EXPECT_TRUE(report.issues.empty());
}

// Mean |log(count_s / count_p)| over pairs.
double mean_log_ratio(double zipf) {
  auto c = small(9);
  c.n_pairs = 40;
  c.zipf_exponent = zipf;
  auto counts = token_counts(generate(c).text);
  double total = 0;
  for (int i = 0; i < c.n_pairs; ++i) {
    const auto s = static_cast<double>(counts[fmt::format("s{:03}", i)]);
    const auto p = static_cast<double>(counts[fmt::format("p{:03}", i)]);
    total += std::abs(std::log(s / p));
  }
  return total / c.n_pairs;
}

TEST(Generate, ZipfExponentWidensFrequencyGaps) {
  const double g0 = mean_log_ratio(0.0);
  const double g1 = mean_log_ratio(1.0);
  const double g2 = mean_log_ratio(2.0);
  EXPECT_LT(g0, 0.2);
  EXPECT_LT(g0, g1);
  EXPECT_LT(g1, g2);
}

TEST(Generate, DevanagariSurvivesNormalization) {
  auto c = small();
  c.devanagari = true;
  const auto corpus = generate(c);
  const auto& table = textnorm::NormalizationTable::default_table();
  const auto lex = lexicon::parse_lexicon(corpus.lexicon_tsv, table);
  textnorm::TokenCounts counts;
  const auto sentences = textnorm::normalize(corpus.text, table);
  EXPECT_EQ(sentences.size(), static_cast<size_t>(2 * c.n_pairs * c.sentences_per_word));
  for (const auto& s : sentences) {
    for (const auto& t : s) counts.add(t);
  }
  const auto vocab = textnorm::Vocabulary::build(counts, 1);
  for (const auto& e : lex.entries()) {
    EXPECT_TRUE(vocab.id(e.surface).has_value()) << e.surface;
    EXPECT_EQ(textnorm::normalize_token(e.surface, table), e.surface);
  }
}

TEST(Generate, InvalidConfigRejected) {
  auto c = small();
  c.separation = 1.5;
  EXPECT_THROW(generate(c), ConfigError);
  c = small();
  c.n_pairs = 0;
  EXPECT_THROW(generate(c), ConfigError);
}

TEST(PlantSingleDimension, LabelsFollowSign) {
  PlantConfig c;
  c.n_samples = 300;
  c.dim = 5;
  c.informative_dim = 3;
  const auto d = plant_single_dimension(c);
  ASSERT_EQ(d.size(), 300u);
  EXPECT_EQ(d.feature_count, 5u);
  size_t perso = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    const auto& s = d.samples[i];
    EXPECT_EQ(s.label == Origin::kPersoArabic, s.features[3] > 0);
    EXPECT_EQ(s.group, static_cast<int64_t>(i / 2));
    perso += s.label == Origin::kPersoArabic;
  }
  EXPECT_GT(perso, 100u);
  EXPECT_LT(perso, 200u);
  EXPECT_EQ(d.samples[7].word, "w0007");
  c.informative_dim = 5;
  EXPECT_THROW(plant_single_dimension(c), ConfigError);
}

}  // namespace
}  // namespace strata::syngen
