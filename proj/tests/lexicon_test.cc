#include <gtest/gtest.h>

#include <sstream>

#include "strata/error.h"
#include "strata/lexicon.h"

namespace strata::lexicon {
namespace {

using textnorm::NormalizationTable;
using textnorm::Vocabulary;

const NormalizationTable& table() {
  static const auto t = NormalizationTable::default_table();
  return t;
}

Vocabulary vocab_of(std::initializer_list<std::pair<const char*, int>> counts) {
  textnorm::TokenCounts c;
  for (const auto& [w, n] : counts) c.add(w, static_cast<uint64_t>(n));
  return Vocabulary::build(c, 1);
}

TEST(ParseLexicon, WellFormedPair) {
  const auto lex = parse_lexicon("देश\tSANSKRIT\t1\tcountry\t\nमुल्क\tPERSO_ARABIC\t1\tcountry\n",
                                 table());
  ASSERT_EQ(lex.size(), 2u);
  EXPECT_EQ(lex.entries()[0].pair_id, lex.entries()[1].pair_id);
  EXPECT_EQ(lex.partner(0), 1u);
  EXPECT_EQ(lex.entries()[1].origin, Origin::kPersoArabic);
}

TEST(ParseLexicon, TwoSanskritMembersRejected) {
  EXPECT_THROW(parse_lexicon("a\tSANSKRIT\t1\nb\tSANSKRIT\t1\n", table()), DataError);
}

TEST(ParseLexicon, OddPairRejected) {
  EXPECT_THROW(parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\nc\tSANSKRIT\t2\n", table()),
               DataError);
}

TEST(ParseLexicon, DuplicateSurfaceRejected) {
  EXPECT_THROW(parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n"
                             "a\tSANSKRIT\t2\nc\tPERSO_ARABIC\t2\n",
                             table()),
               DataError);
  // Precomposed and decomposed spellings are the same surface.
  EXPECT_THROW(parse_lexicon("क़\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n"
                             "क़\tSANSKRIT\t2\nc\tPERSO_ARABIC\t2\n",
                             table()),
               DataError);
}

TEST(ParseLexicon, UnknownOriginNamesLine) {
  try {
    parse_lexicon("# header\na\tSANSKRIT\t1\nb\tARABIC\t1\n", table());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ParseLexicon, NormalizesSurfacesAndVariants) {
  const auto lex = parse_lexicon("राष्ट्र\tSANSKRIT\t0\tnation\t\n"
                                 "क़ौम\tPERSO_ARABIC\t0\tnation\tकौम,क़ौम\n",
                                 table());
  EXPECT_EQ(lex.entries()[1].surface, "क़ौम");
  EXPECT_EQ(lex.entries()[1].variants, std::vector<std::string>{"कौम"});
  EXPECT_EQ(lex.canonical("कौम"), "क़ौम");
  EXPECT_EQ(lex.find("क़ौम"), 1u);
}

TEST(Lexicon, SerializeRoundTrip) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t3\tgloss one\tx,y\nb\tPERSO_ARABIC\t3\t\t\n"
                                 "c\tSANSKRIT\t4\t\t\nd\tPERSO_ARABIC\t4\tg\tz\n",
                                 table());
  std::stringstream ss;
  save_lexicon(lex, ss);
  const auto again = parse_lexicon(ss.str(), table());
  ASSERT_EQ(again.size(), lex.size());
  for (size_t i = 0; i < lex.size(); ++i) {
    const auto& a = lex.entries()[i];
    const auto& b = again.entries()[i];
    EXPECT_EQ(a.surface, b.surface);
    EXPECT_EQ(a.origin, b.origin);
    EXPECT_EQ(a.pair_id, b.pair_id);
    EXPECT_EQ(a.gloss, b.gloss);
    EXPECT_EQ(a.variants, b.variants);
  }
  std::stringstream ss2;
  save_lexicon(again, ss2);
  EXPECT_EQ(ss.str(), ss2.str());
}

TEST(Lexicon, BundledSample) {
  const auto lex = load_lexicon(STRATA_DATA_DIR "/sample_lexicon.tsv", table());
  EXPECT_GE(lex.size(), 40u);
  for (const char* pair : {"राष्ट्र", "क़ौम", "धर्म", "मज़हब", "सेना", "फ़ौज", "देश", "मुल्क"}) {
    EXPECT_TRUE(lex.find(normalize_token(pair, table()))) << pair;
  }
  const auto desh = *lex.find("देश");
  EXPECT_EQ(lex.entries()[lex.partner(desh)].surface, "मुल्क");
}

TEST(Validate, AllPresent) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n", table());
  const auto report = validate_against_vocab(lex, vocab_of({{"a", 5}, {"b", 5}}),
                                             ValidationMode::kStrict);
  EXPECT_TRUE(report.issues.empty());
  EXPECT_EQ(report.kept.size(), 2u);
}

TEST(Validate, LenientDropsWholePair) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n"
                                 "c\tSANSKRIT\t2\nd\tPERSO_ARABIC\t2\n",
                                 table());
  const auto report = validate_against_vocab(lex, vocab_of({{"a", 5}, {"b", 5}, {"c", 5}}),
                                             ValidationMode::kLenient);
  EXPECT_EQ(report.dropped_pairs, std::vector<int64_t>{2});
  ASSERT_EQ(report.kept.size(), 2u);
  EXPECT_FALSE(report.kept.find("c"));
}

TEST(Validate, StrictNamesMissingWord) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nmissingword\tPERSO_ARABIC\t1\n", table());
  try {
    validate_against_vocab(lex, vocab_of({{"a", 5}}), ValidationMode::kStrict);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missingword"), std::string::npos);
  }
}

TEST(Validate, WarnsBelowThreshold) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n", table());
  const auto report = validate_against_vocab(lex, vocab_of({{"a", 50}, {"b", 3}}),
                                             ValidationMode::kStrict, 10);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].surface, "b");
  EXPECT_FALSE(report.issues[0].missing);
  EXPECT_EQ(report.kept.size(), 2u);
}

TEST(PairStats, SharesFromCounts) {
  const auto lex = parse_lexicon("deś\tSANSKRIT\t1\nmulk\tPERSO_ARABIC\t1\n"
                                 "x\tSANSKRIT\t2\ny\tPERSO_ARABIC\t2\n"
                                 "p\tSANSKRIT\t3\nq\tPERSO_ARABIC\t3\n",
                                 table());
  const auto stats = pair_stats(
      lex, vocab_of({{"deś", 9778}, {"mulk", 221}, {"x", 7}, {"y", 7}, {"p", 3}, {"q", 1}}));
  EXPECT_NEAR(stats[0].rel_share, 0.9779, 1e-4);
  EXPECT_NEAR(stats[1].rel_share, 0.0221, 1e-4);
  EXPECT_EQ(stats[2].signed_diff, 0.0);
  EXPECT_EQ(stats[3].signed_diff, 0.0);
  EXPECT_EQ(stats[4].rel_share, 0.75);
  EXPECT_EQ(stats[5].rel_share, 0.25);
  EXPECT_EQ(stats[4].raw_count, 3u);
}

TEST(PairStats, VariantCountsAreSummed) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\t\tb2\n", table());
  const auto stats = pair_stats(lex, vocab_of({{"a", 4}, {"b", 2}, {"b2", 2}}));
  EXPECT_EQ(stats[1].raw_count, 4u);
  EXPECT_EQ(stats[0].rel_share, 0.5);
}

TEST(PairStats, ZeroTotalIsUndefined) {
  const auto lex = parse_lexicon("a\tSANSKRIT\t1\nb\tPERSO_ARABIC\t1\n", table());
  EXPECT_THROW(pair_stats(lex, vocab_of({{"z", 1}})), UndefinedError);
}

TEST(PairStatsProperty, SharesAreComplementaryExactly) {
  std::string text;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    text += "s" + std::to_string(i) + "\tSANSKRIT\t" + std::to_string(i) + "\n";
    text += "p" + std::to_string(i) + "\tPERSO_ARABIC\t" + std::to_string(i) + "\n";
  }
  const auto lex = parse_lexicon(text, table());
  textnorm::TokenCounts counts;
  for (int i = 0; i < n; ++i) {
    counts.add("s" + std::to_string(i), static_cast<uint64_t>(1 + (i * 7919) % 1013));
    counts.add("p" + std::to_string(i), static_cast<uint64_t>(1 + (i * 104729) % 997));
  }
  const auto stats = pair_stats(lex, Vocabulary::build(counts, 1));
  for (size_t i = 0; i < lex.size(); ++i) {
    const size_t j = lex.partner(i);
    EXPECT_EQ(stats[i].rel_share + stats[j].rel_share, 1.0);
    EXPECT_GE(stats[i].signed_diff, -0.5);
    EXPECT_LE(stats[i].signed_diff, 0.5);
  }
}

}  // namespace
}  // namespace strata::lexicon
