#include "strata/syngen.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "strata/error.h"
#include "strata/random.h"
#include "strata/utf8.h"

namespace strata::syngen {

void SynthConfig::validate() const {
  if (n_pairs < 1 || n_context_words < 1 || sentences_per_word < 1 ||
      sentence_length < 2 || topic_words < 1 || common_words < 1) {
    throw ConfigError("syngen counts must be >= 1 (sentence_length >= 2)");
  }
  if (!(separation >= 0.0 && separation <= 1.0) ||
      !(weak_separation >= 0.0 && weak_separation <= 1.0)) {
    throw ConfigError("syngen separation must lie in [0, 1]");
  }
  if (!(weak_fraction >= 0.0 && weak_fraction <= 1.0)) {
    throw ConfigError("syngen.weak_fraction must lie in [0, 1]");
  }
  if (!(zipf_exponent >= 0.0) || !std::isfinite(zipf_exponent)) {
    throw ConfigError("syngen.zipf_exponent must be finite and >= 0");
  }
}

namespace {

enum class Kind { kSanskritTarget, kPersianTarget, kSanskritContext, kPersianContext, kTopic, kCommon };

// Word names. ASCII mode: s017, p017, ctx_s_3, ctx_p_3, t017_2, c_41.
// Devanagari mode writes the index in digits mapped to consonants after a
// kind-specific prefix; Perso-Arabic kinds use precomposed nuqta letters.
class Namer {
 public:
  explicit Namer(bool devanagari) : devanagari_(devanagari) {}

  std::string name(Kind kind, int index, int sub = 0) const {
    if (!devanagari_) {
      switch (kind) {
        case Kind::kSanskritTarget: return fmt::format("s{:03}", index);
        case Kind::kPersianTarget: return fmt::format("p{:03}", index);
        case Kind::kSanskritContext: return fmt::format("ctx_s_{}", index);
        case Kind::kPersianContext: return fmt::format("ctx_p_{}", index);
        case Kind::kTopic: return fmt::format("t{:03}_{}", index, sub);
        case Kind::kCommon: return fmt::format("c_{}", index);
      }
    }
    std::string out;
    switch (kind) {
      case Kind::kSanskritTarget: utf8::append(out, 0x0938); break;   // स
      case Kind::kPersianTarget: utf8::append(out, 0x095E); break;    // फ़
      case Kind::kSanskritContext: utf8::append(out, 0x0936); break;  // श
      case Kind::kPersianContext: utf8::append(out, 0x095B); break;   // ज़
      case Kind::kTopic: utf8::append(out, 0x0925); break;            // थ
      case Kind::kCommon: utf8::append(out, 0x0926); break;           // द
    }
    append_digits(out, index);
    if (kind == Kind::kTopic) {
      utf8::append(out, 0x093E);  // vowel sign aa separates the two numbers
      append_digits(out, sub);
    }
    return out;
  }

 private:
  static void append_digits(std::string& out, int value) {
    static constexpr char32_t kDigits[] = {0x0915, 0x0916, 0x0917, 0x0918, 0x091A,
                                           0x091B, 0x091C, 0x091D, 0x091F, 0x0920};
    const std::string digits = std::to_string(value);
    for (char d : digits) utf8::append(out, kDigits[d - '0']);
  }

  bool devanagari_;
};

struct Target {
  int pair = 0;
  Origin origin = Origin::kSanskrit;
  double separation = 0.0;
  int sentences = 0;
};

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Namer namer(config.devanagari);

  // Frequency skew per pair. The draws happen for every exponent so a
  // fixed seed gives the same pairs at every skew level.
  std::vector<Target> targets;
  for (int i = 0; i < config.n_pairs; ++i) {
    const double rank = 1.0 + 9.0 * unit(rng);
    const bool sanskrit_major = unit(rng) < 0.5;
    const double ratio = std::pow(rank, -config.zipf_exponent);
    const int total = 2 * config.sentences_per_word;
    int major = static_cast<int>(std::lround(total / (1.0 + ratio)));
    major = std::clamp(major, 1, total - 1);
    const int minor = total - major;
    targets.push_back({i, Origin::kSanskrit, config.separation,
                       sanskrit_major ? major : minor});
    targets.push_back({i, Origin::kPersoArabic, config.separation,
                       sanskrit_major ? minor : major});
  }
  const auto n_weak = static_cast<size_t>(
      std::lround(config.weak_fraction * static_cast<double>(targets.size())));
  {
    std::vector<size_t> order(targets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i = 0; i < n_weak; ++i) targets[order[i]].separation = config.weak_separation;
  }

  std::vector<std::pair<uint32_t, uint32_t>> jobs;  // (target, sentence)
  for (size_t t = 0; t < targets.size(); ++t) {
    for (int s = 0; s < targets[t].sentences; ++s) {
      jobs.emplace_back(static_cast<uint32_t>(t), static_cast<uint32_t>(s));
    }
  }
  std::shuffle(jobs.begin(), jobs.end(), rng);

  std::uniform_int_distribution<int> context_word(0, config.n_context_words - 1);
  std::uniform_int_distribution<int> topic_word(0, config.topic_words - 1);
  std::uniform_int_distribution<int> common_word(0, config.common_words - 1);
  std::uniform_int_distribution<int> position(0, config.sentence_length - 1);
  const std::string terminator = config.devanagari ? " ।\n" : " .\n";

  SynthCorpus corpus;
  corpus.text.reserve(jobs.size() * static_cast<size_t>(config.sentence_length) * 8);
  for (const auto& [t, s] : jobs) {
    const auto& target = targets[t];
    const bool marked = unit(rng) < target.separation;
    const int target_pos = position(rng);
    for (int k = 0; k < config.sentence_length; ++k) {
      if (k > 0) corpus.text += ' ';
      if (k == target_pos) {
        corpus.text += namer.name(target.origin == Origin::kSanskrit
                                      ? Kind::kSanskritTarget
                                      : Kind::kPersianTarget,
                                  target.pair);
      } else if (marked) {
        corpus.text += namer.name(target.origin == Origin::kSanskrit
                                      ? Kind::kSanskritContext
                                      : Kind::kPersianContext,
                                  context_word(rng));
      } else if (unit(rng) < 0.5) {
        corpus.text += namer.name(Kind::kTopic, target.pair, topic_word(rng));
      } else {
        corpus.text += namer.name(Kind::kCommon, common_word(rng));
      }
    }
    corpus.text += terminator;
    corpus.tokens += static_cast<uint64_t>(config.sentence_length);
  }

  for (const auto& target : targets) {
    const bool sanskrit = target.origin == Origin::kSanskrit;
    corpus.lexicon_tsv += fmt::format(
        "{}\t{}\t{}\tmeaning {}{}\t\n",
        namer.name(sanskrit ? Kind::kSanskritTarget : Kind::kPersianTarget, target.pair),
        origin_name(target.origin), target.pair, target.pair,
        target.separation == config.separation ? "" : " (weak)");
  }
  return corpus;
}

forest::Dataset plant_single_dimension(const PlantConfig& config) {
  if (config.n_samples < 2 || config.dim < 1 || config.informative_dim < 0 ||
      config.informative_dim >= config.dim) {
    throw ConfigError("plant_single_dimension: need n_samples >= 2 and 0 <= j < dim");
  }
  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  forest::Dataset data;
  data.feature_count = static_cast<size_t>(config.dim);
  for (int i = 0; i < config.n_samples; ++i) {
    forest::Sample s;
    s.features.resize(data.feature_count);
    for (auto& x : s.features) x = normal(rng);
    s.label = s.features[config.informative_dim] > 0 ? Origin::kPersoArabic
                                                     : Origin::kSanskrit;
    s.word = fmt::format("w{:04}", i);
    s.group = i / 2;
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace strata::syngen
