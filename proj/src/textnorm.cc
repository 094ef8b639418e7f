#include "strata/textnorm.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "strata/error.h"
#include "strata/utf8.h"

namespace strata::textnorm {

namespace {

std::string hex_sequence(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (!out.empty()) out += ' ';
    out += fmt::format("{:04X}", static_cast<uint32_t>(cp));
  }
  return out;
}

std::u32string parse_hex_sequence(std::string_view field, size_t line_no) {
  std::u32string out;
  size_t i = 0;
  while (i < field.size()) {
    while (i < field.size() && (field[i] == ' ' || field[i] == ',')) ++i;
    if (i >= field.size()) break;
    size_t j = i;
    while (j < field.size() && field[j] != ' ' && field[j] != ',') ++j;
    std::string_view item = field.substr(i, j - i);
    if (item.size() > 2 && (item[0] == 'U' || item[0] == 'u') &&
        item[1] == '+') {
      item.remove_prefix(2);
    }
    uint32_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(item.data(), item.data() + item.size(), value, 16);
    if (ec != std::errc() || ptr != item.data() + item.size() ||
        !utf8::is_scalar(value)) {
      throw ConfigError(fmt::format(
          "rule table line {}: '{}' is not a hexadecimal Unicode scalar",
          line_no, item));
    }
    out.push_back(static_cast<char32_t>(value));
    i = j;
  }
  return out;
}

}  // namespace

NormalizationTable::NormalizationTable(std::vector<NormalizationRule> rules,
                                       bool fold_nuqta)
    : rules_(std::move(rules)), fold_nuqta_(fold_nuqta) {
  for (size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (rule.source.empty()) {
      throw ConfigError(fmt::format("rule {} has an empty source", i + 1));
    }
    for (const auto* side : {&rule.source, &rule.target}) {
      for (char32_t cp : *side) {
        if (!utf8::is_scalar(cp)) {
          throw ConfigError(fmt::format("rule {} contains a non-scalar", i + 1));
        }
      }
    }
    for (size_t j = 0; j < i; ++j) {
      if (rules_[j].source == rule.source) {
        throw ConfigError(fmt::format("rules {} and {} share source {}", j + 1,
                                      i + 1, hex_sequence(rule.source)));
      }
    }
    by_first_[rule.source.front()].push_back(i);
  }
  for (auto& [first, indices] : by_first_) {
    std::stable_sort(indices.begin(), indices.end(), [&](size_t a, size_t b) {
      return rules_[a].source.size() > rules_[b].source.size();
    });
  }
  for (size_t i = 0; i < rules_.size(); ++i) {
    const auto once = apply(std::u32string_view(rules_[i].target));
    if (apply(std::u32string_view(once)) != once ||
        (once != rules_[i].target && !fold_nuqta_)) {
      throw ConfigError(fmt::format(
          "rule {} ({} -> {}) is not idempotent: its target is rewritten again",
          i + 1, hex_sequence(rules_[i].source),
          hex_sequence(rules_[i].target)));
    }
  }
}

NormalizationTable NormalizationTable::default_table(bool fold_nuqta) {
  std::vector<NormalizationRule> rules;
  const std::pair<char32_t, char32_t> decompositions[] = {
      {0x0929, 0x0928}, {0x0931, 0x0930}, {0x0934, 0x0933},
      {0x0958, 0x0915}, {0x0959, 0x0916}, {0x095A, 0x0917},
      {0x095B, 0x091C}, {0x095C, 0x0921}, {0x095D, 0x0922},
      {0x095E, 0x092B}, {0x095F, 0x092F},
  };
  for (const auto& [composed, base] : decompositions) {
    rules.push_back({std::u32string(1, composed), std::u32string{base, kNuqta}});
  }
  return NormalizationTable(std::move(rules), fold_nuqta);
}

NormalizationTable NormalizationTable::from_rules(
    std::vector<NormalizationRule> rules, bool fold_nuqta) {
  return NormalizationTable(std::move(rules), fold_nuqta);
}

std::vector<NormalizationRule> NormalizationTable::parse_rules(
    std::string_view text) {
  std::vector<NormalizationRule> rules;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string_view::npos ||
        line.find('\t', tab + 1) != std::string_view::npos) {
      throw ConfigError(fmt::format(
          "rule table line {}: expected exactly SOURCE<TAB>TARGET", line_no));
    }
    NormalizationRule rule{parse_hex_sequence(line.substr(0, tab), line_no),
                           parse_hex_sequence(line.substr(tab + 1), line_no)};
    if (rule.source.empty()) {
      throw ConfigError(
          fmt::format("rule table line {}: empty SOURCE", line_no));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

NormalizationTable NormalizationTable::load(const std::filesystem::path& path,
                                            bool fold_nuqta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot open rule table {}", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto rules = default_table().rules();
  for (auto& rule : parse_rules(buffer.str())) rules.push_back(std::move(rule));
  return NormalizationTable(std::move(rules), fold_nuqta);
}

std::u32string NormalizationTable::apply(std::u32string_view text) const {
  std::u32string out;
  out.reserve(text.size() + 4);
  size_t i = 0;
  while (i < text.size()) {
    const NormalizationRule* match = nullptr;
    if (auto it = by_first_.find(text[i]); it != by_first_.end()) {
      for (size_t index : it->second) {
        const auto& source = rules_[index].source;
        if (text.substr(i, source.size()) == source) {
          match = &rules_[index];
          break;
        }
      }
    }
    if (match != nullptr) {
      out += match->target;
      i += match->source.size();
    } else {
      out.push_back(text[i]);
      ++i;
    }
  }
  if (fold_nuqta_) std::erase(out, kNuqta);
  return out;
}

std::string NormalizationTable::apply(std::string_view utf8_text) const {
  return utf8::encode(apply(std::u32string_view(utf8::decode(utf8_text))));
}

bool is_sentence_break(char32_t cp) {
  return cp == 0x0964 || cp == 0x0965 || cp == U'\n' || cp == U'\r' ||
         cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x2028 ||
         cp == 0x2029;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\v' || cp == U'\f' ||
         cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000 || cp == 0xFEFF;
}

bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  return cp == 0xA1 || cp == 0xAB || cp == 0xB7 || cp == 0xBB ||
         cp == 0xBF || cp == 0x0964 || cp == 0x0965 || cp == 0x0970 ||
         (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003);
}

namespace {

// Strips punctuation from both ends of [begin, end) and appends the
// remainder to `sentence`.
void push_token(std::u32string_view text, Sentence& sentence) {
  size_t begin = 0;
  size_t end = text.size();
  while (begin < end && is_punctuation(text[begin])) ++begin;
  while (end > begin && is_punctuation(text[end - 1])) --end;
  if (begin < end) sentence.push_back(utf8::encode(text.substr(begin, end - begin)));
}

}  // namespace

std::vector<Sentence> normalize(std::string_view raw_text,
                                const NormalizationTable& table) {
  const std::u32string text = table.apply(std::u32string_view(utf8::decode(raw_text)));
  std::vector<Sentence> sentences;
  Sentence current;
  size_t token_start = 0;
  bool in_token = false;
  auto flush_token = [&](size_t end) {
    if (in_token) {
      push_token(std::u32string_view(text).substr(token_start, end - token_start),
                 current);
      in_token = false;
    }
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char32_t cp = text[i];
    if (is_sentence_break(cp)) {
      flush_token(i);
      if (!current.empty()) sentences.push_back(std::move(current));
      current.clear();
    } else if (is_space(cp)) {
      flush_token(i);
    } else if (!in_token) {
      in_token = true;
      token_start = i;
    }
  }
  flush_token(text.size());
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::string normalize_token(std::string_view surface,
                            const NormalizationTable& table) {
  const std::u32string text = table.apply(std::u32string_view(utf8::decode(surface)));
  Sentence out;
  size_t begin = 0;
  size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  push_token(std::u32string_view(text).substr(begin, end - begin), out);
  return out.empty() ? std::string() : std::move(out.front());
}

void apply_aliases(std::vector<Sentence>& sentences, const AliasMap& aliases) {
  if (aliases.empty()) return;
  for (auto& sentence : sentences) {
    for (auto& token : sentence) {
      if (auto it = aliases.find(token); it != aliases.end()) token = it->second;
    }
  }
}

void TokenCounts::add(std::string_view token, uint64_t n) {
  auto it = counts_.find(std::string(token));
  if (it == counts_.end()) {
    counts_.emplace(std::string(token), n);
  } else {
    it->second += n;
  }
  total_ += n;
}

void TokenCounts::add(const std::vector<Sentence>& sentences) {
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence) ++counts_[token];
    total_ += sentence.size();
  }
}

void TokenCounts::merge(const TokenCounts& other) {
  for (const auto& [token, n] : other.counts_) counts_[token] += n;
  total_ += other.total_;
}

Vocabulary Vocabulary::build(const TokenCounts& counts, uint64_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.total_tokens_ = counts.total();
  for (const auto& [surface, n] : counts.counts()) {
    if (n >= min_count) vocab.entries_.push_back({surface, n});
  }
  // UTF-8 byte order coincides with code point order.
  std::sort(vocab.entries_.begin(), vocab.entries_.end(),
            [](const VocabEntry& a, const VocabEntry& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.surface < b.surface;
            });
  vocab.index_.reserve(vocab.entries_.size());
  for (size_t i = 0; i < vocab.entries_.size(); ++i) {
    vocab.index_.emplace(vocab.entries_[i].surface, static_cast<int32_t>(i));
  }
  return vocab;
}

Vocabulary Vocabulary::build(const std::vector<Sentence>& sentences,
                             uint64_t min_count) {
  TokenCounts counts;
  counts.add(sentences);
  return build(counts, min_count);
}

std::optional<int32_t> Vocabulary::id(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<uint64_t> Vocabulary::count(std::string_view surface) const {
  auto found = id(surface);
  if (!found) return std::nullopt;
  return entries_[*found].count;
}

void Vocabulary::save(std::ostream& out) const {
  for (size_t i = 0; i < entries_.size(); ++i) {
    out << entries_[i].surface << '\t' << i << '\t' << entries_[i].count
        << '\n';
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  size_t line_no = 0;
  uint64_t smallest = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw DataError(fmt::format("vocabulary line {}: expected 3 fields", line_no));
    }
    VocabEntry entry{line.substr(0, t1), 0};
    int64_t id = -1;
    try {
      id = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
      entry.count = std::stoull(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw DataError(fmt::format("vocabulary line {}: bad number", line_no));
    }
    if (id != static_cast<int64_t>(vocab.entries_.size())) {
      throw DataError(fmt::format(
          "vocabulary line {}: ids must be contiguous and sorted", line_no));
    }
    if (!vocab.index_.emplace(entry.surface, static_cast<int32_t>(id)).second) {
      throw DataError(fmt::format("vocabulary line {}: duplicate surface '{}'",
                                  line_no, entry.surface));
    }
    vocab.total_tokens_ += entry.count;
    smallest = vocab.entries_.empty() ? entry.count : std::min(smallest, entry.count);
    vocab.entries_.push_back(std::move(entry));
  }
  vocab.min_count_ = std::max<uint64_t>(smallest, 1);
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return load(in);
}

TokenStream encode(const std::vector<Sentence>& sentences,
                   const Vocabulary& vocab) {
  TokenStream stream;
  for (const auto& sentence : sentences) {
    std::vector<int32_t> ids;
    ids.reserve(sentence.size());
    for (const auto& token : sentence) {
      if (auto id = vocab.id(token)) ids.push_back(*id);
    }
    if (!ids.empty()) stream.push_back(std::move(ids));
  }
  return stream;
}

std::optional<uint64_t> frequency(const Vocabulary& vocab,
                                  std::string_view surface,
                                  const NormalizationTable& table) {
  return vocab.count(normalize_token(surface, table));
}

}  // namespace strata::textnorm
