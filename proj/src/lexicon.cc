#include "strata/lexicon.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "strata/error.h"

namespace strata {

std::string_view origin_name(Origin origin) {
  return origin == Origin::kSanskrit ? "SANSKRIT" : "PERSO_ARABIC";
}

std::optional<Origin> parse_origin(std::string_view tag) {
  if (tag == "SANSKRIT") return Origin::kSanskrit;
  if (tag == "PERSO_ARABIC") return Origin::kPersoArabic;
  return std::nullopt;
}

}  // namespace strata

namespace strata::lexicon {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  size_t pos = 0;
  while (true) {
    const size_t end = text.find(sep, pos);
    parts.push_back(text.substr(pos, end == std::string_view::npos
                                         ? std::string_view::npos
                                         : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return parts;
}

// `where[i]` describes entry i in error messages.
Lexicon build(std::vector<LexiconEntry> entries,
              const std::vector<std::string>& where) {
  std::unordered_map<std::string, size_t> seen;
  auto claim = [&](const std::string& surface, size_t i) {
    if (surface.empty()) {
      throw DataError(fmt::format("{}: empty surface", where[i]));
    }
    auto [it, inserted] = seen.emplace(surface, i);
    if (!inserted) {
      throw DataError(fmt::format("{}: surface '{}' already used by {}",
                                  where[i], surface, where[it->second]));
    }
  };
  std::map<int64_t, std::vector<size_t>> members;
  for (size_t i = 0; i < entries.size(); ++i) {
    claim(entries[i].surface, i);
    for (const auto& variant : entries[i].variants) claim(variant, i);
    members[entries[i].pair_id].push_back(i);
  }
  for (const auto& [pair_id, indices] : members) {
    if (indices.size() != 2) {
      throw DataError(fmt::format("{}: pair {} has {} member(s), expected 2",
                                  where[indices.back()], pair_id,
                                  indices.size()));
    }
    if (entries[indices[0]].origin == entries[indices[1]].origin) {
      throw DataError(fmt::format("{}: pair {} has two {} members",
                                  where[indices[1]], pair_id,
                                  origin_name(entries[indices[1]].origin)));
    }
  }
  return Lexicon::from_entries(std::move(entries));
}

}  // namespace

Lexicon Lexicon::from_entries(std::vector<LexiconEntry> entries) {
  Lexicon lexicon;
  std::map<int64_t, std::vector<size_t>> members;
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries[i];
    auto check_unique = [&](const std::string& surface) {
      if (surface.empty()) {
        throw DataError(fmt::format("entry {}: empty surface", i + 1));
      }
      if (lexicon.index_.contains(surface) ||
          lexicon.variant_index_.contains(surface)) {
        throw DataError(
            fmt::format("entry {}: duplicate surface '{}'", i + 1, surface));
      }
    };
    check_unique(entry.surface);
    lexicon.index_.emplace(entry.surface, i);
    for (const auto& variant : entry.variants) {
      check_unique(variant);
      lexicon.variant_index_.emplace(variant, i);
    }
    members[entry.pair_id].push_back(i);
  }
  lexicon.partner_.resize(entries.size());
  for (const auto& [pair_id, indices] : members) {
    if (indices.size() != 2 ||
        entries[indices[0]].origin == entries[indices[1]].origin) {
      throw DataError(fmt::format(
          "pair {} must have exactly one SANSKRIT and one PERSO_ARABIC member",
          pair_id));
    }
    lexicon.partner_[indices[0]] = indices[1];
    lexicon.partner_[indices[1]] = indices[0];
  }
  lexicon.entries_ = std::move(entries);
  return lexicon;
}

std::optional<size_t> Lexicon::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

textnorm::AliasMap Lexicon::aliases() const {
  textnorm::AliasMap map;
  for (const auto& [variant, index] : variant_index_) {
    map.emplace(variant, entries_[index].surface);
  }
  return map;
}

std::string Lexicon::canonical(std::string_view surface) const {
  if (auto it = variant_index_.find(std::string(surface));
      it != variant_index_.end()) {
    return entries_[it->second].surface;
  }
  return std::string(surface);
}

Lexicon Lexicon::without_pairs(const std::vector<int64_t>& pair_ids) const {
  std::vector<LexiconEntry> kept;
  for (const auto& entry : entries_) {
    if (std::find(pair_ids.begin(), pair_ids.end(), entry.pair_id) ==
        pair_ids.end()) {
      kept.push_back(entry);
    }
  }
  return from_entries(std::move(kept));
}

Lexicon parse_lexicon(std::string_view text,
                      const textnorm::NormalizationTable& table) {
  std::vector<LexiconEntry> entries;
  std::vector<std::string> where;
  size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::string here = fmt::format("line {}", line_no);
    const auto fields = split(line, '\t');
    if (fields.size() < 3 || fields.size() > 5) {
      throw DataError(fmt::format("{}: expected 3 to 5 tab-separated fields, got {}",
                                  here, fields.size()));
    }
    LexiconEntry entry;
    entry.surface = textnorm::normalize_token(fields[0], table);
    const auto origin = parse_origin(fields[1]);
    if (!origin) {
      throw DataError(fmt::format("{}: unknown origin tag '{}'", here, fields[1]));
    }
    entry.origin = *origin;
    const auto id_field = fields[2];
    const auto [ptr, ec] = std::from_chars(
        id_field.data(), id_field.data() + id_field.size(), entry.pair_id);
    if (ec != std::errc() || ptr != id_field.data() + id_field.size()) {
      throw DataError(fmt::format("{}: bad pair id '{}'", here, id_field));
    }
    if (fields.size() > 3) entry.gloss = std::string(fields[3]);
    if (fields.size() > 4 && !fields[4].empty()) {
      for (auto variant : split(fields[4], ',')) {
        if (variant.empty()) continue;
        auto normalized = textnorm::normalize_token(variant, table);
        // A variant that only differed by normalization is the main form.
        if (normalized != entry.surface) {
          entry.variants.push_back(std::move(normalized));
        }
      }
    }
    entries.push_back(std::move(entry));
    where.push_back(here);
  }
  return build(std::move(entries), where);
}

Lexicon load_lexicon(const std::filesystem::path& path,
                     const textnorm::NormalizationTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open lexicon {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_lexicon(buffer.str(), table);
}

void save_lexicon(const Lexicon& lexicon, std::ostream& out) {
  for (const auto& entry : lexicon.entries()) {
    out << entry.surface << '\t' << origin_name(entry.origin) << '\t'
        << entry.pair_id << '\t' << entry.gloss << '\t';
    for (size_t i = 0; i < entry.variants.size(); ++i) {
      if (i > 0) out << ',';
      out << entry.variants[i];
    }
    out << '\n';
  }
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  save_lexicon(lexicon, out);
}

ValidationReport validate_against_vocab(const Lexicon& lexicon,
                                        const textnorm::Vocabulary& vocab,
                                        ValidationMode mode,
                                        uint64_t warn_below) {
  ValidationReport report;
  for (const auto& entry : lexicon.entries()) {
    const auto count = vocab.count(entry.surface);
    if (!count) {
      if (mode == ValidationMode::kStrict) {
        throw DataError(fmt::format("lexicon word '{}' (pair {}) is not in the vocabulary",
                                    entry.surface, entry.pair_id));
      }
      report.issues.push_back({entry.surface, entry.pair_id, true, 0});
      if (std::find(report.dropped_pairs.begin(), report.dropped_pairs.end(),
                    entry.pair_id) == report.dropped_pairs.end()) {
        report.dropped_pairs.push_back(entry.pair_id);
      }
    } else if (*count < warn_below) {
      report.issues.push_back({entry.surface, entry.pair_id, false, *count});
    }
  }
  report.kept = report.dropped_pairs.empty()
                    ? lexicon
                    : lexicon.without_pairs(report.dropped_pairs);
  return report;
}

std::vector<PairStats> pair_stats(const Lexicon& lexicon,
                                  const textnorm::Vocabulary& vocab) {
  const auto& entries = lexicon.entries();
  std::vector<uint64_t> counts(entries.size(), 0);
  for (size_t i = 0; i < entries.size(); ++i) {
    counts[i] = vocab.count(entries[i].surface).value_or(0);
    for (const auto& variant : entries[i].variants) {
      counts[i] += vocab.count(variant).value_or(0);
    }
  }
  std::vector<PairStats> stats(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    const size_t j = lexicon.partner(i);
    const uint64_t total = counts[i] + counts[j];
    if (total == 0) {
      throw UndefinedError(fmt::format(
          "pair {} has zero total count; share is undefined", entries[i].pair_id));
    }
    // The larger share is computed by division and the smaller as its
    // complement, which is exact for values >= 0.5, so the two shares of a
    // pair always sum to exactly 1.
    double share;
    if (counts[i] > counts[j] || (counts[i] == counts[j] && i < j)) {
      share = static_cast<double>(counts[i]) / static_cast<double>(total);
    } else {
      share = 1.0 - static_cast<double>(counts[j]) / static_cast<double>(total);
    }
    stats[i] = {entries[i].surface, counts[i], share, share - 0.5};
  }
  return stats;
}

}  // namespace strata::lexicon
