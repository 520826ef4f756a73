#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vecforge/error.hpp"
#include "vecforge/random.hpp"

namespace vecforge {

enum class CorpusFormat { tagged_lines, plain_lines };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "tagged-lines" || name == "tagged") return CorpusFormat::tagged_lines;
  if (name == "plain-lines" || name == "plain") return CorpusFormat::plain_lines;
  throw InvalidArgument("unknown corpus format '" + std::string(name) +
                        "' (expected tagged-lines or plain-lines)");
}

/// Fraction of occurrences of a word kept by subsampling: min(1, sqrt(t / f))
/// with f = count / total. Inputs are validated by the caller.
inline double keep_probability(std::uint64_t count, std::uint64_t total, double t) {
  const double f = static_cast<double>(count) / static_cast<double>(total);
  return std::min(1.0, std::sqrt(t / f));
}

inline constexpr double kNoiseExponent = 0.75;

struct VocabEntry {
  std::string surface;
  std::uint64_t count = 0;
  double keep_prob = 1.0;
  double noise_weight = 0.0;

  friend bool operator==(const VocabEntry&, const VocabEntry&) = default;
};

/// Frequency-filtered token table. Entries are ordered by descending count;
/// equal counts keep the order in which the tokens were first seen.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from (surface, count) pairs that are already in vocabulary order.
  static Vocabulary from_ordered_counts(std::vector<std::pair<std::string, std::uint64_t>> counts,
                                        double subsample_t) {
    if (!(subsample_t > 0.0)) throw InvalidArgument("subsample threshold must be > 0");
    Vocabulary v;
    v.subsample_t_ = subsample_t;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i].second == 0) throw InvalidArgument("vocabulary count must be positive");
      if (i > 0 && counts[i].second > counts[i - 1].second)
        throw InvalidArgument("vocabulary counts must be non-increasing");
      v.total_tokens_ += counts[i].second;
    }
    v.entries_.reserve(counts.size());
    for (auto& [surface, count] : counts) {
      if (!v.index_.emplace(surface, static_cast<std::uint32_t>(v.entries_.size())).second)
        throw InvalidArgument("duplicate vocabulary token '" + surface + "'");
      VocabEntry e;
      e.count = count;
      e.keep_prob = keep_probability(count, v.total_tokens_, subsample_t);
      e.noise_weight = std::pow(static_cast<double>(count), kNoiseExponent);
      e.surface = std::move(surface);
      v.entries_.push_back(std::move(e));
    }
    return v;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const VocabEntry& operator[](std::size_t pos) const { return entries_[pos]; }
  std::span<const VocabEntry> entries() const { return entries_; }
  std::uint64_t total_tokens() const { return total_tokens_; }
  double subsample_threshold() const { return subsample_t_; }

  std::optional<std::uint32_t> find(std::string_view surface) const {
    auto it = index_.find(std::string(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entries_ == b.entries_ && a.total_tokens_ == b.total_tokens_ &&
           a.subsample_t_ == b.subsample_t_;
  }

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint64_t total_tokens_ = 0;
  double subsample_t_ = 1e-5;
};

/// Counts tokens, drops those below min_count and orders the rest.
inline Vocabulary build_vocabulary(std::span<const std::string> tokens, std::uint64_t min_count,
                                   double subsample_t) {
  if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
  if (!(subsample_t > 0.0)) throw InvalidArgument("subsample threshold must be > 0");

  struct Tally {
    std::uint64_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string_view, Tally> tally;
  std::vector<std::string_view> order;
  for (const auto& tok : tokens) {
    auto [it, inserted] = tally.try_emplace(tok, Tally{0, order.size()});
    if (inserted) order.push_back(tok);
    ++it->second.count;
  }

  std::vector<std::string_view> kept;
  for (auto tok : order)
    if (tally[tok].count >= min_count) kept.push_back(tok);
  if (kept.empty()) throw DataError("no tokens survive min_count");

  std::stable_sort(kept.begin(), kept.end(), [&](std::string_view a, std::string_view b) {
    return tally[a].count > tally[b].count;
  });
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  counts.reserve(kept.size());
  for (auto tok : kept) counts.emplace_back(std::string(tok), tally[tok].count);
  return Vocabulary::from_ordered_counts(std::move(counts), subsample_t);
}

/// Vocabulary export: one `surface<TAB>count` line per entry.
inline void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& e : vocab.entries()) out << e.surface << '\t' << e.count << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in, double subsample_t) {
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError("vocabulary line " + std::to_string(lineno) + ": expected surface<TAB>count");
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(lineno) + ": bad count");
    }
    counts.emplace_back(line.substr(0, tab), count);
  }
  try {
    return Vocabulary::from_ordered_counts(std::move(counts), subsample_t);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("vocabulary file: ") + e.what());
  }
}

/// Noise distribution over vocabulary positions, proportional to each
/// entry's noise_weight (count^0.75).
class NoiseTable {
 public:
  NoiseTable() = default;

  explicit NoiseTable(const Vocabulary& vocab) {
    std::vector<double> weights;
    weights.reserve(vocab.size());
    for (const auto& e : vocab.entries()) weights.push_back(e.noise_weight);
    *this = NoiseTable(std::span<const double>(weights));
  }

  explicit NoiseTable(std::span<const double> weights) {
    cumulative_.reserve(weights.size());
    double acc = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("noise weights must be finite and >= 0");
      acc += w;
      cumulative_.push_back(acc);
    }
    if (!cumulative_.empty() && !(acc > 0.0)) throw InvalidArgument("noise weights sum to zero");
  }

  bool empty() const { return cumulative_.empty(); }
  std::size_t size() const { return cumulative_.size(); }

  double probability(std::size_t pos) const {
    const double lo = pos == 0 ? 0.0 : cumulative_[pos - 1];
    return (cumulative_[pos] - lo) / cumulative_.back();
  }

  std::uint32_t sample(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

inline std::uint32_t sample_noise(const NoiseTable& table, Rng& rng) { return table.sample(rng); }

/// A document as read from disk, before vocabulary lookup.
struct RawDocument {
  std::string tag;
  std::vector<std::string> tokens;
};

struct Document {
  std::string tag;
  std::vector<std::uint32_t> tokens;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;
  // Tokens seen before out-of-vocabulary dropping.
  std::uint64_t total_token_count = 0;
  // Tags of documents left with no tokens (empty lines or all-OOV).
  std::vector<std::string> empty_documents;

  std::optional<std::size_t> find_document(std::string_view tag) const {
    for (std::size_t i = 0; i < documents.size(); ++i)
      if (documents[i].tag == tag) return i;
    return std::nullopt;
  }
};

inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<RawDocument> read_documents(std::istream& in, CorpusFormat format) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    RawDocument doc;
    if (format == CorpusFormat::plain_lines) {
      doc.tag = std::to_string(lineno);
      doc.tokens = split_tokens(line);
    } else {
      if (line.empty()) {
        ++lineno;
        continue;
      }
      const auto tab = line.find('\t');
      doc.tag = line.substr(0, tab);
      if (doc.tag.empty()) throw FormatError("line " + std::to_string(lineno + 1) + ": empty tag");
      if (tab != std::string::npos) doc.tokens = split_tokens(std::string_view(line).substr(tab + 1));
    }
    ++lineno;
    if (!seen.insert(doc.tag).second) throw DataError("duplicate document tag '" + doc.tag + "'");
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<RawDocument> read_documents(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file '" + path + "'");
  return read_documents(in, format);
}

inline Vocabulary build_vocabulary(std::span<const RawDocument> docs, std::uint64_t min_count,
                                   double subsample_t) {
  std::vector<std::string> tokens;
  for (const auto& d : docs) tokens.insert(tokens.end(), d.tokens.begin(), d.tokens.end());
  return build_vocabulary(std::span<const std::string>(tokens), min_count, subsample_t);
}

/// Maps tokens to vocabulary positions, dropping out-of-vocabulary ones.
inline std::vector<std::uint32_t> lookup_tokens(const Vocabulary& vocab,
                                                std::span<const std::string> tokens) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto id = vocab.find(t)) ids.push_back(*id);
  return ids;
}

inline Corpus make_corpus(std::span<const RawDocument> raw, Vocabulary vocab) {
  Corpus c;
  c.vocabulary = std::move(vocab);
  c.documents.reserve(raw.size());
  for (const auto& r : raw) {
    c.total_token_count += r.tokens.size();
    Document d{r.tag, lookup_tokens(c.vocabulary, r.tokens)};
    if (d.tokens.empty()) c.empty_documents.push_back(d.tag);
    c.documents.push_back(std::move(d));
  }
  return c;
}

/// Reads a corpus file and builds its vocabulary. An empty file yields an
/// empty corpus; training on it fails later.
inline Corpus load_corpus(const std::string& path, CorpusFormat format, std::uint64_t min_count,
                          double subsample_t) {
  const auto raw = read_documents(path, format);
  const bool any_tokens =
      std::any_of(raw.begin(), raw.end(), [](const RawDocument& d) { return !d.tokens.empty(); });
  if (!any_tokens) {
    if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
    return make_corpus(raw, Vocabulary{});
  }
  return make_corpus(raw, build_vocabulary(std::span<const RawDocument>(raw), min_count, subsample_t));
}

}  // namespace vecforge
