#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vecforge/baselines.hpp"
#include "vecforge/corpus.hpp"
#include "vecforge/embedding.hpp"
#include "vecforge/error.hpp"
#include "vecforge/random.hpp"
#include "vecforge/trainer.hpp"

namespace vecforge {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mann-Whitney ROC AUC: (concordant + 0.5 * tied) / (P * N). Labels are 0/1.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t positives = 0, negatives = 0, concordant = 0, tied = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] != 0 ? pos : neg)++;
    concordant += pos * negatives;  // negatives counted so far all score lower
    tied += pos * neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) throw DataError("roc_auc needs at least one positive and one negative");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         (static_cast<double>(positives) * static_cast<double>(negatives));
}

/// Sample Pearson correlation.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: sequences differ in length");
  if (x.size() < 2) throw InvalidArgument("pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Task data
// ---------------------------------------------------------------------------

struct LabeledPair {
  std::string tag_a;
  std::string tag_b;
  int label = 0;
};

struct StsRecord {
  std::vector<std::string> sentence_a;
  std::vector<std::string> sentence_b;
  double gold = 0.0;
};

struct ScoredPair {
  std::string tag_a;
  std::string tag_b;
  double score = 0.0;
  double label = 0.0;
};

struct EvalReport {
  std::string task;    // "qdup" or "sts"
  std::string metric;  // "auc" or "pearson"
  double value = 0.0;
  std::size_t pairs = 0;  // scored pairs
  std::size_t skipped = 0;
  std::size_t positives = 0;
  std::vector<ScoredPair> scored;
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(lineno, line);
  }
}

}  // namespace detail

inline std::vector<LabeledPair> read_qdup_pairs(std::istream& in) {
  std::vector<LabeledPair> out;
  detail::for_each_line(in, [&](std::size_t lineno, const std::string& line) {
    const auto f = detail::split_tabs(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || (f[2] != "0" && f[2] != "1"))
      throw FormatError("pairs line " + std::to_string(lineno) + ": expected tag_a<TAB>tag_b<TAB>0|1");
    out.push_back({f[0], f[1], f[2] == "1" ? 1 : 0});
  });
  return out;
}

inline std::vector<StsRecord> read_sts(std::istream& in) {
  std::vector<StsRecord> out;
  detail::for_each_line(in, [&](std::size_t lineno, const std::string& line) {
    const auto f = detail::split_tabs(line);
    double gold = -1.0;
    if (f.size() == 3) {
      auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), gold);
      if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) gold = -1.0;
    }
    if (f.size() != 3 || !(gold >= 0.0 && gold <= 5.0))
      throw FormatError("sts line " + std::to_string(lineno) + ": expected sentence_a<TAB>sentence_b<TAB>gold in [0,5]");
    out.push_back({split_tokens(f[0]), split_tokens(f[1]), gold});
  });
  return out;
}

inline std::vector<LabeledPair> read_qdup_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read pairs file '" + path + "'");
  return read_qdup_pairs(in);
}

inline std::vector<StsRecord> read_sts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read sts file '" + path + "'");
  return read_sts(in);
}

inline void write_qdup_pairs(std::ostream& out, std::span<const LabeledPair> pairs) {
  for (const auto& p : pairs) out << p.tag_a << '\t' << p.tag_b << '\t' << p.label << '\n';
}

inline void write_sts(std::ostream& out, std::span<const StsRecord> records) {
  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) s += (i ? " " : "") + toks[i];
    return s;
  };
  for (const auto& r : records)
    out << join(r.sentence_a) << '\t' << join(r.sentence_b) << '\t' << detail::format_double(r.gold) << '\n';
}

/// `task<TAB>metric<TAB>value<TAB>pairs<TAB>skipped`
inline std::string report_line(const EvalReport& r) {
  return r.task + "\t" + r.metric + "\t" + detail::format_double(r.value) + "\t" + std::to_string(r.pairs) + "\t" +
         std::to_string(r.skipped);
}

inline void write_scores(std::ostream& out, const EvalReport& r) {
  for (const auto& p : r.scored)
    out << p.tag_a << '\t' << p.tag_b << '\t' << detail::format_double(p.score) << '\t'
        << detail::format_double(p.label) << '\n';
}

// ---------------------------------------------------------------------------
// Scorers
//
// A scorer returns nullopt when a pair cannot be scored (e.g. a document with
// no in-vocabulary token); such pairs are skipped and counted. Unknown tags
// are errors.
// ---------------------------------------------------------------------------

using TagScorer = std::function<std::optional<double>(const std::string&, const std::string&)>;
using TextScorer =
    std::function<std::optional<double>(std::span<const std::string>, std::span<const std::string>)>;

inline std::optional<double> safe_cosine(std::span<const float> a, std::span<const float> b) {
  try {
    return cosine(a, b);
  } catch (const InvalidArgument&) {
    return std::nullopt;
  }
}

/// Cosine between trained document vectors.
inline TagScorer doc_vector_scorer(const EmbeddingModel& model) {
  if (model.docs.rows() == 0) throw InvalidArgument("model has no document vectors");
  return [&model](const std::string& a, const std::string& b) -> std::optional<double> {
    auto ia = model.find_doc(a), ib = model.find_doc(b);
    if (!ia) throw DataError("unknown document tag '" + a + "'");
    if (!ib) throw DataError("unknown document tag '" + b + "'");
    return safe_cosine(model.docs.row(*ia), model.docs.row(*ib));
  };
}

/// Applies a text scorer to documents looked up by tag.
inline TagScorer text_by_tag(std::span<const RawDocument> docs, TextScorer scorer) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < docs.size(); ++i) index.emplace(docs[i].tag, i);
  return [docs, index = std::move(index), scorer = std::move(scorer)](const std::string& a,
                                                                      const std::string& b) -> std::optional<double> {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end()) throw DataError("unknown document tag '" + a + "'");
    if (ib == index.end()) throw DataError("unknown document tag '" + b + "'");
    return scorer(docs[ia->second].tokens, docs[ib->second].tokens);
  };
}

/// Cosine between averaged word vectors.
inline TextScorer averaging_scorer(const EmbeddingModel& model) {
  return [&model](std::span<const std::string> a, std::span<const std::string> b) -> std::optional<double> {
    try {
      const auto va = average_embedding(model, a);
      const auto vb = average_embedding(model, b);
      return safe_cosine(va.values, vb.values);
    } catch (const DataError&) {
      return std::nullopt;
    }
  };
}

inline TextScorer ngram_scorer(std::size_t max_order = kDefaultNgramOrder) {
  return [max_order](std::span<const std::string> a, std::span<const std::string> b) -> std::optional<double> {
    if (a.empty() || b.empty()) return std::nullopt;
    return ngram_similarity(a, b, max_order);
  };
}

/// Cosine between vectors inferred for each text with the frozen model.
/// Each text gets its own random stream derived from `seed` and the call
/// order, so a fixed pair sequence always yields the same scores.
inline TextScorer inference_scorer(const EmbeddingModel& model, InferParams ip, std::uint64_t seed) {
  return [&model, ip, seed, calls = std::uint64_t{0}](std::span<const std::string> a,
                                                      std::span<const std::string> b) mutable
         -> std::optional<double> {
    const auto ida = lookup_tokens(model.vocabulary, a);
    const auto idb = lookup_tokens(model.vocabulary, b);
    const auto call = calls++;
    if (ida.empty() || idb.empty()) return std::nullopt;
    Rng ra(mix_seed(seed, 2 * call)), rb(mix_seed(seed, 2 * call + 1));
    const auto va = infer_document(model, std::span<const std::uint32_t>(ida), ip, ra);
    const auto vb = infer_document(model, std::span<const std::uint32_t>(idb), ip, rb);
    return safe_cosine(va.values, vb.values);
  };
}

// ---------------------------------------------------------------------------
// Task protocols
// ---------------------------------------------------------------------------

/// Scores every pair and reports ROC AUC (duplicates labelled 1).
inline EvalReport run_qdup(const TagScorer& scorer, std::span<const LabeledPair> pairs,
                           std::ostream* warnings = nullptr) {
  const auto positives = static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.label == 1; }));
  if (positives == 0) throw DataError("qdup pairs contain no positive (duplicate) pairs");
  if (positives == pairs.size()) throw DataError("qdup pairs contain no negative pairs");

  EvalReport r;
  r.task = "qdup";
  r.metric = "auc";
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& p : pairs) {
    const auto s = scorer(p.tag_a, p.tag_b);
    if (!s) {
      ++r.skipped;
      if (warnings) *warnings << "warning: skipping unscorable pair " << p.tag_a << " " << p.tag_b << "\n";
      continue;
    }
    scores.push_back(*s);
    labels.push_back(p.label);
    r.scored.push_back({p.tag_a, p.tag_b, *s, static_cast<double>(p.label)});
  }
  r.pairs = scores.size();
  r.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  r.value = roc_auc(scores, labels);
  return r;
}

/// Correlates scorer output with gold similarity scores (Pearson r).
inline EvalReport run_sts(const TextScorer& scorer, std::span<const StsRecord> records,
                          std::ostream* warnings = nullptr) {
  EvalReport r;
  r.task = "sts";
  r.metric = "pearson";
  std::vector<double> predicted, gold;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const auto s = scorer(rec.sentence_a, rec.sentence_b);
    if (!s) {
      ++r.skipped;
      if (warnings) *warnings << "warning: skipping unscorable sts record " << i + 1 << "\n";
      continue;
    }
    predicted.push_back(*s);
    gold.push_back(rec.gold);
    r.scored.push_back({std::to_string(i + 1) + "a", std::to_string(i + 1) + "b", *s, rec.gold});
  }
  if (predicted.size() < 2) throw DataError("fewer than two scorable sts records");
  r.pairs = predicted.size();
  r.value = pearson(predicted, gold);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t n_topics = 4;
  std::size_t docs_per_topic = 200;
  std::size_t doc_len = 40;
  std::size_t vocab_per_topic = 100;
  std::size_t n_function_words = 20;
  double dup_fraction = 0.2;    // share of each topic's documents that belong to a duplicate pair
  std::uint64_t seed = 1;
  double dropout = 0.6;         // per-token drop probability when copying a duplicate
  double function_rate = 0.7;   // share of tokens drawn from the function words
  double off_topic_rate = 0.3;  // share of content tokens borrowed from another topic
  std::size_t negatives_per_positive = 10;
  std::size_t sts_records = 200;
  std::size_t sts_len = 13;

  void validate() const {
    if (n_topics < 1 || docs_per_topic < 1 || doc_len < 1 || vocab_per_topic < 1 || n_function_words < 1)
      throw InvalidArgument("synthetic corpus counts must all be >= 1");
    if (!(dup_fraction >= 0.0 && dup_fraction <= 1.0) || !(dropout >= 0.0 && dropout < 1.0) ||
        !(function_rate >= 0.0 && function_rate <= 1.0) || !(off_topic_rate >= 0.0 && off_topic_rate <= 1.0))
      throw InvalidArgument("synthetic corpus rates must lie in [0, 1]");
  }
};

struct SyntheticData {
  std::vector<RawDocument> documents;
  std::vector<std::size_t> topic_of;  // per document
  std::vector<LabeledPair> qdup;
  std::vector<StsRecord> sts;
};

inline std::string synthetic_content_word(std::size_t topic, std::size_t j) {
  return "t" + std::to_string(topic) + "w" + std::to_string(j);
}

inline std::string synthetic_function_word(std::size_t j) { return "f" + std::to_string(j); }

namespace detail {

class SyntheticSampler {
 public:
  explicit SyntheticSampler(const SyntheticSpec& spec) : spec_(spec) {
    // Zipf-shaped function words; uniform content words.
    std::vector<double> w(spec.n_function_words);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = 1.0 / static_cast<double>(j + 1);
    function_ = NoiseTable(std::span<const double>(w));
  }

  std::string content(std::size_t topic, Rng& rng) const {
    if (spec_.n_topics > 1 && uniform01(rng) < spec_.off_topic_rate) topic = other_topic(topic, rng);
    return synthetic_content_word(topic, uniform_below(rng, spec_.vocab_per_topic));
  }

  std::string token(std::size_t topic, Rng& rng) const {
    if (uniform01(rng) < spec_.function_rate) return synthetic_function_word(function_.sample(rng));
    return content(topic, rng);
  }

  std::size_t other_topic(std::size_t topic, Rng& rng) const {
    const auto o = uniform_below(rng, spec_.n_topics - 1);
    return o >= topic ? o + 1 : o;
  }

 private:
  const SyntheticSpec& spec_;
  NoiseTable function_;
};

}  // namespace detail

/// Generates a topic-structured corpus with duplicate and STS-style pairs.
/// Duplicates are same-topic near-copies (token dropout); negatives pair
/// documents of different topics. Vocabulary names depend only on the
/// topic/word counts, so corpora from different seeds share vocabulary.
inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const detail::SyntheticSampler sampler(spec);
  const auto pairs_per_topic = static_cast<std::size_t>(spec.dup_fraction * static_cast<double>(spec.docs_per_topic) / 2.0);

  auto fresh = [&](std::size_t topic) {
    std::vector<std::string> toks(spec.doc_len);
    for (auto& t : toks) t = sampler.token(topic, rng);
    return toks;
  };
  auto near_copy = [&](const std::vector<std::string>& src) {
    std::vector<std::string> out;
    for (const auto& t : src)
      if (uniform01(rng) >= spec.dropout) out.push_back(t);
    if (out.empty()) out.push_back(src[uniform_below(rng, src.size())]);
    return out;
  };

  // Per topic: documents 2p and 2p+1 form duplicate pair p.
  std::vector<std::vector<std::vector<std::string>>> by_topic(spec.n_topics);
  for (std::size_t t = 0; t < spec.n_topics; ++t) {
    for (std::size_t i = 0; i < spec.docs_per_topic; ++i) {
      if (i % 2 == 1 && i < 2 * pairs_per_topic)
        by_topic[t].push_back(near_copy(by_topic[t][i - 1]));
      else
        by_topic[t].push_back(fresh(t));
    }
  }

  // Corpus order is a seeded shuffle so that duplicate pairs are spread
  // across the training pass.
  const std::size_t n_docs = spec.n_topics * spec.docs_per_topic;
  std::vector<std::size_t> slot(n_docs);
  std::iota(slot.begin(), slot.end(), 0);
  for (std::size_t i = n_docs; i > 1; --i) std::swap(slot[i - 1], slot[uniform_below(rng, i)]);

  SyntheticData data;
  data.documents.resize(n_docs);
  data.topic_of.resize(n_docs);
  std::vector<std::vector<std::size_t>> index(spec.n_topics, std::vector<std::size_t>(spec.docs_per_topic));
  for (std::size_t t = 0; t < spec.n_topics; ++t) {
    for (std::size_t i = 0; i < spec.docs_per_topic; ++i) {
      const auto pos = slot[t * spec.docs_per_topic + i];
      index[t][i] = pos;
      data.documents[pos] = {"d" + std::to_string(pos), std::move(by_topic[t][i])};
      data.topic_of[pos] = t;
    }
  }

  for (std::size_t t = 0; t < spec.n_topics; ++t)
    for (std::size_t p = 0; p < pairs_per_topic; ++p)
      data.qdup.push_back({data.documents[index[t][2 * p]].tag, data.documents[index[t][2 * p + 1]].tag, 1});
  if (spec.n_topics > 1) {
    const std::size_t n_neg = spec.negatives_per_positive * std::max<std::size_t>(1, data.qdup.size());
    for (std::size_t k = 0; k < n_neg; ++k) {
      const auto ta = uniform_below(rng, spec.n_topics);
      const auto tb = sampler.other_topic(ta, rng);
      const auto da = index[ta][uniform_below(rng, spec.docs_per_topic)];
      const auto db = index[tb][uniform_below(rng, spec.docs_per_topic)];
      data.qdup.push_back({data.documents[da].tag, data.documents[db].tag, 0});
    }
  }

  // STS-style records: sentence b copies each token of sentence a with
  // probability q and otherwise substitutes a token from another topic;
  // gold similarity is 5q.
  for (std::size_t r = 0; r < spec.sts_records; ++r) {
    const auto topic = uniform_below(rng, spec.n_topics);
    const double q = uniform01(rng);
    StsRecord rec;
    rec.gold = 5.0 * q;
    for (std::size_t i = 0; i < spec.sts_len; ++i) rec.sentence_a.push_back(sampler.token(topic, rng));
    for (const auto& tok : rec.sentence_a) {
      if (uniform01(rng) < q) {
        rec.sentence_b.push_back(tok);
      } else {
        const auto other = spec.n_topics > 1 ? sampler.other_topic(topic, rng) : topic;
        rec.sentence_b.push_back(sampler.token(other, rng));
      }
    }
    data.sts.push_back(std::move(rec));
  }
  return data;
}

}  // namespace vecforge
