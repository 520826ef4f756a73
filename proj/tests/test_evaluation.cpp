#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace vecforge;

namespace {

// Exhaustive count over all positive x negative pairs.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

}  // namespace

TEST(RocAuc, Examples) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  EXPECT_EQ(roc_auc(s, std::vector<int>{1, 0, 1, 0}), 0.75);
  EXPECT_EQ(roc_auc(s, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(roc_auc(s, std::vector<int>{0, 0, 1, 1}), 0.0);
  EXPECT_EQ(roc_auc(std::vector<double>{1, 1}, std::vector<int>{1, 0}), 0.5);
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1, 1, 1}), DataError);
  EXPECT_THROW(roc_auc(s, std::vector<int>{0, 0, 0, 0}), DataError);
}

TEST(RocAuc, RandomScoresNearHalf) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(20000);
  std::vector<int> y(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.1;
  }
  EXPECT_NEAR(roc_auc(s, y), 0.5, 0.02);
}

TEST(RocAuc, EqualsBruteForceAndIsRankInvariant) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 499;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 40) / 8.0;  // many ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    const double a = roc_auc(s, y);
    ASSERT_EQ(a, brute_auc(s, y));
    auto t = s;
    for (auto& x : t) x = std::exp(3.0 * x) - 7.0;
    ASSERT_EQ(roc_auc(t, y), a);
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4.5};
  std::vector<double> up, down;
  for (double v : x) {
    up.push_back(2 * v + 1);
    down.push_back(-v);
  }
  EXPECT_NEAR(pearson(x, up), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, down), -1.0, 1e-15);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-15);
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(30), y(30), ax(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng);
      y[i] = x[i] + g(rng);
    }
    const double a = 0.1 + std::abs(g(rng)) * 10, b = g(rng) * 5;
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + b;
    ASSERT_NEAR(pearson(ax, y), pearson(x, y), 1e-12);
    ASSERT_NEAR(pearson(y, ax), pearson(x, y), 1e-12);
  }
}

TEST(Files, ParseAndRejectMalformed) {
  std::istringstream pairs("a\tb\t1\nc\td\t0\n");
  const auto p = read_qdup_pairs(pairs);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].label, 1);
  std::istringstream bad_label("a\tb\t2\n");
  EXPECT_THROW(read_qdup_pairs(bad_label), FormatError);
  std::istringstream sts("the cat\ta cat\t3.5\n");
  const auto s = read_sts(sts);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].gold, 3.5);
  std::istringstream bad_gold("x\ty\t5.5\n");
  EXPECT_THROW(read_sts(bad_gold), FormatError);
  std::istringstream missing("x\ty\n");
  EXPECT_THROW(read_sts(missing), FormatError);
}

TEST(Qdup, PerfectSeparationOnThreePairs) {
  const std::vector<RawDocument> docs{
      {"a", {"how", "to", "sort"}}, {"b", {"how", "to", "sort"}}, {"c", {"cats", "purr"}}, {"d", {"stock", "price"}}};
  const std::vector<LabeledPair> pairs{{"a", "b", 1}, {"a", "c", 0}, {"b", "d", 0}};
  const auto r = run_qdup(text_by_tag(docs, ngram_scorer()), pairs);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.pairs, 3u);
  EXPECT_EQ(r.positives, 1u);
  EXPECT_EQ(report_line(r), "qdup\tauc\t1\t3\t0");
}

TEST(Qdup, NoPositivesIsError) {
  const std::vector<RawDocument> docs{{"a", {"x"}}, {"b", {"y"}}};
  const std::vector<LabeledPair> pairs{{"a", "b", 0}};
  EXPECT_THROW(run_qdup(text_by_tag(docs, ngram_scorer()), pairs), DataError);
}

TEST(Qdup, UnknownTagIsErrorAndUnscorableIsSkipped) {
  WordVectors wv;
  wv.tokens = {"x", "y"};
  wv.vectors = Matrix<float>(2, 2);
  wv.vectors.row(0)[0] = 1.0f;
  wv.vectors.row(1)[1] = 1.0f;
  const auto model = model_from_word_vectors(wv);
  const std::vector<RawDocument> docs{{"a", {"x"}}, {"b", {"x", "y"}}, {"c", {"y"}}, {"e", {"oov"}}};
  const std::vector<LabeledPair> pairs{{"a", "b", 1}, {"a", "c", 0}, {"a", "e", 0}};
  std::ostringstream warn;
  const auto r = run_qdup(text_by_tag(docs, averaging_scorer(model)), pairs, &warn);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.pairs, 2u);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_NE(warn.str().find("skipping"), std::string::npos);
  const std::vector<LabeledPair> unknown{{"a", "b", 1}, {"a", "zz", 0}};
  EXPECT_THROW(run_qdup(text_by_tag(docs, averaging_scorer(model)), unknown), DataError);
}

TEST(Sts, AffineScorerAndConstantScorer) {
  std::vector<StsRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back({{"w" + std::to_string(i)}, {"v"}, 0.8 * i});
  auto affine = [](std::span<const std::string> a, std::span<const std::string>) -> std::optional<double> {
    return 3.0 * std::stod(a[0].substr(1)) - 2.0;
  };
  EXPECT_NEAR(run_sts(affine, recs).value, 1.0, 1e-15);
  auto constant = [](std::span<const std::string>, std::span<const std::string>) -> std::optional<double> {
    return 0.3;
  };
  EXPECT_THROW(run_sts(constant, recs), DataError);
  auto never = [](std::span<const std::string>, std::span<const std::string>) -> std::optional<double> {
    return std::nullopt;
  };
  EXPECT_THROW(run_sts(never, recs), DataError);
}

TEST(Sts, FiveRecordHandFixture) {
  // Scores and gold worked out by hand: sums 12 and 15, means 2.4 and 3,
  // Sxy = 6, Sxx = 5.2, Syy = 10.
  const std::vector<double> scores{1, 2, 3, 4, 2}, gold{2, 1, 4, 5, 3};
  std::vector<StsRecord> recs;
  for (std::size_t i = 0; i < scores.size(); ++i) recs.push_back({{std::to_string(i)}, {"z"}, gold[i]});
  auto scorer = [&](std::span<const std::string> a, std::span<const std::string>) -> std::optional<double> {
    return scores[std::stoul(a[0])];
  };
  const auto r = run_sts(scorer, recs);
  EXPECT_NEAR(r.value, 6.0 / std::sqrt(52.0), 1e-9);
  EXPECT_EQ(r.pairs, 5u);
}

TEST(Evaluation, DoesNotMutateModel) {
  const auto corpus = fixtures::corpus_from(fixtures::tiny_documents(), 1, 0.05);
  auto p = fixtures::small_params(Mode::dbow);
  const auto model = train(corpus, p);
  const auto before = encode_model(model);
  const std::vector<LabeledPair> pairs{{"doc0", "doc2", 1}, {"doc0", "doc1", 0}, {"doc3", "doc4", 0}};
  run_qdup(doc_vector_scorer(model), pairs);
  std::vector<StsRecord> recs{{{"t0_1", "s1"}, {"t0_2"}, 1.0}, {{"t1_3"}, {"t1_3", "s0"}, 4.0}, {{"s2"}, {"t0_4"}, 2.0}};
  InferParams ip;
  ip.epochs = 20;
  run_sts(inference_scorer(model, ip, 1), recs);
  EXPECT_EQ(encode_model(model), before);
}

TEST(Synthetic, DeterministicUnderSeed) {
  SyntheticSpec spec;
  spec.docs_per_topic = 30;
  const auto a = make_synthetic(spec), b = make_synthetic(spec);
  ASSERT_EQ(a.documents.size(), b.documents.size());
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    EXPECT_EQ(a.documents[i].tag, b.documents[i].tag);
    EXPECT_EQ(a.documents[i].tokens, b.documents[i].tokens);
  }
  spec.seed = 2;
  EXPECT_NE(make_synthetic(spec).documents[0].tokens, a.documents[0].tokens);
}

TEST(Synthetic, NoDuplicatesMeansOnlyNegatives) {
  SyntheticSpec spec;
  spec.docs_per_topic = 20;
  spec.dup_fraction = 0.0;
  const auto data = make_synthetic(spec);
  ASSERT_FALSE(data.qdup.empty());
  for (const auto& p : data.qdup) EXPECT_EQ(p.label, 0);
  EXPECT_THROW(run_qdup(text_by_tag(data.documents, ngram_scorer()), data.qdup), DataError);
}

TEST(Synthetic, StructureOfPairs) {
  SyntheticSpec spec;
  spec.docs_per_topic = 50;
  const auto data = make_synthetic(spec);
  EXPECT_EQ(data.documents.size(), 200u);
  std::unordered_map<std::string, std::size_t> topic;
  for (std::size_t i = 0; i < data.documents.size(); ++i) topic[data.documents[i].tag] = data.topic_of[i];
  std::size_t pos = 0;
  for (const auto& p : data.qdup) {
    if (p.label == 1) {
      ++pos;
      EXPECT_EQ(topic[p.tag_a], topic[p.tag_b]);
    } else {
      EXPECT_NE(topic[p.tag_a], topic[p.tag_b]);
    }
  }
  EXPECT_EQ(pos, 4u * 5u);
  for (const auto& r : data.sts) {
    EXPECT_GE(r.gold, 0.0);
    EXPECT_LE(r.gold, 5.0);
  }
}

TEST(Synthetic, DuplicatesShareAtLeastTheUndroppedShare) {
  SyntheticSpec spec;
  spec.docs_per_topic = 50;
  for (double dropout : {0.2, 0.6}) {
    spec.dropout = dropout;
    const auto data = make_synthetic(spec);
    std::unordered_map<std::string, const RawDocument*> by_tag;
    for (const auto& d : data.documents) by_tag[d.tag] = &d;
    double share = 0.0;
    std::size_t n = 0;
    for (const auto& p : data.qdup) {
      if (p.label != 1) continue;
      // Token occurrences of the original that survive into the copy.
      const auto& a = by_tag[p.tag_a]->tokens;
      const auto& b = by_tag[p.tag_b]->tokens;
      std::multiset<std::string> rest(b.begin(), b.end());
      std::size_t kept = 0;
      for (const auto& t : a)
        if (auto it = rest.find(t); it != rest.end()) {
          rest.erase(it);
          ++kept;
        }
      share += static_cast<double>(kept) / static_cast<double>(a.size());
      ++n;
    }
    // Binomial keep count: allow three standard errors of the mean.
    const double se = std::sqrt(dropout * (1 - dropout) / (static_cast<double>(spec.doc_len) * n));
    EXPECT_GE(share / n, (1.0 - dropout) - 3 * se) << dropout;
  }
}
