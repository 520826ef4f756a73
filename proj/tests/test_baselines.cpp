#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace vecforge;

namespace {

EmbeddingModel two_word_model() {
  WordVectors wv;
  wv.tokens = {"x", "y", "z"};
  wv.vectors = Matrix<float>(3, 2);
  wv.vectors.row(0)[0] = 1.0f;
  wv.vectors.row(1)[1] = 1.0f;
  wv.vectors.row(2)[0] = 0.25f;
  wv.vectors.row(2)[1] = -2.0f;
  return model_from_word_vectors(wv);
}

std::vector<std::string> words(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

NgramProfile profile_of(std::initializer_list<std::pair<std::vector<std::string>, double>> xs) {
  NgramProfile p;
  for (const auto& [k, v] : xs) p.emplace(k, v);
  return p;
}

}  // namespace

TEST(Averaging, Examples) {
  const auto m = two_word_model();
  EXPECT_EQ(average_embedding(m, words({"y"})).values, (std::vector<float>{0.0f, 1.0f}));
  EXPECT_EQ(average_embedding(m, words({"z", "z"})).values, average_embedding(m, words({"z"})).values);
  EXPECT_EQ(average_embedding(m, words({"x", "y"})).values, (std::vector<float>{0.5f, 0.5f}));
  EXPECT_EQ(average_embedding(m, words({"x", "oov", "y"})).values, (std::vector<float>{0.5f, 0.5f}));
  EXPECT_THROW(average_embedding(m, words({"oov"})), DataError);
  EXPECT_THROW(average_embedding(m, words({})), DataError);
}

TEST(Averaging, PermutationInvariant) {
  const auto m = two_word_model();
  auto t = words({"x", "z", "y", "z", "x", "x"});
  const auto ref = average_embedding(m, t).values;
  std::sort(t.begin(), t.end());
  do {
    ASSERT_EQ(average_embedding(m, t).values, ref);
  } while (std::next_permutation(t.begin(), t.end()));
}

TEST(Ngram, ProfileExamples) {
  EXPECT_EQ(ngram_profile(words({"a"})), profile_of({{{"a"}, 1.0}}));
  const auto ab = ngram_profile(words({"a", "b"}));
  ASSERT_EQ(ab.size(), 3u);
  EXPECT_DOUBLE_EQ(ab.at({"a"}), 1.0 / 3);
  EXPECT_DOUBLE_EQ(ab.at({"b"}), 1.0 / 3);
  EXPECT_DOUBLE_EQ(ab.at({"a", "b"}), 1.0 / 3);
  const auto aaa = ngram_profile(words({"a", "a", "a"}));
  ASSERT_EQ(aaa.size(), 3u);
  EXPECT_DOUBLE_EQ(aaa.at({"a"}), 3.0 / 6);
  EXPECT_DOUBLE_EQ(aaa.at({"a", "a"}), 2.0 / 6);
  EXPECT_DOUBLE_EQ(aaa.at({"a", "a", "a"}), 1.0 / 6);
  EXPECT_THROW(ngram_profile(words({})), DataError);
}

TEST(Ngram, ProfileSumsToOne) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> t(1 + rng() % 30);
    for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng() % 4));
    for (std::size_t order = 1; order <= 4; ++order) {
      double s = 0.0;
      for (const auto& [k, v] : ngram_profile(t, order)) s += v;
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(JensenShannon, Examples) {
  const auto p = profile_of({{{"a"}, 0.5}, {{"b"}, 0.5}});
  const auto q = profile_of({{{"a"}, 1.0}});
  EXPECT_EQ(js_divergence(p, p), 0.0);
  EXPECT_NEAR(js_divergence(profile_of({{{"a"}, 1.0}}), profile_of({{{"b"}, 1.0}})), std::log(2.0), 1e-15);
  const double hand = 0.5 * (0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(2.0)) + 0.5 * std::log(1.0 / 0.75);
  EXPECT_NEAR(js_divergence(p, q), hand, 1e-15);
  EXPECT_NEAR(js_divergence(p, q), 0.2157, 1e-3);
}

TEST(JensenShannon, SymmetricAndBoundedOnRandomProfiles) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> a(1 + rng() % 20), b(1 + rng() % 20);
    for (auto& w : a) w = std::string(1, static_cast<char>('a' + rng() % 5));
    for (auto& w : b) w = std::string(1, static_cast<char>('a' + rng() % 5));
    const auto pa = ngram_profile(a), pb = ngram_profile(b);
    const double ab = js_divergence(pa, pb), ba = js_divergence(pb, pa);
    ASSERT_EQ(ab, ba);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, std::log(2.0) + 1e-12);
    ASSERT_EQ(ab == 0.0, pa == pb);
  }
}

TEST(NgramSimilarity, Examples) {
  const auto d = words({"the", "cat", "sat"});
  EXPECT_EQ(ngram_similarity(d, d), 0.0);
  EXPECT_NEAR(ngram_similarity(d, words({"dog", "ran"})), -std::log(2.0), 1e-15);
  EXPECT_NEAR(ngram_similarity(words({"a", "b"}), words({"a"}), 1), -0.2157, 1e-3);
}
