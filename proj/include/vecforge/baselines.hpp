#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vecforge/embedding.hpp"
#include "vecforge/error.hpp"

namespace vecforge {

/// Component-wise mean of the input vectors of the in-vocabulary tokens.
inline DocVector average_embedding(const EmbeddingModel& model, std::span<const std::string> tokens) {
  const std::size_t d = model.word_in.cols();
  std::vector<double> acc(d, 0.0);
  std::size_t used = 0;
  for (const auto& t : tokens) {
    auto id = model.vocabulary.find(t);
    if (!id) continue;
    const auto row = model.word_in.row(*id);
    for (std::size_t i = 0; i < d; ++i) acc[i] += row[i];
    ++used;
  }
  if (used == 0) throw DataError("cannot average: every token is out of vocabulary");
  DocVector out;
  out.tag = "average";
  out.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.values[i] = static_cast<float>(acc[i] / static_cast<double>(used));
  return out;
}

inline constexpr std::size_t kDefaultNgramOrder = 3;

/// Maximum-likelihood distribution over the contiguous n-grams (orders
/// 1..max_order) of one document. Keyed by the token sequence, so iteration
/// is in a canonical order independent of insertion.
using NgramProfile = std::map<std::vector<std::string>, double>;

inline NgramProfile ngram_profile(std::span<const std::string> tokens, std::size_t max_order = kDefaultNgramOrder) {
  if (tokens.empty()) throw DataError("n-gram profile of an empty document");
  if (max_order < 1) throw InvalidArgument("n-gram order must be >= 1");
  std::map<std::vector<std::string>, std::size_t> counts;
  std::size_t total = 0;
  const std::size_t top = std::min(max_order, tokens.size());
  for (std::size_t n = 1; n <= top; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
      ++total;
    }
  }
  NgramProfile profile;
  for (auto& [gram, c] : counts) profile.emplace(gram, static_cast<double>(c) / static_cast<double>(total));
  return profile;
}

/// Jensen-Shannon divergence in nats, in [0, ln 2].
///
/// Both profiles are walked in sorted key order as a merge, and each key's
/// contribution is formed symmetrically in P and Q, so swapping the
/// arguments yields the identical sequence of floating-point operations.
inline double js_divergence(const NgramProfile& p, const NgramProfile& q) {
  auto term = [](double a, double m) { return a > 0.0 ? a * std::log(a / m) : 0.0; };
  double sum = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  while (ip != p.end() || iq != q.end()) {
    double a = 0.0, b = 0.0;
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      a = (ip++)->second;
    } else if (ip == p.end() || iq->first < ip->first) {
      b = (iq++)->second;
    } else {
      a = (ip++)->second;
      b = (iq++)->second;
    }
    const double m = 0.5 * (a + b);
    sum += term(a, m) + term(b, m);
  }
  return std::clamp(0.5 * sum, 0.0, std::log(2.0));
}

/// Negated JS divergence of the two documents' n-gram profiles; 0 is most similar.
inline double ngram_similarity(std::span<const std::string> a, std::span<const std::string> b,
                               std::size_t max_order = kDefaultNgramOrder) {
  return -js_divergence(ngram_profile(a, max_order), ngram_profile(b, max_order));
}

}  // namespace vecforge
