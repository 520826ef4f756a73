#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vecforge/corpus.hpp"
#include "vecforge/error.hpp"

namespace vecforge {

enum class Mode : std::uint8_t { sg = 0, cbow = 1, dbow = 2, dmpv = 3 };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::sg: return "sg";
    case Mode::cbow: return "cbow";
    case Mode::dbow: return "dbow";
    case Mode::dmpv: return "dmpv";
  }
  return "?";
}

inline Mode parse_mode(std::string_view name) {
  if (name == "sg" || name == "skip-gram") return Mode::sg;
  if (name == "cbow") return Mode::cbow;
  if (name == "dbow") return Mode::dbow;
  if (name == "dmpv") return Mode::dmpv;
  throw InvalidArgument("unknown mode '" + std::string(name) + "' (expected sg, cbow, dbow or dmpv)");
}

inline bool is_document_mode(Mode m) { return m == Mode::dbow || m == Mode::dmpv; }

struct Hyperparams {
  Mode mode = Mode::dbow;
  std::uint32_t vector_size = 300;
  std::uint32_t window = 15;
  std::uint64_t min_count = 5;
  double sample = 1e-5;
  std::uint32_t negative = 5;
  std::uint32_t epochs = 20;
  double alpha = 0.025;
  double alpha_min = 0.0001;
  bool dbow_train_words = true;
  std::uint64_t seed = 1;
  std::uint32_t workers = 1;

  /// Tuned values per architecture. dbow and dmpv follow the Q-Dup settings;
  /// sg and cbow follow the skip-gram settings used for the word baselines.
  static Hyperparams defaults_for(Mode mode) {
    Hyperparams p;
    p.mode = mode;
    switch (mode) {
      case Mode::dbow:
        break;
      case Mode::dmpv:
        p.window = 5;
        p.sample = 1e-6;
        p.epochs = 600;
        break;
      case Mode::sg:
      case Mode::cbow:
        p.window = 5;
        p.epochs = 100;
        break;
    }
    return p;
  }

  void validate() const {
    if (vector_size < 1) throw InvalidArgument("vector size must be >= 1");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (min_count < 1) throw InvalidArgument("min count must be >= 1");
    if (!(sample > 0.0)) throw InvalidArgument("sample threshold must be > 0");
    if (!(alpha_min > 0.0) || !(alpha_min <= alpha))
      throw InvalidArgument("learning rates must satisfy 0 < min-alpha <= alpha");
    if (workers < 1) throw InvalidArgument("workers must be >= 1");
    const bool needs_window = mode != Mode::dbow || dbow_train_words;
    if (needs_window && window < 1) throw InvalidArgument("window must be >= 1");
  }

  /// Width of the hidden vector h fed to the output layer.
  std::size_t input_width() const {
    return mode == Mode::dmpv ? static_cast<std::size_t>(vector_size) * (2 * window + 1) : vector_size;
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Dense row-major matrix.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Trained or initialized model state.
///
/// For dmpv the input matrix carries one extra trailing row: the padding
/// vector used for context slots that fall outside the document. It is not
/// a vocabulary entry, is never a prediction target and never a negative.
struct EmbeddingModel {
  Vocabulary vocabulary;
  Hyperparams params;
  Matrix<float> word_in;
  Matrix<float> word_out;
  Matrix<float> docs;
  std::vector<std::string> doc_tags;
  std::unordered_map<std::string, std::uint32_t> doc_index;

  std::size_t pad_row() const { return vocabulary.size(); }

  std::optional<std::uint32_t> find_doc(std::string_view tag) const {
    auto it = doc_index.find(std::string(tag));
    if (it == doc_index.end()) return std::nullopt;
    return it->second;
  }

  void set_doc_tags(std::vector<std::string> tags) {
    doc_index.clear();
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (!doc_index.emplace(tags[i], static_cast<std::uint32_t>(i)).second)
        throw DataError("duplicate document tag '" + tags[i] + "'");
    doc_tags = std::move(tags);
  }

  /// Word vector (input matrix row) for a vocabulary token.
  std::span<const float> word_vector(std::string_view token) const {
    auto id = vocabulary.find(token);
    if (!id) throw DataError("word '" + std::string(token) + "' not in vocabulary");
    return word_in.row(*id);
  }

  friend bool operator==(const EmbeddingModel& a, const EmbeddingModel& b) {
    return a.vocabulary == b.vocabulary && a.params == b.params && a.word_in == b.word_in &&
           a.word_out == b.word_out && a.docs == b.docs && a.doc_tags == b.doc_tags;
  }
};

struct DocVector {
  std::vector<float> values;
  std::string tag = "inferred";
};

template <std::ranges::contiguous_range A, std::ranges::contiguous_range B>
double dot(const A& a, const B& b) {
  const auto n = std::ranges::size(a);
  const auto* pa = std::ranges::data(a);
  const auto* pb = std::ranges::data(b);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  return s;
}

/// Cosine similarity, clamped to [-1, 1].
template <std::ranges::contiguous_range A, std::ranges::contiguous_range B>
double cosine(const A& u, const B& v) {
  if (std::ranges::size(u) != std::ranges::size(v)) throw InvalidArgument("cosine of vectors with different lengths");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw InvalidArgument("undefined cosine (zero-norm vector)");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline bool all_finite(std::span<const float> xs) {
  return std::all_of(xs.begin(), xs.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace vecforge
