#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "vecforge/corpus.hpp"
#include "vecforge/embedding.hpp"
#include "vecforge/error.hpp"
#include "vecforge/io.hpp"
#include "vecforge/random.hpp"

namespace vecforge {

/// Learning rate for a 0-based epoch: linear from alpha at the first epoch
/// to alpha_min at the last.
inline double epoch_learning_rate(std::uint32_t epoch, const Hyperparams& p) {
  const double t = static_cast<double>(epoch) / static_cast<double>(std::max<std::uint32_t>(1, p.epochs - 1));
  return std::lerp(p.alpha, p.alpha_min, t);
}

template <class T>
inline T sigmoid(T s) {
  return T(1) / (T(1) + std::exp(-s));
}

// -log(sigmoid(x)), stable for large |x|.
template <class T>
inline double log_sigmoid_loss(T x) {
  const double v = static_cast<double>(x);
  return v > 0 ? std::log1p(std::exp(-v)) : -v + std::log1p(std::exp(v));
}

/// One negative-sampling update for a single hidden vector.
///
/// `outputs[0]` is the positive target, the rest are negatives. Every error
/// term is computed from the pre-update output rows; then each output row
/// moves by -lr * g * h (unless `w_out` is null) and lr * sum(g * v') is
/// added to `input_grad`, which the caller subtracts from the contributors.
/// Returns -[log sigmoid(s+) + sum log sigmoid(-s-)].
template <class T>
double negative_sampling_step(std::span<const T> h, std::span<const std::uint32_t> outputs,
                              const Matrix<T>& out_rows, Matrix<T>* w_out, T lr, std::span<T> input_grad,
                              std::span<T> scratch_g) {
  double loss = 0.0;
  const std::size_t width = h.size();
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const auto v = out_rows.row(outputs[j]);
    T s = 0;
    for (std::size_t i = 0; i < width; ++i) s += v[i] * h[i];
    const T label = j == 0 ? T(1) : T(0);
    const T g = sigmoid(s) - label;
    scratch_g[j] = g;
    loss += j == 0 ? log_sigmoid_loss(s) : log_sigmoid_loss(-s);
    const T scale = lr * g;
    for (std::size_t i = 0; i < width; ++i) input_grad[i] += scale * v[i];
  }
  if (w_out != nullptr) {
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      const T scale = lr * scratch_g[j];
      if (scale == T(0)) continue;
      auto v = w_out->row(outputs[j]);
      for (std::size_t i = 0; i < width; ++i) v[i] -= scale * h[i];
    }
  }
  return loss;
}

inline constexpr int kMaxNegativeRedraws = 10;

/// Appends up to k noise draws to `out`, re-drawing any that hit the target.
/// A negative that still equals the target after the retry budget is skipped.
inline void draw_negatives(const NoiseTable& noise, std::uint32_t target, std::uint32_t k, Rng& rng,
                           std::vector<std::uint32_t>& out) {
  for (std::uint32_t i = 0; i < k; ++i) {
    for (int attempt = 0; attempt < kMaxNegativeRedraws; ++attempt) {
      const auto w = noise.sample(rng);
      if (w != target) {
        out.push_back(w);
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Input composition
// ---------------------------------------------------------------------------

struct Contributor {
  enum class Source : std::uint8_t { word, doc };
  Source source;
  std::uint32_t row;
};

/// Rows forming the hidden vector h and the positions it must predict.
/// When `concatenated`, contributor i fills slice i of h; otherwise all
/// contributors are summed.
struct TrainingContext {
  std::vector<Contributor> contributors;
  std::vector<std::uint32_t> targets;
  bool concatenated = false;
};

/// Builds the training context for one center position of a (subsampled)
/// token sequence. For dbow the center is ignored and every token is a
/// target. For dmpv the full window is always used so slots stay aligned;
/// positions past either end of the sequence take `pad_row`.
inline TrainingContext build_input(Mode mode, std::uint32_t doc_row, std::span<const std::uint32_t> seq,
                                   std::size_t center, std::uint32_t window, std::uint32_t pad_row = 0) {
  TrainingContext ctx;
  const auto n = static_cast<std::ptrdiff_t>(seq.size());
  const auto c = static_cast<std::ptrdiff_t>(center);
  const auto w = static_cast<std::ptrdiff_t>(window);
  switch (mode) {
    case Mode::sg:
      ctx.contributors.push_back({Contributor::Source::word, seq[center]});
      for (auto j = std::max<std::ptrdiff_t>(0, c - w); j <= std::min(n - 1, c + w); ++j)
        if (j != c) ctx.targets.push_back(seq[j]);
      break;
    case Mode::cbow:
      for (auto j = std::max<std::ptrdiff_t>(0, c - w); j <= std::min(n - 1, c + w); ++j)
        if (j != c) ctx.contributors.push_back({Contributor::Source::word, seq[j]});
      if (!ctx.contributors.empty()) ctx.targets.push_back(seq[center]);
      break;
    case Mode::dbow:
      ctx.contributors.push_back({Contributor::Source::doc, doc_row});
      ctx.targets.assign(seq.begin(), seq.end());
      break;
    case Mode::dmpv:
      ctx.concatenated = true;
      ctx.contributors.push_back({Contributor::Source::doc, doc_row});
      for (auto o = -w; o <= w; ++o) {
        if (o == 0) continue;
        const auto j = c + o;
        ctx.contributors.push_back({Contributor::Source::word, j >= 0 && j < n ? seq[j] : pad_row});
      }
      ctx.targets.push_back(seq[center]);
      break;
  }
  return ctx;
}

/// Read access to all matrices plus write access to those being trained.
/// A null update pointer freezes that matrix.
template <class T>
struct Weights {
  const Matrix<T>& word_in;
  const Matrix<T>& word_out;
  const Matrix<T>& docs;
  Matrix<T>* word_in_update = nullptr;
  Matrix<T>* word_out_update = nullptr;
  Matrix<T>* docs_update = nullptr;

  static Weights trainable(Matrix<T>& wi, Matrix<T>& wo, Matrix<T>& d) { return {wi, wo, d, &wi, &wo, &d}; }
};

template <class T>
struct Workspace {
  std::vector<T> h;
  std::vector<T> grad;
  std::vector<T> g;
  std::vector<std::uint32_t> outputs;
};

/// Gathers h from the contributors, runs one negative-sampling step against
/// `outputs` and scatters the input gradient back to the contributor rows.
template <class T>
double contributor_step(const TrainingContext& ctx, std::span<const std::uint32_t> outputs, Weights<T> w, T lr,
                        Workspace<T>& ws) {
  const std::size_t d = w.word_in.cols();
  const std::size_t width = ctx.concatenated ? d * ctx.contributors.size() : d;
  ws.h.assign(width, T(0));
  ws.grad.assign(width, T(0));
  ws.g.resize(outputs.size());

  auto source_row = [&](const Contributor& c) {
    return c.source == Contributor::Source::word ? w.word_in.row(c.row) : w.docs.row(c.row);
  };
  for (std::size_t k = 0; k < ctx.contributors.size(); ++k) {
    const auto src = source_row(ctx.contributors[k]);
    T* dst = ws.h.data() + (ctx.concatenated ? k * d : 0);
    for (std::size_t i = 0; i < d; ++i) dst[i] += src[i];
  }

  const double loss = negative_sampling_step<T>(ws.h, outputs, w.word_out, w.word_out_update, lr, ws.grad, ws.g);

  for (std::size_t k = 0; k < ctx.contributors.size(); ++k) {
    const auto& c = ctx.contributors[k];
    Matrix<T>* target = c.source == Contributor::Source::word ? w.word_in_update : w.docs_update;
    if (target == nullptr) continue;
    auto row = target->row(c.row);
    const T* grad = ws.grad.data() + (ctx.concatenated ? k * d : 0);
    for (std::size_t i = 0; i < d; ++i) row[i] -= grad[i];
  }
  return loss;
}

struct StepTally {
  double loss = 0.0;
  std::uint64_t steps = 0;
};

/// Runs one step per target of the context, each with freshly drawn negatives.
template <class T>
void train_context(const TrainingContext& ctx, Weights<T> w, const NoiseTable& noise, std::uint32_t negative,
                   T lr, Rng& rng, Workspace<T>& ws, StepTally& tally) {
  if (ctx.contributors.empty()) return;
  for (auto target : ctx.targets) {
    ws.outputs.clear();
    ws.outputs.push_back(target);
    draw_negatives(noise, target, negative, rng, ws.outputs);
    const double loss = contributor_step(ctx, ws.outputs, w, lr, ws);
    if (!std::isfinite(loss)) throw Error("non-finite loss encountered; training aborted");
    tally.loss += loss;
    ++tally.steps;
  }
}

/// Occurrence-level subsampling: each token survives with its keep_prob.
inline void subsample(const Vocabulary& vocab, std::span<const std::uint32_t> tokens, Rng& rng,
                      std::vector<std::uint32_t>& out) {
  out.clear();
  for (auto t : tokens) {
    const double keep = vocab[t].keep_prob;
    if (keep >= 1.0 || uniform01(rng) < keep) out.push_back(t);
  }
}

/// One pass of `mode` over a subsampled sequence.
template <class T>
void train_sequence(Mode mode, std::uint32_t doc_row, std::span<const std::uint32_t> seq, std::uint32_t window,
                    std::uint32_t pad_row, Weights<T> w, const NoiseTable& noise, std::uint32_t negative, T lr,
                    Rng& rng, Workspace<T>& ws, StepTally& tally) {
  if (seq.empty()) return;
  if (mode == Mode::dbow) {
    train_context(build_input(mode, doc_row, seq, 0, window, pad_row), w, noise, negative, lr, rng, ws, tally);
    return;
  }
  for (std::size_t center = 0; center < seq.size(); ++center) {
    // dmpv keeps the full window so every slot of h has a fixed meaning.
    const auto effective =
        mode == Mode::dmpv ? window : static_cast<std::uint32_t>(1 + uniform_below(rng, window));
    train_context(build_input(mode, doc_row, seq, center, effective, pad_row), w, noise, negative, lr, rng, ws,
                  tally);
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  std::uint64_t tokens = 0;
  double tokens_per_second = 0.0;
};

struct PretrainedCoverage {
  std::size_t matched = 0;
  std::size_t vocabulary_size = 0;

  double ratio() const { return vocabulary_size == 0 ? 0.0 : static_cast<double>(matched) / vocabulary_size; }
};

struct TrainOptions {
  const WordVectors* pretrained = nullptr;
  // Receives one progress line per epoch when set.
  std::ostream* progress = nullptr;
  // Called after every epoch with the model as trained so far.
  std::function<void(const EmbeddingModel&, const EpochStats&)> on_epoch;
  // Filled with the pretrained coverage when `pretrained` is set.
  PretrainedCoverage* coverage = nullptr;
};

/// Overwrites the input vector of every vocabulary token found in `vectors`.
inline PretrainedCoverage init_from_pretrained(EmbeddingModel& model, const WordVectors& vectors) {
  if (vectors.dim() != model.params.vector_size)
    throw InvalidArgument("pretrained vectors have dimension " + std::to_string(vectors.dim()) +
                          " but the model uses " + std::to_string(model.params.vector_size));
  PretrainedCoverage cov;
  cov.vocabulary_size = model.vocabulary.size();
  std::vector<bool> done(model.vocabulary.size(), false);
  for (std::size_t r = 0; r < vectors.tokens.size(); ++r) {
    auto id = model.vocabulary.find(vectors.tokens[r]);
    if (!id || done[*id]) continue;
    done[*id] = true;
    const auto src = vectors.vectors.row(r);
    std::copy(src.begin(), src.end(), model.word_in.row(*id).begin());
    ++cov.matched;
  }
  return cov;
}

/// Fresh model with the canonical initialization: input and document rows
/// uniform in [-0.5/d, 0.5/d], output rows zero.
inline EmbeddingModel initialize_model(const Corpus& corpus, const Hyperparams& params) {
  EmbeddingModel model;
  model.vocabulary = corpus.vocabulary;
  model.params = params;
  const std::size_t d = params.vector_size;
  const std::size_t v = corpus.vocabulary.size();
  const float bound = 0.5f / static_cast<float>(d);
  Rng rng(mix_seed(params.seed, 0xC0FFEE));

  model.word_in = Matrix<float>(v + (params.mode == Mode::dmpv ? 1 : 0), d);
  for (auto& x : model.word_in.data()) x = uniform_real(rng, -bound, bound);
  model.word_out = Matrix<float>(v, params.input_width(), 0.0f);
  if (is_document_mode(params.mode)) {
    std::vector<std::string> tags;
    tags.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) tags.push_back(doc.tag);
    model.set_doc_tags(std::move(tags));
    model.docs = Matrix<float>(corpus.documents.size(), d);
    for (auto& x : model.docs.data()) x = uniform_real(rng, -bound, bound);
  }
  return model;
}

namespace detail {

inline void train_documents(const Corpus& corpus, std::size_t begin, std::size_t end, EmbeddingModel& model,
                            const NoiseTable& noise, float lr, Rng& rng, StepTally& tally, std::uint64_t& tokens) {
  const auto& p = model.params;
  auto weights = Weights<float>::trainable(model.word_in, model.word_out, model.docs);
  Workspace<float> ws;
  std::vector<std::uint32_t> seq;
  const auto pad = static_cast<std::uint32_t>(model.pad_row());
  for (std::size_t i = begin; i < end; ++i) {
    const auto& doc = corpus.documents[i];
    if (doc.tokens.empty()) continue;
    subsample(model.vocabulary, doc.tokens, rng, seq);
    tokens += seq.size();
    const auto row = static_cast<std::uint32_t>(i);
    if (p.mode == Mode::dbow && p.dbow_train_words)
      train_sequence(Mode::sg, row, seq, p.window, pad, weights, noise, p.negative, lr, rng, ws, tally);
    train_sequence(p.mode, row, seq, p.window, pad, weights, noise, p.negative, lr, rng, ws, tally);
  }
}

}  // namespace detail

/// Trains a model on `corpus`. Multi-worker runs update the shared matrices
/// without locks (Hogwild-style) and are not bit-reproducible; a single
/// worker with a fixed seed is.
inline EmbeddingModel train(const Corpus& corpus, Hyperparams params, const TrainOptions& opts = {}) {
  params.validate();
  const bool any = std::any_of(corpus.documents.begin(), corpus.documents.end(),
                               [](const Document& d) { return !d.tokens.empty(); });
  if (!any) throw DataError("corpus has no non-empty documents");
  if (opts.pretrained && params.mode == Mode::dbow) params.dbow_train_words = true;

  EmbeddingModel model = initialize_model(corpus, params);
  if (opts.pretrained) {
    const auto cov = init_from_pretrained(model, *opts.pretrained);
    if (opts.coverage) *opts.coverage = cov;
    if (opts.progress)
      *opts.progress << "pretrained coverage " << cov.matched << "/" << cov.vocabulary_size << " ("
                     << 100.0 * cov.ratio() << "%)\n";
  }
  const NoiseTable noise(model.vocabulary);
  const std::size_t n_docs = corpus.documents.size();
  const std::size_t workers = std::min<std::size_t>(params.workers, n_docs);

  for (std::uint32_t epoch = 0; epoch < params.epochs; ++epoch) {
    const auto lr = static_cast<float>(epoch_learning_rate(epoch, params));
    const auto started = std::chrono::steady_clock::now();
    std::vector<StepTally> tallies(workers);
    std::vector<std::uint64_t> tokens(workers, 0);
    std::vector<std::exception_ptr> failures(workers);

    auto run = [&](std::size_t wk) {
      try {
        Rng rng(mix_seed(params.seed, static_cast<std::uint64_t>(epoch) * workers + wk));
        detail::train_documents(corpus, wk * n_docs / workers, (wk + 1) * n_docs / workers, model, noise, lr, rng,
                                tallies[wk], tokens[wk]);
      } catch (...) {
        failures[wk] = std::current_exception();
      }
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t wk = 0; wk < workers; ++wk) pool.emplace_back(run, wk);
    }
    for (std::size_t wk = 0; wk < workers; ++wk) {
      if (!failures[wk]) continue;
      try {
        std::rethrow_exception(failures[wk]);
      } catch (const std::exception& e) {
        throw Error("epoch " + std::to_string(epoch) + " (lr " + std::to_string(lr) + "): " + e.what());
      }
    }

    StepTally total;
    EpochStats stats;
    for (std::size_t wk = 0; wk < workers; ++wk) {
      total.loss += tallies[wk].loss;
      total.steps += tallies[wk].steps;
      stats.tokens += tokens[wk];
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    stats.epoch = epoch;
    stats.mean_loss = total.steps ? total.loss / static_cast<double>(total.steps) : 0.0;
    stats.learning_rate = lr;
    stats.tokens_per_second = secs > 0 ? static_cast<double>(stats.tokens) / secs : 0.0;
    if (opts.progress)
      *opts.progress << "epoch " << epoch + 1 << "/" << params.epochs << " loss " << stats.mean_loss << " lr "
                     << stats.learning_rate << " tokens/s " << static_cast<std::uint64_t>(stats.tokens_per_second)
                     << "\n";
    if (opts.on_epoch) opts.on_epoch(model, stats);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Frozen inference
// ---------------------------------------------------------------------------

struct InferParams {
  double alpha = 0.01;
  double alpha_min = 0.0001;
  std::uint32_t epochs = 1000;

  void validate() const {
    if (!(alpha_min > 0.0) || !(alpha_min <= alpha))
      throw InvalidArgument("inference learning rates must satisfy 0 < min-alpha <= alpha");
    if (epochs < 1) throw InvalidArgument("inference epochs must be >= 1");
  }
};

/// Learns a vector for an unseen document. Only the new vector is updated;
/// the model is read-only.
inline DocVector infer_document(const EmbeddingModel& model, std::span<const std::uint32_t> tokens,
                                const InferParams& ip, Rng& rng) {
  ip.validate();
  const auto& p = model.params;
  if (!is_document_mode(p.mode))
    throw InvalidArgument("inference needs a dbow or dmpv model, not " + std::string(mode_name(p.mode)));
  if (tokens.empty()) throw DataError("nothing to infer on (no in-vocabulary tokens)");

  const std::size_t d = p.vector_size;
  const float bound = 0.5f / static_cast<float>(d);
  Matrix<float> doc(1, d);
  for (auto& x : doc.data()) x = uniform_real(rng, -bound, bound);

  const Weights<float> weights{model.word_in, model.word_out, doc, nullptr, nullptr, &doc};
  const NoiseTable noise(model.vocabulary);
  Workspace<float> ws;
  StepTally tally;
  std::vector<std::uint32_t> seq;
  const auto pad = static_cast<std::uint32_t>(model.pad_row());
  for (std::uint32_t e = 0; e < ip.epochs; ++e) {
    const double t = static_cast<double>(e) / static_cast<double>(std::max<std::uint32_t>(1, ip.epochs - 1));
    const auto lr = static_cast<float>(std::lerp(ip.alpha, ip.alpha_min, t));
    subsample(model.vocabulary, tokens, rng, seq);
    train_sequence(p.mode, 0, seq, p.window, pad, weights, noise, p.negative, lr, rng, ws, tally);
  }
  DocVector out;
  out.values.assign(doc.data().begin(), doc.data().end());
  return out;
}

inline DocVector infer_document(const EmbeddingModel& model, std::span<const std::string> tokens,
                                const InferParams& ip, Rng& rng) {
  return infer_document(model, std::span<const std::uint32_t>(lookup_tokens(model.vocabulary, tokens)), ip, rng);
}

}  // namespace vecforge
