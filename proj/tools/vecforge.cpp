// vecforge command-line interface: vocabulary building, training, frozen
// inference, evaluation, nearest neighbours, export and synthetic fixtures.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vecforge/vecforge.hpp"

namespace {

using namespace vecforge;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Writes to `path`, or standard output when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw DataError("cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

struct TrainFlags {
  std::string input;
  std::string format = "tagged-lines";
  std::string out;
  std::string mode = "dbow";
  std::uint32_t size = 0;
  std::uint32_t window = 0;
  std::uint64_t min_count = 0;
  double sample = 0;
  std::uint32_t negative = 0;
  std::uint32_t epochs = 0;
  double alpha = 0;
  double min_alpha = 0;
  bool dbow_words = true;
  std::string pretrained;
  std::string pretrained_format = "text";
  std::uint32_t workers = 1;
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct InferFlags {
  double alpha = InferParams{}.alpha;
  double min_alpha = InferParams{}.alpha_min;
  std::uint32_t epochs = InferParams{}.epochs;

  InferParams params() const { return {alpha, min_alpha, epochs}; }
};

void add_infer_options(CLI::App* cmd, InferFlags& f) {
  cmd->add_option("--alpha", f.alpha, "Initial inference learning rate")->capture_default_str();
  cmd->add_option("--min-alpha", f.min_alpha, "Final inference learning rate")->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "Inference epochs")->capture_default_str();
}

Hyperparams resolve_hyperparams(const CLI::App& cmd, const TrainFlags& f) {
  Hyperparams p = Hyperparams::defaults_for(parse_mode(f.mode));
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--size")) p.vector_size = f.size;
  if (given("--window")) p.window = f.window;
  if (given("--min-count")) p.min_count = f.min_count;
  if (given("--sample")) p.sample = f.sample;
  if (given("--negative")) p.negative = f.negative;
  if (given("--epochs")) p.epochs = f.epochs;
  if (given("--alpha")) p.alpha = f.alpha;
  if (given("--min-alpha")) p.alpha_min = f.min_alpha;
  p.dbow_train_words = f.dbow_words;
  p.workers = f.workers;
  p.seed = f.seed;
  p.validate();
  return p;
}

int run_vocab(const std::string& input, const std::string& format, std::uint64_t min_count, double sample,
              const std::string& out) {
  if (min_count < 1 || !(sample > 0)) throw InvalidArgument("--min-count must be >= 1 and --sample > 0");
  const auto raw = read_documents(input, parse_corpus_format(format));
  const auto vocab = build_vocabulary(std::span<const RawDocument>(raw), min_count, sample);
  Output o(out);
  write_vocabulary(o.stream(), vocab);
  return kExitOk;
}

int run_train(const CLI::App& cmd, const TrainFlags& f) {
  const Hyperparams params = resolve_hyperparams(cmd, f);
  const auto format = parse_corpus_format(f.format);
  std::optional<VectorFormat> pre_format;
  if (!f.pretrained.empty()) pre_format = parse_vector_format(f.pretrained_format);

  const Corpus corpus = load_corpus(f.input, format, params.min_count, params.sample);
  if (!corpus.empty_documents.empty() && !f.quiet)
    std::cerr << "warning: " << corpus.empty_documents.size() << " empty document(s) will be skipped\n";

  std::optional<WordVectors> pretrained;
  if (pre_format) pretrained = load_word_vectors(f.pretrained, *pre_format);

  TrainOptions opts;
  if (pretrained) opts.pretrained = &*pretrained;
  if (!f.quiet) opts.progress = &std::cerr;
  if (!f.quiet)
    std::cerr << "training " << mode_name(params.mode) << ": " << corpus.documents.size() << " documents, "
              << corpus.vocabulary.size() << " word types, " << corpus.total_token_count << " tokens\n";
  const EmbeddingModel model = train(corpus, params, opts);
  save_model(model, f.out);
  return kExitOk;
}

int run_infer(const std::string& model_path, const std::string& input, const std::string& format,
              const InferFlags& flags, std::uint64_t seed, std::uint32_t workers, const std::string& out) {
  const auto ip = flags.params();
  ip.validate();
  if (workers < 1) throw InvalidArgument("--workers must be >= 1");
  const EmbeddingModel model = load_model(model_path);
  if (!is_document_mode(model.params.mode))
    throw InvalidArgument("inference needs a dbow or dmpv model, not " + std::string(mode_name(model.params.mode)));
  const auto docs = read_documents(input, parse_corpus_format(format));

  std::vector<std::vector<std::uint32_t>> ids(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ids[i] = lookup_tokens(model.vocabulary, docs[i].tokens);
    if (ids[i].empty()) throw DataError("document '" + docs[i].tag + "': nothing to infer on (no in-vocabulary tokens)");
  }

  // Each document has its own random stream, so output does not depend on
  // the worker count.
  Matrix<float> vectors(docs.size(), model.params.vector_size);
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < docs.size(); i += workers) {
      Rng rng(mix_seed(seed, i));
      const auto v = infer_document(model, std::span<const std::uint32_t>(ids[i]), ip, rng);
      std::copy(v.values.begin(), v.values.end(), vectors.row(i).begin());
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
  }

  std::vector<std::string> tags;
  for (const auto& d : docs) tags.push_back(d.tag);
  Output o(out);
  o.stream() << encode_word_vectors(tags, vectors, VectorFormat::text);
  return kExitOk;
}

struct EvalFlags {
  std::string scorer = "doc2vec";
  std::string model;
  std::string vectors;
  std::string vectors_format = "text";
  std::size_t ngram_order = kDefaultNgramOrder;
  std::string dump;
  std::string out;
  std::uint64_t seed = 1;
  InferFlags infer;
};

// Word model behind the averaging scorer: a native model or external vectors.
EmbeddingModel averaging_model(const EvalFlags& f) {
  if (!f.vectors.empty()) return model_from_word_vectors(load_word_vectors(f.vectors, parse_vector_format(f.vectors_format)));
  if (!f.model.empty()) return load_model(f.model);
  throw InvalidArgument("--scorer average needs --model or --vectors");
}

void emit_report(const EvalReport& report, const EvalFlags& f) {
  Output o(f.out);
  o.stream() << report_line(report) << '\n';
  if (!f.dump.empty()) {
    Output d(f.dump);
    write_scores(d.stream(), report);
  }
}

int run_eval_qdup(const std::string& pairs_path, const std::string& corpus_path, const std::string& format,
                  const EvalFlags& f) {
  const auto pairs = read_qdup_pairs(pairs_path);
  std::vector<RawDocument> docs;
  if (f.scorer != "doc2vec") {
    if (corpus_path.empty()) throw InvalidArgument("--scorer " + f.scorer + " needs --corpus");
    docs = read_documents(corpus_path, parse_corpus_format(format));
  }

  EvalReport report;
  if (f.scorer == "doc2vec") {
    if (f.model.empty()) throw InvalidArgument("--scorer doc2vec needs --model");
    const auto model = load_model(f.model);
    report = run_qdup(doc_vector_scorer(model), pairs, &std::cerr);
  } else if (f.scorer == "average") {
    const auto model = averaging_model(f);
    report = run_qdup(text_by_tag(docs, averaging_scorer(model)), pairs, &std::cerr);
  } else if (f.scorer == "ngram") {
    report = run_qdup(text_by_tag(docs, ngram_scorer(f.ngram_order)), pairs, &std::cerr);
  } else {
    throw InvalidArgument("unknown scorer '" + f.scorer + "' (expected doc2vec, average or ngram)");
  }
  emit_report(report, f);
  return kExitOk;
}

int run_eval_sts(const std::string& sts_path, const EvalFlags& f) {
  const auto ip = f.infer.params();
  ip.validate();
  const auto records = read_sts(sts_path);
  EvalReport report;
  if (f.scorer == "doc2vec") {
    if (f.model.empty()) throw InvalidArgument("--scorer doc2vec needs --model");
    const auto model = load_model(f.model);
    if (!is_document_mode(model.params.mode)) throw InvalidArgument("--scorer doc2vec needs a dbow or dmpv model");
    report = run_sts(inference_scorer(model, ip, f.seed), records, &std::cerr);
  } else if (f.scorer == "average") {
    const auto model = averaging_model(f);
    report = run_sts(averaging_scorer(model), records, &std::cerr);
  } else if (f.scorer == "ngram") {
    report = run_sts(ngram_scorer(f.ngram_order), records, &std::cerr);
  } else {
    throw InvalidArgument("unknown scorer '" + f.scorer + "' (expected doc2vec, average or ngram)");
  }
  emit_report(report, f);
  return kExitOk;
}

int run_nn(const std::string& model_path, const std::string& word, const std::string& doc, std::size_t topn,
           const std::string& out) {
  if (word.empty() == doc.empty()) throw InvalidArgument("give exactly one of --word or --doc");
  const auto model = load_model(model_path);
  const bool by_word = !word.empty();
  const Matrix<float>& rows = by_word ? model.word_in : model.docs;
  std::size_t n = by_word ? model.vocabulary.size() : model.docs.rows();
  std::optional<std::uint32_t> query = by_word ? model.vocabulary.find(word) : model.find_doc(doc);
  if (!query) throw DataError(by_word ? "word '" + word + "' not in vocabulary" : "unknown document tag '" + doc + "'");

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == *query) continue;
    if (auto c = safe_cosine(rows.row(*query), rows.row(r))) scored.emplace_back(*c, r);
  }
  const auto k = std::min(topn, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  Output o(out);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& name = by_word ? model.vocabulary[scored[i].second].surface : model.doc_tags[scored[i].second];
    o.stream() << name << '\t' << detail::format_double(scored[i].first) << '\n';
  }
  return kExitOk;
}

int run_export(const std::string& model_path, const std::string& which, const std::string& out) {
  const auto target = parse_export_target(which);
  const auto model = load_model(model_path);
  export_text(model, target, out);
  return kExitOk;
}

int run_synth(const SyntheticSpec& spec, const std::string& out_dir) {
  const auto data = make_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  {
    Output o((dir / "corpus.tsv").string());
    for (const auto& d : data.documents) {
      o.stream() << d.tag << '\t';
      for (std::size_t i = 0; i < d.tokens.size(); ++i) o.stream() << (i ? " " : "") << d.tokens[i];
      o.stream() << '\n';
    }
  }
  {
    Output o((dir / "qdup_pairs.tsv").string());
    write_qdup_pairs(o.stream(), data.qdup);
  }
  {
    Output o((dir / "sts.tsv").string());
    write_sts(o.stream(), data.sts);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vecforge: word2vec / doc2vec training, inference and evaluation"};
  app.require_subcommand(1);

  // vocab
  std::string v_input, v_format = "tagged-lines", v_out;
  std::uint64_t v_min_count = 5;
  double v_sample = 1e-5;
  auto* vocab = app.add_subcommand("vocab", "Build and print the vocabulary (surface<TAB>count)");
  vocab->add_option("--input", v_input, "Corpus file")->required();
  vocab->add_option("--format", v_format, "tagged-lines or plain-lines")->capture_default_str();
  vocab->add_option("--min-count", v_min_count, "Minimum frequency threshold")->capture_default_str();
  vocab->add_option("--sample", v_sample, "Subsampling threshold")->capture_default_str();
  vocab->add_option("--out", v_out, "Output file (default stdout)");

  // train
  TrainFlags tf;
  auto* trn = app.add_subcommand("train", "Train a sg, cbow, dbow or dmpv model");
  trn->add_option("--input", tf.input, "Corpus file")->required();
  trn->add_option("--format", tf.format, "tagged-lines or plain-lines")->capture_default_str();
  trn->add_option("--out", tf.out, "Model file to write")->required();
  trn->add_option("--mode", tf.mode, "sg, cbow, dbow or dmpv")->capture_default_str();
  trn->add_option("--size", tf.size, "Vector size (default 300)");
  trn->add_option("--window", tf.window, "Context window (dbow 15, others 5)");
  trn->add_option("--min-count", tf.min_count, "Minimum frequency threshold (default 5)");
  trn->add_option("--sample", tf.sample, "Subsampling threshold (dmpv 1e-6, others 1e-5)");
  trn->add_option("--negative", tf.negative, "Negative samples (default 5)");
  trn->add_option("--epochs", tf.epochs, "Epochs (dbow 20, dmpv 600, sg/cbow 100)");
  trn->add_option("--alpha", tf.alpha, "Initial learning rate (default 0.025)");
  trn->add_option("--min-alpha", tf.min_alpha, "Final learning rate (default 0.0001)");
  trn->add_option("--dbow-words", tf.dbow_words, "dbow: interleave skip-gram word training (1/0)")
      ->capture_default_str();
  trn->add_option("--pretrained", tf.pretrained, "Word vectors to initialise the input matrix");
  trn->add_option("--pretrained-format", tf.pretrained_format, "text or binary")->capture_default_str();
  trn->add_option("--workers", tf.workers, "Worker threads (1 = reproducible)")->capture_default_str();
  trn->add_option("--seed", tf.seed, "Random seed")->capture_default_str();
  trn->add_flag("--quiet", tf.quiet, "No progress output");

  // infer
  std::string i_model, i_input, i_format = "plain-lines", i_out;
  std::uint64_t i_seed = 1;
  std::uint32_t i_workers = 1;
  InferFlags i_flags;
  auto* inf = app.add_subcommand("infer", "Infer vectors for unseen documents with a frozen model");
  inf->add_option("--model", i_model, "Trained dbow or dmpv model")->required();
  inf->add_option("--input", i_input, "Documents, one per line")->required();
  inf->add_option("--format", i_format, "tagged-lines or plain-lines")->capture_default_str();
  add_infer_options(inf, i_flags);
  inf->add_option("--seed", i_seed, "Random seed")->capture_default_str();
  inf->add_option("--workers", i_workers, "Worker threads")->capture_default_str();
  inf->add_option("--out", i_out, "Output vectors (text interchange, default stdout)");

  // eval qdup / eval sts
  auto* ev = app.add_subcommand("eval", "Evaluate a scorer on a task");
  ev->require_subcommand(1);
  EvalFlags qf, sf;
  std::string q_pairs, q_corpus, q_format = "tagged-lines", s_file;
  auto add_scorer_options = [](CLI::App* cmd, EvalFlags& f) {
    cmd->add_option("--scorer", f.scorer, "doc2vec, average or ngram")->capture_default_str();
    cmd->add_option("--model", f.model, "Native model file");
    cmd->add_option("--vectors", f.vectors, "External word vectors for --scorer average");
    cmd->add_option("--vectors-format", f.vectors_format, "text or binary")->capture_default_str();
    cmd->add_option("--ngram-order", f.ngram_order, "Highest n-gram order")->capture_default_str();
    cmd->add_option("--dump", f.dump, "Write per-pair scores here");
    cmd->add_option("--out", f.out, "Report file (default stdout)");
  };
  auto* qdup = ev->add_subcommand("qdup", "Duplicate-pair ranking (ROC AUC)");
  qdup->add_option("--pairs", q_pairs, "tag_a<TAB>tag_b<TAB>label file")->required();
  qdup->add_option("--corpus", q_corpus, "Corpus with the documents' text");
  qdup->add_option("--format", q_format, "Corpus format")->capture_default_str();
  add_scorer_options(qdup, qf);
  auto* sts = ev->add_subcommand("sts", "Semantic textual similarity (Pearson r)");
  sts->add_option("--sts", s_file, "sentence_a<TAB>sentence_b<TAB>gold file")->required();
  add_scorer_options(sts, sf);
  add_infer_options(sts, sf.infer);
  sts->add_option("--seed", sf.seed, "Random seed for inference")->capture_default_str();

  // nn
  std::string n_model, n_word, n_doc, n_out;
  std::size_t n_top = 10;
  auto* nn = app.add_subcommand("nn", "Nearest neighbours by cosine");
  nn->add_option("--model", n_model, "Model file")->required();
  nn->add_option("--word", n_word, "Query word");
  nn->add_option("--doc", n_doc, "Query document tag");
  nn->add_option("--topn", n_top, "Number of neighbours")->capture_default_str();
  nn->add_option("--out", n_out, "Output file (default stdout)");

  // export
  std::string e_model, e_which = "words", e_out;
  auto* exp = app.add_subcommand("export", "Export word or document vectors in text interchange format");
  exp->add_option("--model", e_model, "Model file")->required();
  exp->add_option("--which", e_which, "words or docs")->capture_default_str();
  exp->add_option("--out", e_out, "Output file")->required();

  // synth
  SyntheticSpec spec;
  std::string s_out;
  auto* syn = app.add_subcommand("synth", "Write a synthetic corpus with qdup and sts pair files");
  syn->add_option("--out-dir", s_out, "Directory for corpus.tsv, qdup_pairs.tsv, sts.tsv")->required();
  syn->add_option("--topics", spec.n_topics)->capture_default_str();
  syn->add_option("--docs-per-topic", spec.docs_per_topic)->capture_default_str();
  syn->add_option("--doc-len", spec.doc_len)->capture_default_str();
  syn->add_option("--vocab-per-topic", spec.vocab_per_topic)->capture_default_str();
  syn->add_option("--function-words", spec.n_function_words)->capture_default_str();
  syn->add_option("--dup-fraction", spec.dup_fraction)->capture_default_str();
  syn->add_option("--dropout", spec.dropout)->capture_default_str();
  syn->add_option("--function-rate", spec.function_rate)->capture_default_str();
  syn->add_option("--off-topic-rate", spec.off_topic_rate)->capture_default_str();
  syn->add_option("--sts-records", spec.sts_records)->capture_default_str();
  syn->add_option("--seed", spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*vocab) return run_vocab(v_input, v_format, v_min_count, v_sample, v_out);
    if (*trn) return run_train(*trn, tf);
    if (*inf) return run_infer(i_model, i_input, i_format, i_flags, i_seed, i_workers, i_out);
    if (*qdup) return run_eval_qdup(q_pairs, q_corpus, q_format, qf);
    if (*sts) return run_eval_sts(s_file, sf);
    if (*nn) return run_nn(n_model, n_word, n_doc, n_top, n_out);
    if (*exp) return run_export(e_model, e_which, e_out);
    if (*syn) return run_synth(spec, s_out);
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
