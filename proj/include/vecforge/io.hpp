#pragma once

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "vecforge/embedding.hpp"
#include "vecforge/error.hpp"

namespace vecforge {

// ---------------------------------------------------------------------------
// Word-vector interchange (the classic word2vec text and binary layouts)
// ---------------------------------------------------------------------------

enum class VectorFormat { text, binary };

inline VectorFormat parse_vector_format(std::string_view name) {
  if (name == "text" || name == "txt") return VectorFormat::text;
  if (name == "binary" || name == "bin") return VectorFormat::binary;
  throw InvalidArgument("unknown vector format '" + std::string(name) + "' (expected text or binary)");
}

struct WordVectors {
  std::vector<std::string> tokens;
  Matrix<float> vectors;

  std::size_t dim() const { return vectors.cols(); }
};

namespace detail {

inline std::string format_float(float x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline float parse_float(std::string_view s, std::size_t lineno) {
  float x = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("line " + std::to_string(lineno) + ": bad number '" + std::string(s) + "'");
  if (!std::isfinite(x)) throw FormatError("line " + std::to_string(lineno) + ": non-finite value");
  return x;
}

inline std::pair<std::size_t, std::size_t> parse_header(std::string_view line) {
  const auto fields = split_tokens(line);
  std::size_t rows = 0, dim = 0;
  auto parse = [](const std::string& s, std::size_t& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  };
  if (fields.size() != 2 || !parse(fields[0], rows) || !parse(fields[1], dim) || dim == 0)
    throw FormatError("malformed header '" + std::string(line) + "' (expected '<rows> <dim>')");
  return {rows, dim};
}

inline void write_f32_le(std::string& out, float x) {
  const auto bits = std::bit_cast<std::uint32_t>(x);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace detail

inline std::string encode_word_vectors(std::span<const std::string> tokens, const Matrix<float>& m,
                                       VectorFormat format) {
  std::string out = std::to_string(tokens.size()) + " " + std::to_string(m.cols()) + "\n";
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    out += tokens[r];
    if (format == VectorFormat::text) {
      for (float x : m.row(r)) {
        out.push_back(' ');
        out += detail::format_float(x);
      }
    } else {
      out.push_back(' ');
      for (float x : m.row(r)) detail::write_f32_le(out, x);
    }
    out.push_back('\n');
  }
  return out;
}

inline WordVectors decode_word_vectors(std::string_view bytes, VectorFormat format) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError("missing header line");
  const auto [rows, dim] = detail::parse_header(bytes.substr(0, nl));
  WordVectors wv;
  wv.vectors = Matrix<float>(rows, dim);
  wv.tokens.reserve(rows);
  std::size_t pos = nl + 1;

  if (format == VectorFormat::text) {
    std::size_t lineno = 1;
    while (pos < bytes.size()) {
      auto end = bytes.find('\n', pos);
      if (end == std::string_view::npos) end = bytes.size();
      auto line = bytes.substr(pos, end - pos);
      pos = end + 1;
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      const auto fields = split_tokens(line);
      if (wv.tokens.size() == rows)
        throw FormatError("header claims " + std::to_string(rows) + " rows but file has more");
      if (fields.size() != dim + 1)
        throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                          " values, found " + std::to_string(fields.size() - 1));
      auto row = wv.vectors.row(wv.tokens.size());
      for (std::size_t i = 0; i < dim; ++i) row[i] = detail::parse_float(fields[i + 1], lineno);
      wv.tokens.push_back(fields[0]);
    }
  } else {
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t r = 0; r < rows; ++r) {
      while (pos < bytes.size() && (bytes[pos] == '\n' || bytes[pos] == '\r' || bytes[pos] == ' ')) ++pos;
      const auto sp = bytes.find(' ', pos);
      if (pos >= bytes.size() || sp == std::string_view::npos)
        throw FormatError("header claims " + std::to_string(rows) + " rows but file has " +
                          std::to_string(r));
      std::string token(bytes.substr(pos, sp - pos));
      pos = sp + 1;
      if (bytes.size() - pos < dim * 4)
        throw FormatError("row " + std::to_string(r + 1) + " ('" + token + "') is truncated");
      auto row = wv.vectors.row(r);
      for (std::size_t i = 0; i < dim; ++i, pos += 4) {
        row[i] = detail::read_f32_le(base + pos);
        if (!std::isfinite(row[i])) throw FormatError("row " + std::to_string(r + 1) + ": non-finite value");
      }
      wv.tokens.push_back(std::move(token));
    }
    while (pos < bytes.size() && (bytes[pos] == '\n' || bytes[pos] == '\r')) ++pos;
    if (pos != bytes.size()) throw FormatError("trailing data after " + std::to_string(rows) + " rows");
  }

  if (wv.tokens.size() != rows)
    throw FormatError("header claims " + std::to_string(rows) + " rows but file has " +
                      std::to_string(wv.tokens.size()));
  return wv;
}

inline WordVectors load_word_vectors(const std::string& path, VectorFormat format) {
  return decode_word_vectors(detail::slurp(path), format);
}

inline void save_word_vectors(const std::string& path, const WordVectors& wv, VectorFormat format) {
  detail::write_file(path, encode_word_vectors(wv.tokens, wv.vectors, format));
}

enum class ExportTarget { words, docs };

inline ExportTarget parse_export_target(std::string_view name) {
  if (name == "words") return ExportTarget::words;
  if (name == "docs") return ExportTarget::docs;
  throw InvalidArgument("unknown export target '" + std::string(name) + "' (expected words or docs)");
}

/// Word rows (vocabulary order, padding row excluded) or document rows
/// (tag order) in the interchange layout.
inline WordVectors model_rows(const EmbeddingModel& model, ExportTarget which) {
  WordVectors wv;
  if (which == ExportTarget::docs) {
    if (model.docs.rows() == 0) throw DataError("no document vectors in this model");
    wv.tokens = model.doc_tags;
    wv.vectors = model.docs;
    return wv;
  }
  const std::size_t v = model.vocabulary.size();
  wv.vectors = Matrix<float>(v, model.word_in.cols());
  for (std::size_t r = 0; r < v; ++r) {
    wv.tokens.push_back(model.vocabulary[r].surface);
    std::copy_n(model.word_in.row(r).begin(), wv.vectors.cols(), wv.vectors.row(r).begin());
  }
  return wv;
}

/// Wraps external word vectors as a word-only model so they can back the
/// averaging baseline and nearest-neighbour queries. Counts are unknown and
/// set to 1; repeated tokens keep their first row.
inline EmbeddingModel model_from_word_vectors(const WordVectors& wv) {
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  std::vector<std::size_t> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < wv.tokens.size(); ++r) {
    if (!seen.insert(wv.tokens[r]).second) continue;
    counts.emplace_back(wv.tokens[r], 1);
    rows.push_back(r);
  }
  EmbeddingModel model;
  model.params = Hyperparams::defaults_for(Mode::sg);
  model.params.vector_size = static_cast<std::uint32_t>(wv.dim());
  model.vocabulary = Vocabulary::from_ordered_counts(std::move(counts), model.params.sample);
  model.word_in = Matrix<float>(rows.size(), wv.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = wv.vectors.row(rows[i]);
    std::copy(src.begin(), src.end(), model.word_in.row(i).begin());
  }
  model.word_out = Matrix<float>(rows.size(), wv.dim());
  return model;
}

inline void export_text(const EmbeddingModel& model, ExportTarget which, const std::string& path) {
  save_word_vectors(path, model_rows(model, which), VectorFormat::text);
}

// ---------------------------------------------------------------------------
// Native model file
//
//   "VECFORGE1" | u32 version | u64 metadata length | metadata
//   | word_in | word_out | docs | u32 crc32 of all preceding bytes
//
// All integers and floats little-endian. Each matrix is u64 rows, u64 cols,
// then rows*cols f32 values.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "VECFORGE1";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) { put(x, 4); }
  void u64(std::uint64_t x) { put(x, 8); }
  void f64(double x) { put(std::bit_cast<std::uint64_t>(x), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(std::string_view s) { buf_.append(s); }
  void matrix(const Matrix<float>& m) {
    u64(m.rows());
    u64(m.cols());
    if constexpr (std::endian::native == std::endian::little) {
      const auto d = m.data();
      buf_.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(float));
    } else {
      for (float x : m.data()) write_f32_le(buf_, x);
    }
  }
  std::string& bytes() { return buf_; }

 private:
  void put(std::uint64_t x, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix<float> matrix() {
    const auto rows = u64();
    const auto cols = u64();
    if (cols != 0 && rows > (bytes_.size() - pos_) / 4 / cols) throw FormatError("model file truncated mid-matrix");
    Matrix<float> m(rows, cols);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    auto d = m.data();
    need(d.size() * 4);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = read_f32_le(p + 4 * i);
    pos_ += d.size() * 4;
    return m;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("model file truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return x;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::string encode_model(const EmbeddingModel& model) {
  detail::ByteWriter meta;
  const auto& p = model.params;
  meta.u8(static_cast<std::uint8_t>(p.mode));
  meta.u32(p.vector_size);
  meta.u32(p.window);
  meta.u64(p.min_count);
  meta.f64(p.sample);
  meta.u32(p.negative);
  meta.u32(p.epochs);
  meta.f64(p.alpha);
  meta.f64(p.alpha_min);
  meta.u8(p.dbow_train_words ? 1 : 0);
  meta.u64(p.seed);
  meta.u32(p.workers);

  meta.f64(model.vocabulary.subsample_threshold());
  meta.u64(model.vocabulary.size());
  for (const auto& e : model.vocabulary.entries()) {
    meta.str(e.surface);
    meta.u64(e.count);
  }
  meta.u64(model.doc_tags.size());
  for (const auto& t : model.doc_tags) meta.str(t);

  detail::ByteWriter out;
  out.raw(kModelMagic);
  out.u32(kModelVersion);
  out.u64(meta.bytes().size());
  out.raw(meta.bytes());
  out.matrix(model.word_in);
  out.matrix(model.word_out);
  out.matrix(model.docs);
  out.u32(detail::crc32_of(out.bytes()));
  return std::move(out.bytes());
}

inline EmbeddingModel decode_model(std::string_view bytes) {
  if (bytes.size() < kModelMagic.size() || bytes.substr(0, kModelMagic.size()) != kModelMagic)
    throw FormatError("not a vecforge model file (bad magic)");
  detail::ByteReader in(bytes.substr(kModelMagic.size()));
  const auto version = in.u32();
  if (version != kModelVersion)
    throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelVersion) + ")");
  const auto meta_len = in.u64();
  if (meta_len > in.remaining()) throw FormatError("model file truncated in metadata");
  detail::ByteReader meta(in.raw(meta_len));

  EmbeddingModel model;
  auto& p = model.params;
  const auto mode = meta.u8();
  if (mode > static_cast<std::uint8_t>(Mode::dmpv)) throw FormatError("unknown mode in model file");
  p.mode = static_cast<Mode>(mode);
  p.vector_size = meta.u32();
  p.window = meta.u32();
  p.min_count = meta.u64();
  p.sample = meta.f64();
  p.negative = meta.u32();
  p.epochs = meta.u32();
  p.alpha = meta.f64();
  p.alpha_min = meta.f64();
  p.dbow_train_words = meta.u8() != 0;
  p.seed = meta.u64();
  p.workers = meta.u32();

  const double vocab_t = meta.f64();
  const auto vocab_size = meta.u64();
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    auto s = meta.str();
    counts.emplace_back(std::move(s), meta.u64());
  }
  const auto n_tags = meta.u64();
  std::vector<std::string> tags;
  for (std::uint64_t i = 0; i < n_tags; ++i) tags.push_back(meta.str());
  if (meta.remaining() != 0) throw FormatError("unexpected bytes in model metadata");

  model.word_in = in.matrix();
  model.word_out = in.matrix();
  model.docs = in.matrix();
  const std::size_t payload_end = kModelMagic.size() + in.position();
  const auto stored_crc = in.u32();
  if (in.remaining() != 0) throw FormatError("trailing bytes after model checksum");
  if (stored_crc != detail::crc32_of(bytes.substr(0, payload_end))) throw FormatError("model checksum mismatch");

  try {
    model.vocabulary = Vocabulary::from_ordered_counts(std::move(counts), vocab_t);
    model.set_doc_tags(std::move(tags));
  } catch (const Error& e) {
    throw FormatError(std::string("inconsistent model file: ") + e.what());
  }
  const std::size_t expected_in_rows = model.vocabulary.size() + (p.mode == Mode::dmpv ? 1 : 0);
  if (model.word_in.rows() != expected_in_rows || model.word_in.cols() != p.vector_size ||
      model.word_out.rows() != model.vocabulary.size() || model.word_out.cols() != p.input_width() ||
      model.docs.rows() != model.doc_tags.size() ||
      (model.docs.rows() > 0 && model.docs.cols() != p.vector_size))
    throw FormatError("model matrix shapes do not match its metadata");
  return model;
}

inline void save_model(const EmbeddingModel& model, const std::string& path) {
  detail::write_file(path, encode_model(model));
}

inline EmbeddingModel load_model(const std::string& path) { return decode_model(detail::slurp(path)); }

}  // namespace vecforge
