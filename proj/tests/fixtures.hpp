#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vecforge/vecforge.hpp"

namespace fixtures {

using namespace vecforge;

inline Corpus corpus_from(const std::vector<RawDocument>& raw, std::uint64_t min_count, double t) {
  return make_corpus(raw, build_vocabulary(std::span<const RawDocument>(raw), min_count, t));
}

/// Small two-topic corpus: 20 word types, every document mixes topic and shared words.
inline std::vector<RawDocument> tiny_documents(std::size_t n_docs = 12, std::uint64_t seed = 5) {
  Rng rng(seed);
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < n_docs; ++i) {
    RawDocument d;
    d.tag = "doc" + std::to_string(i);
    const std::size_t topic = i % 2;
    for (int k = 0; k < 16; ++k) {
      if (uniform01(rng) < 0.4)
        d.tokens.push_back("s" + std::to_string(uniform_below(rng, 4)));
      else
        d.tokens.push_back("t" + std::to_string(topic) + "_" + std::to_string(uniform_below(rng, 8)));
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

inline Hyperparams small_params(Mode mode, std::uint32_t d = 8) {
  auto p = Hyperparams::defaults_for(mode);
  p.vector_size = d;
  p.window = 2;
  p.min_count = 1;
  p.sample = 1.0;
  p.epochs = 5;
  return p;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0;; ++i) {
      path_ = base / ("vecforge_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++) + "_" +
                      std::to_string(i));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace fixtures
