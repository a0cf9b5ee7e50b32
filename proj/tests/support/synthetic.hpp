#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spamtopic/dataset.hpp"

namespace testsupport {

struct CorpusShape {
  std::size_t classes = 11;
  std::size_t documents = 2000;
  double imbalance = 50.0;      // largest / smallest class
  double noise_share = 0.20;    // fraction of tokens from the shared pool
  std::size_t tokens_per_doc = 40;
  /// Each class draws uniformly from its own pool, sized so every class word
  /// lands in about `class_word_docs` documents.
  double class_word_docs = 10.0;
  std::size_t max_class_pool = 400;
  std::size_t family_pool = 12;
  std::size_t family_size = 3;  // sibling classes sharing family words
  std::size_t noise_pool = 300;
  double family_share = 0.30;
  std::uint64_t seed = 7;
};

/// Class sizes decaying geometrically so that max/min equals `imbalance`.
std::vector<std::size_t> class_sizes(const CorpusShape& shape);

/// Labeled English records whose merged text is a space-joined stream of
/// pseudo-words; tokens are computed by the real tokenizer.
std::vector<spamtopic::store::DatasetRecord> synthetic_corpus(const CorpusShape& shape);

/// Distinct lowercase non-stopword pseudo-words.
std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed);

std::string class_name(std::size_t c);

}  // namespace testsupport
