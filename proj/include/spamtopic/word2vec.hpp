#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spamtopic/vectorize.hpp"

namespace spamtopic::vectorize {

struct EmbeddingParams {
  std::size_t dimension = 100;
  std::size_t epochs = 10;
  double initial_rate = 0.025;
  double min_rate = 0.0001;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t vocab_cap = 15000;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
};

/// Word vectors learned by CBOW with negative sampling.
struct EmbeddingTable {
  Language language = Language::en;
  std::size_t dimension = 100;
  std::vector<std::string> words;
  std::vector<double> vectors;  // words.size() x dimension, row-major
  std::unordered_map<std::string, std::uint32_t> index;
  EmbeddingParams params;
  std::vector<std::string> warnings;

  /// Pointer to the row for `word`, or nullptr.
  const double* find(const std::string& word) const;
  std::span<const double> row(std::size_t i) const {
    return {vectors.data() + i * dimension, dimension};
  }
};

/// Single-threaded and bit-reproducible for a fixed seed. The learning rate
/// decays linearly from `initial_rate` to `min_rate` over all epochs; the
/// vocabulary keeps the `vocab_cap` most frequent tokens.
EmbeddingTable train_word_embeddings(std::span<const TokenDoc> corpus, const EmbeddingParams& params);

void reindex(EmbeddingTable& table);

/// Component-wise sum of the vectors of in-table tokens; unknown tokens are
/// skipped and an empty document maps to the zero vector.
DenseVector embed_document(const TokenDoc& doc, const EmbeddingTable& table);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace spamtopic::vectorize
