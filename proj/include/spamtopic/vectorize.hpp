#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spamtopic/textprep.hpp"
#include "spamtopic/types.hpp"

namespace spamtopic::vectorize {

using textprep::TokenDoc;

/// Indices strictly increasing and below `dimension`; values nonzero.
struct SparseVector {
  std::size_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double squared_norm() const;
  double norm() const;
  /// Value at `index` (0 when absent). O(log nnz).
  double at(std::uint32_t index) const;
  bool operator==(const SparseVector&) const = default;
};

double dot(const SparseVector& a, const SparseVector& b);
double squared_distance(const SparseVector& a, const SparseVector& b);
/// a + t * (b - a), dropping exact zeros.
SparseVector interpolate(const SparseVector& a, const SparseVector& b, double t);
/// Throws a validation error unless the invariants hold.
void check_sparse(const SparseVector& v);

struct DenseVector {
  std::vector<double> values;
  bool operator==(const DenseVector&) const = default;
};

SparseVector to_sparse(const DenseVector& v);
DenseVector to_dense(const SparseVector& v);

/// Vocabulary ordered by descending document frequency, ties lexicographic.
struct Vocabulary {
  Language language = Language::en;
  std::vector<std::string> words;
  std::vector<std::size_t> document_frequency;  // parallel to words
  std::unordered_map<std::string, std::uint32_t> index;
  std::size_t min_df = 1;
  std::size_t cap = 1;

  std::size_t size() const { return words.size(); }
  /// Position of `word`, or -1.
  std::int64_t find(const std::string& word) const;
};

Vocabulary build_vocabulary(std::span<const TokenDoc> corpus, std::size_t cap, std::size_t min_df);
/// Rebuilds the index map from `words` (used after deserialization).
void reindex(Vocabulary& vocab);

/// Term counts per in-vocabulary token; with deduplicated TokenDocs every
/// value is 1.
SparseVector encode_bow(const TokenDoc& doc, const Vocabulary& vocab);

struct IdfTable {
  std::vector<double> idf;  // one per vocabulary word, all > 0
  std::size_t corpus_size = 0;
};

/// Smoothed idf: ln((1 + n) / (1 + df)) + 1.
IdfTable fit_idf(std::span<const TokenDoc> corpus, const Vocabulary& vocab);

/// tf * idf, then L2-normalized (left empty when the document has no
/// in-vocabulary token).
SparseVector encode_tfidf(const TokenDoc& doc, const Vocabulary& vocab, const IdfTable& idf);

}  // namespace spamtopic::vectorize
