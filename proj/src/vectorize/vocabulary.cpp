#include "spamtopic/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spamtopic/errors.hpp"

namespace spamtopic::vectorize {

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * v;
  return s;
}

double SparseVector::norm() const { return std::sqrt(squared_norm()); }

double SparseVector::at(std::uint32_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::uint32_t i) { return e.first < i; });
  return (it != entries.end() && it->first == index) ? it->second : 0.0;
}

double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return s;
}

double squared_distance(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    double d;
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
      d = ia->second;
      ++ia;
    } else if (ia == a.entries.end() || ib->first < ia->first) {
      d = ib->second;
      ++ib;
    } else {
      d = ia->second - ib->second;
      ++ia;
      ++ib;
    }
    s += d * d;
  }
  return s;
}

SparseVector interpolate(const SparseVector& a, const SparseVector& b, double t) {
  SparseVector out;
  out.dimension = a.dimension;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    std::uint32_t idx;
    double va = 0.0;
    double vb = 0.0;
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
      idx = ia->first;
      va = ia->second;
      ++ia;
    } else if (ia == a.entries.end() || ib->first < ia->first) {
      idx = ib->first;
      vb = ib->second;
      ++ib;
    } else {
      idx = ia->first;
      va = ia->second;
      vb = ib->second;
      ++ia;
      ++ib;
    }
    const double v = va + t * (vb - va);
    if (v != 0.0) out.entries.emplace_back(idx, v);
  }
  return out;
}

void check_sparse(const SparseVector& v) {
  for (std::size_t k = 0; k < v.entries.size(); ++k) {
    const auto& [i, x] = v.entries[k];
    if (i >= v.dimension) throw validation_error("sparse index out of range");
    if (k > 0 && v.entries[k - 1].first >= i) throw validation_error("sparse indices not strictly increasing");
    if (x == 0.0 || !std::isfinite(x)) throw validation_error("sparse value zero or non-finite");
  }
}

SparseVector to_sparse(const DenseVector& v) {
  SparseVector out;
  out.dimension = v.values.size();
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (v.values[i] != 0.0) out.entries.emplace_back(static_cast<std::uint32_t>(i), v.values[i]);
  }
  return out;
}

DenseVector to_dense(const SparseVector& v) {
  DenseVector out;
  out.values.assign(v.dimension, 0.0);
  for (const auto& [i, x] : v.entries) out.values[i] = x;
  return out;
}

std::int64_t Vocabulary::find(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void reindex(Vocabulary& vocab) {
  vocab.index.clear();
  vocab.index.reserve(vocab.words.size());
  for (std::size_t i = 0; i < vocab.words.size(); ++i) {
    vocab.index.emplace(vocab.words[i], static_cast<std::uint32_t>(i));
  }
}

Vocabulary build_vocabulary(std::span<const TokenDoc> corpus, std::size_t cap, std::size_t min_df) {
  if (corpus.empty()) throw validation_error("cannot build a vocabulary from an empty corpus");
  if (cap < 1) throw validation_error("vocabulary cap must be >= 1");
  if (min_df < 1) throw validation_error("min_df must be >= 1");

  std::unordered_map<std::string, std::size_t> df;
  std::unordered_map<std::string, bool> in_doc;
  for (const auto& doc : corpus) {
    in_doc.clear();
    for (const auto& token : doc.tokens) {
      if (in_doc.emplace(token, true).second) ++df[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [word, count] : df) {
    if (count >= min_df) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > cap) kept.resize(cap);

  Vocabulary vocab;
  vocab.language = corpus.front().language;
  vocab.min_df = min_df;
  vocab.cap = cap;
  for (auto& [word, count] : kept) {
    vocab.words.push_back(word);
    vocab.document_frequency.push_back(count);
  }
  reindex(vocab);
  return vocab;
}

SparseVector encode_bow(const TokenDoc& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& token : doc.tokens) {
    if (auto i = vocab.find(token); i >= 0) counts[static_cast<std::uint32_t>(i)] += 1.0;
  }
  SparseVector out;
  out.dimension = vocab.size();
  out.entries.assign(counts.begin(), counts.end());
  return out;
}

IdfTable fit_idf(std::span<const TokenDoc> corpus, const Vocabulary& vocab) {
  if (corpus.empty()) throw validation_error("cannot fit idf on an empty corpus");
  std::vector<std::size_t> df(vocab.size(), 0);
  std::vector<std::size_t> last_seen(vocab.size(), static_cast<std::size_t>(-1));
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& token : corpus[d].tokens) {
      if (auto i = vocab.find(token); i >= 0 && last_seen[i] != d) {
        last_seen[i] = d;
        ++df[i];
      }
    }
  }
  IdfTable table;
  table.corpus_size = corpus.size();
  table.idf.resize(vocab.size());
  const double n = static_cast<double>(corpus.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    table.idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return table;
}

SparseVector encode_tfidf(const TokenDoc& doc, const Vocabulary& vocab, const IdfTable& idf) {
  if (idf.idf.size() != vocab.size()) throw validation_error("idf table does not match the vocabulary");
  SparseVector v = encode_bow(doc, vocab);
  for (auto& [i, x] : v.entries) x *= idf.idf[i];
  const double norm = v.norm();
  if (norm > 0.0) {
    for (auto& [i, x] : v.entries) x /= norm;
  }
  return v;
}

}  // namespace spamtopic::vectorize
