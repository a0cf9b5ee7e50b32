#include "spamtopic/word2vec.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spamtopic/errors.hpp"

namespace spamtopic::vectorize {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const double* EmbeddingTable::find(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? nullptr : vectors.data() + static_cast<std::size_t>(it->second) * dimension;
}

void reindex(EmbeddingTable& table) {
  table.index.clear();
  for (std::size_t i = 0; i < table.words.size(); ++i) {
    table.index.emplace(table.words[i], static_cast<std::uint32_t>(i));
  }
}

EmbeddingTable train_word_embeddings(std::span<const TokenDoc> corpus, const EmbeddingParams& params) {
  if (corpus.empty()) throw validation_error("cannot train embeddings on an empty corpus");
  if (params.dimension == 0 || params.window == 0 || params.epochs == 0) {
    throw validation_error("embedding dimension, window and epochs must be >= 1");
  }

  EmbeddingTable table;
  table.language = corpus.front().language;
  table.dimension = params.dimension;
  table.params = params;

  // Vocabulary by token frequency, ties lexicographic.
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tokens) {
      ++counts[t];
      ++total_tokens;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= params.min_count) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > params.vocab_cap) ranked.resize(params.vocab_cap);
  for (const auto& [w, c] : ranked) table.words.push_back(w);
  reindex(table);

  if (total_tokens < params.window) {
    table.warnings.push_back("corpus has " + std::to_string(total_tokens) +
                             " tokens, fewer than the context window of " + std::to_string(params.window));
  }

  const std::size_t vocab_size = table.words.size();
  const std::size_t dim = params.dimension;
  std::mt19937_64 rng(params.seed);
  table.vectors.resize(vocab_size * dim);
  for (double& x : table.vectors) x = (uniform01(rng) - 0.5) / static_cast<double>(dim);
  if (vocab_size == 0) return table;
  std::vector<double> output(vocab_size * dim, 0.0);

  // Negative-sampling distribution: unigram^0.75, sampled by inverse CDF.
  std::vector<double> cdf(vocab_size);
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    acc += std::pow(static_cast<double>(ranked[i].second), 0.75);
    cdf[i] = acc;
  }
  for (double& c : cdf) c /= acc;

  std::vector<std::vector<std::uint32_t>> docs;
  docs.reserve(corpus.size());
  std::size_t train_words = 0;
  for (const auto& doc : corpus) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : doc.tokens) {
      if (auto it = table.index.find(t); it != table.index.end()) ids.push_back(it->second);
    }
    train_words += ids.size();
    docs.push_back(std::move(ids));
  }
  if (train_words == 0) return table;

  const double total_work = static_cast<double>(params.epochs) * static_cast<double>(train_words);
  std::vector<double> hidden(dim);
  std::vector<double> grad(dim);
  std::size_t processed = 0;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (const auto& ids : docs) {
      const std::size_t len = ids.size();
      for (std::size_t pos = 0; pos < len; ++pos) {
        const double progress = static_cast<double>(processed) / total_work;
        const double rate = std::max(params.min_rate,
                                     params.initial_rate - (params.initial_rate - params.min_rate) * progress);
        ++processed;

        const std::size_t shrink = static_cast<std::size_t>(rng() % params.window);
        const std::size_t span = params.window - shrink;
        const std::size_t lo = pos >= span ? pos - span : 0;
        const std::size_t hi = std::min(len - 1, pos + span);

        std::fill(hidden.begin(), hidden.end(), 0.0);
        std::size_t context = 0;
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const double* v = &table.vectors[static_cast<std::size_t>(ids[c]) * dim];
          for (std::size_t k = 0; k < dim; ++k) hidden[k] += v[k];
          ++context;
        }
        if (context == 0) continue;
        for (double& h : hidden) h /= static_cast<double>(context);

        std::fill(grad.begin(), grad.end(), 0.0);
        const std::uint32_t word = ids[pos];
        for (std::size_t d = 0; d <= params.negative; ++d) {
          std::uint32_t target;
          double label;
          if (d == 0) {
            target = word;
            label = 1.0;
          } else {
            const double u = uniform01(rng);
            target = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            if (target >= vocab_size) target = static_cast<std::uint32_t>(vocab_size - 1);
            if (target == word) continue;
            label = 0.0;
          }
          double* out = &output[static_cast<std::size_t>(target) * dim];
          double f = 0.0;
          for (std::size_t k = 0; k < dim; ++k) f += hidden[k] * out[k];
          const double g = (label - sigmoid(f)) * rate;
          for (std::size_t k = 0; k < dim; ++k) grad[k] += g * out[k];
          for (std::size_t k = 0; k < dim; ++k) out[k] += g * hidden[k];
        }
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          double* v = &table.vectors[static_cast<std::size_t>(ids[c]) * dim];
          for (std::size_t k = 0; k < dim; ++k) v[k] += grad[k];
        }
      }
    }
  }
  return table;
}

DenseVector embed_document(const TokenDoc& doc, const EmbeddingTable& table) {
  DenseVector out;
  out.values.assign(table.dimension, 0.0);
  for (const auto& token : doc.tokens) {
    if (const double* v = table.find(token)) {
      for (std::size_t k = 0; k < table.dimension; ++k) out.values[k] += v[k];
    }
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace spamtopic::vectorize
