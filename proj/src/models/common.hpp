#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spamtopic/errors.hpp"
#include "spamtopic/models.hpp"

namespace spamtopic::models::detail {

struct IndexedLabels {
  std::vector<std::string> classes;  // sorted, unique
  std::vector<int> ids;              // per sample
  std::vector<std::size_t> counts;   // per class
};

IndexedLabels index_labels(std::span<const std::string> y);

/// Feature dimension shared by all rows; throws when rows disagree or are empty.
std::size_t common_dimension(std::span<const SparseVector> X, std::span<const std::string> y);

/// Per-sample multiplier from class weights (1 when absent).
std::vector<double> sample_weights(const IndexedLabels& labels, const std::optional<ClassWeights>& weights);

void require_finite(std::span<const SparseVector> X);

inline double dot_dense(const SparseVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += v * w[i];
  return s;
}

}  // namespace spamtopic::models::detail
