#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spamtopic/vectorize.hpp"

namespace spamtopic::balance {

using vectorize::SparseVector;

/// weights[c] * n_c summed over classes equals the sample count.
using ClassWeights = std::map<std::string, double>;

/// Balanced convention: N / (K * n_c).
ClassWeights compute_class_weights(std::span<const std::string> labels);

struct ResamplePlan {
  std::map<std::string, std::size_t> targets;
  std::uint64_t seed = 0;
};

/// round(N / K) for every class present in `labels`.
ResamplePlan default_plan(std::span<const std::string> labels, std::uint64_t seed);

/// Where an output row came from. Originals have `second == -1`; SMOTE rows
/// record both parents and the interpolation weight.
struct Provenance {
  std::int64_t first = -1;
  std::int64_t second = -1;
  double lambda = 0.0;
};

struct Resampled {
  std::vector<SparseVector> X;
  std::vector<std::string> y;
  std::vector<Provenance> provenance;
  std::vector<std::string> warnings;
};

/// Classes above target are sampled without replacement; classes below keep
/// every original and add duplicates drawn with replacement.
Resampled random_rebalance(std::span<const SparseVector> X, std::span<const std::string> y,
                           const ResamplePlan& plan);

struct SmoteOptions {
  std::size_t k = 5;
  /// Pins the interpolation weight (tests); uniform in [0, 1] otherwise.
  std::optional<double> fixed_lambda;
};

/// Grows every class below its target with synthetic points
/// x + lambda * (neighbor - x), neighbor among the k nearest same-class
/// samples (k clipped to n_c - 1). Singleton classes are grown by
/// duplication, with a warning.
Resampled smote_oversample(std::span<const SparseVector> X, std::span<const std::string> y,
                           const ResamplePlan& plan, const SmoteOptions& options = {});

/// NearMiss-1: each class above target keeps the `target` samples with the
/// smallest mean distance to their k nearest samples of the smallest class.
/// Ties keep the lower original index.
Resampled nearmiss_undersample(std::span<const SparseVector> X, std::span<const std::string> y,
                               const ResamplePlan& plan, std::size_t k = 3);

/// SMOTE up to target, then NearMiss-1 down to target.
Resampled smote_nearmiss(std::span<const SparseVector> X, std::span<const std::string> y,
                         const ResamplePlan& plan);

enum class Strategy { none, weights, random, smote_nearmiss };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

}  // namespace spamtopic::balance
