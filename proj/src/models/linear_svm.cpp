#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "common.hpp"

namespace spamtopic::models {

TrainedModel train_linear_svm_ovr(std::span<const SparseVector> X, std::span<const std::string> y, double c,
                                  std::size_t epochs, std::uint64_t seed,
                                  const std::optional<ClassWeights>& weights) {
  const std::size_t d = detail::common_dimension(X, y);
  if (!(c > 0.0) || !std::isfinite(c)) throw validation_error("C must be a positive finite number");
  if (epochs == 0) throw validation_error("epochs must be >= 1");
  detail::require_finite(X);
  const auto labels = detail::index_labels(y);
  if (labels.classes.size() < 2) throw validation_error("one-vs-rest training needs at least two classes");
  const auto sw = detail::sample_weights(labels, weights);
  const std::size_t n = X.size();

  // The bias rides on a constant feature equal to the mean row norm, so
  // rescaling the inputs rescales the whole problem consistently.
  double bias_feature = 0.0;
  for (const auto& row : X) bias_feature += row.norm();
  bias_feature = bias_feature > 0.0 ? bias_feature / static_cast<double>(n) : 1.0;

  // Pegasos on 0.5*lambda*|w|^2 + mean_i s_i*hinge_i with lambda = 1/(C n).
  const double lambda = 1.0 / (c * static_cast<double>(n));
  LinearParams params;
  params.bias_feature = bias_feature;
  std::vector<std::size_t> order(n);

  for (std::size_t k = 0; k < labels.classes.size(); ++k) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + k);
    std::iota(order.begin(), order.end(), 0);
    // w = scale * v keeps the shrink step O(1).
    std::vector<double> v(d, 0.0);
    double vb = 0.0;
    double scale = 1.0;
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
      for (std::size_t idx : order) {
        ++t;
        const double yi = labels.ids[idx] == static_cast<int>(k) ? 1.0 : -1.0;
        const double margin = yi * scale * (detail::dot_dense(X[idx], v) + vb * bias_feature);
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        if (t == 1) {
          std::fill(v.begin(), v.end(), 0.0);
          vb = 0.0;
          scale = 1.0;
        } else {
          scale *= 1.0 - 1.0 / static_cast<double>(t);
        }
        if (margin < 1.0) {
          const double step = eta * sw[idx] * yi / scale;
          for (const auto& [j, val] : X[idx].entries) v[j] += step * val;
          vb += step * bias_feature;
        }
        if (scale < 1e-9) {
          for (double& val : v) val *= scale;
          vb *= scale;
          scale = 1.0;
        }
      }
    }
    for (double& val : v) val *= scale;
    params.coef.push_back(std::move(v));
    params.intercept.push_back(vb * scale);
  }

  TrainedModel model;
  model.spec.algorithm = Algorithm::linear_svm;
  model.spec.c = c;
  model.spec.epochs = epochs;
  model.spec.seed = seed;
  model.spec.weights = weights;
  model.classes = labels.classes;
  model.feature_dimension = d;
  model.parameters = std::move(params);
  return model;
}

}  // namespace spamtopic::models
