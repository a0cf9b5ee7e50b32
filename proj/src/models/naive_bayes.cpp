#include <algorithm>
#include <cmath>

#include "common.hpp"

namespace spamtopic::models {

namespace {

std::vector<double> log_priors(const detail::IndexedLabels& labels, const std::optional<ClassWeights>& weights) {
  const auto w = detail::sample_weights(labels, weights);
  std::vector<double> mass(labels.classes.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    mass[static_cast<std::size_t>(labels.ids[i])] += w[i];
    total += w[i];
  }
  for (double& m : mass) m = std::log(m / total);
  return mass;
}

}  // namespace

TrainedModel train_multinomial_nb(std::span<const SparseVector> X, std::span<const std::string> y, double alpha,
                                  const std::optional<ClassWeights>& weights) {
  const std::size_t d = detail::common_dimension(X, y);
  if (!(alpha > 0.0)) throw validation_error("alpha must be positive");
  detail::require_finite(X);
  const auto labels = detail::index_labels(y);
  const std::size_t k = labels.classes.size();

  std::vector<std::vector<double>> counts(k, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < X.size(); ++i) {
    auto& row = counts[static_cast<std::size_t>(labels.ids[i])];
    for (const auto& [j, v] : X[i].entries) {
      if (v < 0.0) throw validation_error("multinomial naive Bayes needs non-negative features");
      row[j] += v;
    }
  }
  NaiveBayesParams params;
  params.log_prior = log_priors(labels, weights);
  params.feature_log_prob.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    double total = 0.0;
    for (double v : counts[c]) total += v;
    const double denom = std::log(total + alpha * static_cast<double>(d));
    auto& out = params.feature_log_prob[c];
    out.resize(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = std::log(counts[c][j] + alpha) - denom;
  }

  TrainedModel model;
  model.spec.algorithm = Algorithm::multinomial_nb;
  model.spec.alpha = alpha;
  model.spec.weights = weights;
  model.classes = labels.classes;
  model.feature_dimension = d;
  model.parameters = std::move(params);
  return model;
}

TrainedModel train_gaussian_nb(std::span<const SparseVector> X, std::span<const std::string> y,
                               const std::optional<ClassWeights>& weights) {
  const std::size_t d = detail::common_dimension(X, y);
  detail::require_finite(X);
  const auto labels = detail::index_labels(y);
  const std::size_t k = labels.classes.size();

  GaussianParams params;
  params.log_prior = log_priors(labels, weights);
  params.mean.assign(k, std::vector<double>(d, 0.0));
  params.variance.assign(k, std::vector<double>(d, 0.0));
  std::vector<double> grand_mean(d, 0.0);

  for (std::size_t i = 0; i < X.size(); ++i) {
    auto& m = params.mean[static_cast<std::size_t>(labels.ids[i])];
    for (const auto& [j, v] : X[i].entries) {
      m[j] += v;
      grand_mean[j] += v;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : params.mean[c]) v /= static_cast<double>(labels.counts[c]);
  }
  for (double& v : grand_mean) v /= static_cast<double>(X.size());

  // Two-pass variances; absent sparse entries are zeros.
  std::vector<double> dense(d);
  std::vector<double> grand_var(d, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::fill(dense.begin(), dense.end(), 0.0);
    for (const auto& [j, v] : X[i].entries) dense[j] = v;
    const auto c = static_cast<std::size_t>(labels.ids[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double a = dense[j] - params.mean[c][j];
      params.variance[c][j] += a * a;
      const double b = dense[j] - grand_mean[j];
      grand_var[j] += b * b;
    }
  }
  double max_var = 0.0;
  for (double v : grand_var) max_var = std::max(max_var, v / static_cast<double>(X.size()));
  params.epsilon = max_var > 0.0 ? 1e-9 * max_var : 1e-9;
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : params.variance[c]) v = v / static_cast<double>(labels.counts[c]) + params.epsilon;
  }

  TrainedModel model;
  model.spec.algorithm = Algorithm::gaussian_nb;
  model.spec.weights = weights;
  model.classes = labels.classes;
  model.feature_dimension = d;
  model.parameters = std::move(params);
  return model;
}

}  // namespace spamtopic::models
