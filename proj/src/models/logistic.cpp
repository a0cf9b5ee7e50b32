#include <algorithm>
#include <cmath>
#include <deque>

#include "common.hpp"

namespace spamtopic::models {

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  if (m > 0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
  if (m >= 0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

double LogisticObjective::evaluate(std::span<const double> theta, std::span<double> grad) const {
  const std::size_t d = dimension;
  const double b = theta[d];
  double value = 0.0;
  for (std::size_t j = 0; j < d; ++j) value += 0.5 * theta[j] * theta[j];
  const bool want_grad = !grad.empty();
  if (want_grad) {
    for (std::size_t j = 0; j < d; ++j) grad[j] = theta[j];
    grad[d] = 0.0;
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double z = b;
    for (const auto& [j, v] : X[i].entries) z += theta[j] * v;
    const double s = sample_weight.empty() ? 1.0 : sample_weight[i];
    const double m = y[i] * z;
    loss += s * log1p_exp_neg(m);
    if (want_grad) {
      const double g = -c * s * y[i] * sigmoid_neg(m);
      for (const auto& [j, v] : X[i].entries) grad[j] += g * v;
      grad[d] += g;
    }
  }
  return value + c * loss;
}

double minimize_lbfgs(const LogisticObjective& objective, std::vector<double>& theta, std::size_t max_iter) {
  constexpr std::size_t kHistory = 10;
  constexpr double kGradTol = 1e-5;
  const std::size_t n = theta.size();
  std::vector<double> grad(n), new_theta(n), new_grad(n), direction(n);
  double f = objective.evaluate(theta, grad);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha(kHistory);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    if (max_abs(grad) <= kGradTol) break;

    // Two-loop recursion for -H * g.
    direction = grad;
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha[h] = rho_hist[h] * dot(s_hist[h], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] -= alpha[h] * y_hist[h][j];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    } else {
      gamma = 1.0 / std::max(1.0, std::sqrt(dot(grad, grad)));
    }
    for (double& v : direction) v *= gamma;
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * dot(y_hist[h], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] += s_hist[h][j] * (alpha[h] - beta);
    }
    for (double& v : direction) v = -v;

    double slope = dot(grad, direction);
    if (slope >= 0.0) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double scale = 1.0 / std::max(1.0, std::sqrt(dot(grad, grad)));
      for (std::size_t j = 0; j < n; ++j) direction[j] = -grad[j] * scale;
      slope = dot(grad, direction);
    }

    double step = 1.0;
    double new_f = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      for (std::size_t j = 0; j < n; ++j) new_theta[j] = theta[j] + step * direction[j];
      new_f = objective.evaluate(new_theta, new_grad);
      if (std::isfinite(new_f) && new_f <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n), yv(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = new_theta[j] - theta[j];
      yv[j] = new_grad[j] - grad[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * std::max(1.0, dot(yv, yv))) {
      if (s_hist.size() == kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }
    const double improvement = f - new_f;
    theta.swap(new_theta);
    grad.swap(new_grad);
    f = new_f;
    if (improvement <= 1e-12 * std::max(1.0, std::abs(f))) break;
  }
  return f;
}

TrainedModel train_logistic_ovr(std::span<const SparseVector> X, std::span<const std::string> y, double c,
                                std::size_t max_iter, const std::optional<ClassWeights>& weights) {
  const std::size_t d = detail::common_dimension(X, y);
  if (!(c > 0.0) || !std::isfinite(c)) throw validation_error("C must be a positive finite number");
  if (max_iter == 0) throw validation_error("max_iter must be >= 1");
  detail::require_finite(X);
  const auto labels = detail::index_labels(y);
  if (labels.classes.size() < 2) throw validation_error("one-vs-rest training needs at least two classes");

  LogisticObjective objective;
  objective.X = X;
  objective.c = c;
  objective.dimension = d;
  objective.sample_weight = detail::sample_weights(labels, weights);
  objective.y.resize(X.size());

  LinearParams params;
  for (std::size_t k = 0; k < labels.classes.size(); ++k) {
    for (std::size_t i = 0; i < X.size(); ++i) {
      objective.y[i] = labels.ids[i] == static_cast<int>(k) ? 1.0 : -1.0;
    }
    std::vector<double> theta(d + 1, 0.0);
    minimize_lbfgs(objective, theta, max_iter);
    params.intercept.push_back(theta[d]);
    theta.pop_back();
    params.coef.push_back(std::move(theta));
  }

  TrainedModel model;
  model.spec.algorithm = Algorithm::logistic;
  model.spec.c = c;
  model.spec.max_iter = max_iter;
  model.spec.weights = weights;
  model.classes = labels.classes;
  model.feature_dimension = d;
  model.parameters = std::move(params);
  return model;
}

}  // namespace spamtopic::models
