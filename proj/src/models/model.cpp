#include <algorithm>
#include <cmath>
#include <map>

#include "common.hpp"

namespace spamtopic::models {

namespace detail {

IndexedLabels index_labels(std::span<const std::string> y) {
  IndexedLabels out;
  out.classes.assign(y.begin(), y.end());
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  out.counts.assign(out.classes.size(), 0);
  out.ids.reserve(y.size());
  for (const auto& label : y) {
    const auto pos = std::lower_bound(out.classes.begin(), out.classes.end(), label) - out.classes.begin();
    out.ids.push_back(static_cast<int>(pos));
    ++out.counts[static_cast<std::size_t>(pos)];
  }
  return out;
}

std::size_t common_dimension(std::span<const SparseVector> X, std::span<const std::string> y) {
  if (X.empty()) throw validation_error("empty training set");
  if (X.size() != y.size()) throw validation_error("feature and label counts differ");
  const std::size_t d = X.front().dimension;
  for (const auto& row : X) {
    if (row.dimension != d) throw validation_error("feature rows have differing dimensions");
  }
  return d;
}

std::vector<double> sample_weights(const IndexedLabels& labels, const std::optional<ClassWeights>& weights) {
  std::vector<double> out(labels.ids.size(), 1.0);
  if (!weights) return out;
  std::vector<double> per_class(labels.classes.size(), 1.0);
  for (std::size_t c = 0; c < labels.classes.size(); ++c) {
    auto it = weights->find(labels.classes[c]);
    if (it != weights->end()) {
      if (!(it->second > 0.0) || !std::isfinite(it->second)) {
        throw validation_error("class weight for '" + labels.classes[c] + "' must be positive");
      }
      per_class[c] = it->second;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = per_class[static_cast<std::size_t>(labels.ids[i])];
  return out;
}

void require_finite(std::span<const SparseVector> X) {
  for (const auto& row : X) {
    for (const auto& [i, v] : row.entries) {
      if (!std::isfinite(v)) throw validation_error("non-finite feature value at index " + std::to_string(i));
    }
  }
}

}  // namespace detail

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::multinomial_nb: return "multinomial_nb";
    case Algorithm::gaussian_nb: return "gaussian_nb";
    case Algorithm::logistic: return "logistic";
    case Algorithm::linear_svm: return "linear_svm";
    case Algorithm::random_forest: return "random_forest";
  }
  return "logistic";
}

std::string_view short_name(Algorithm a) {
  switch (a) {
    case Algorithm::multinomial_nb: return "mnb";
    case Algorithm::gaussian_nb: return "gnb";
    case Algorithm::logistic: return "lr";
    case Algorithm::linear_svm: return "svm";
    case Algorithm::random_forest: return "rf";
  }
  return "lr";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::multinomial_nb, Algorithm::gaussian_nb, Algorithm::logistic, Algorithm::linear_svm,
                 Algorithm::random_forest}) {
    if (name == to_string(a) || name == short_name(a)) return a;
  }
  return std::nullopt;
}

double ModelSpec::effective_c() const {
  if (c) return *c;
  return algorithm == Algorithm::linear_svm ? 1.0 : 1000.0;
}

void ModelSpec::validate() const {
  const double cc = effective_c();
  if (!(cc > 0.0) || !std::isfinite(cc)) throw validation_error("C must be a positive finite number");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw validation_error("alpha must be positive");
  if (trees == 0) throw validation_error("trees must be >= 1");
  if (max_iter == 0) throw validation_error("max_iter must be >= 1");
  if (epochs == 0) throw validation_error("epochs must be >= 1");
}

TrainedModel train(const ModelSpec& spec, std::span<const SparseVector> X, std::span<const std::string> y) {
  spec.validate();
  TrainedModel model;
  switch (spec.algorithm) {
    case Algorithm::multinomial_nb:
      model = train_multinomial_nb(X, y, spec.alpha, spec.weights);
      break;
    case Algorithm::gaussian_nb:
      model = train_gaussian_nb(X, y, spec.weights);
      break;
    case Algorithm::logistic:
      model = train_logistic_ovr(X, y, spec.effective_c(), spec.max_iter, spec.weights);
      break;
    case Algorithm::linear_svm:
      model = train_linear_svm_ovr(X, y, spec.effective_c(), spec.epochs, spec.seed, spec.weights);
      break;
    case Algorithm::random_forest:
      model = train_random_forest(X, y, spec.trees, spec.seed, spec.weights, spec.bootstrap, spec.threads);
      break;
  }
  auto warnings = std::move(model.warnings);
  model.spec = spec;
  model.warnings = std::move(warnings);
  return model;
}

namespace {

void check_input(const TrainedModel& model, const SparseVector& x) {
  if (x.dimension != model.feature_dimension) {
    throw validation_error("input dimension " + std::to_string(x.dimension) + " does not match model dimension " +
                           std::to_string(model.feature_dimension));
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax_from_log(std::vector<double> log_scores) {
  const double mx = *std::max_element(log_scores.begin(), log_scores.end());
  double total = 0.0;
  for (double& v : log_scores) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : log_scores) v /= total;
  return log_scores;
}

}  // namespace

std::vector<double> joint_log_likelihood(const TrainedModel& model, const SparseVector& x) {
  check_input(model, x);
  if (const auto* nb = std::get_if<NaiveBayesParams>(&model.parameters)) {
    std::vector<double> out = nb->log_prior;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += detail::dot_dense(x, nb->feature_log_prob[c]);
    return out;
  }
  if (const auto* g = std::get_if<GaussianParams>(&model.parameters)) {
    const std::size_t d = model.feature_dimension;
    std::vector<double> dense(d, 0.0);
    for (const auto& [i, v] : x.entries) dense[i] = v;
    std::vector<double> out = g->log_prior;
    constexpr double kLog2Pi = 1.8378770664093453;
    for (std::size_t c = 0; c < out.size(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = dense[j] - g->mean[c][j];
        s += kLog2Pi + std::log(g->variance[c][j]) + diff * diff / g->variance[c][j];
      }
      out[c] -= 0.5 * s;
    }
    return out;
  }
  throw validation_error("joint log-likelihood is only defined for naive Bayes models");
}

std::vector<double> scores(const TrainedModel& model, const SparseVector& x) {
  check_input(model, x);
  return std::visit(
      [&](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, NaiveBayesParams> || std::is_same_v<P, GaussianParams>) {
          return softmax_from_log(joint_log_likelihood(model, x));
        } else if constexpr (std::is_same_v<P, LinearParams>) {
          std::vector<double> out(p.coef.size());
          for (std::size_t c = 0; c < out.size(); ++c) {
            const double z = detail::dot_dense(x, p.coef[c]) + p.intercept[c] * p.bias_feature;
            out[c] = model.spec.algorithm == Algorithm::logistic ? sigmoid(z) : z;
          }
          return out;
        } else {
          std::vector<double> votes(model.classes.size(), 0.0);
          for (const auto& tree : p.trees) {
            votes[static_cast<std::size_t>(tree.nodes[tree.leaf_for(x)].label)] += 1.0;
          }
          for (double& v : votes) v /= static_cast<double>(p.trees.size());
          return votes;
        }
      },
      model.parameters);
}

std::size_t predict_index(const TrainedModel& model, const SparseVector& x) {
  const auto s = scores(model, x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < s.size(); ++c) {
    if (s[c] > s[best]) best = c;
  }
  return best;
}

Prediction predict(const TrainedModel& model, const SparseVector& x) {
  const auto s = scores(model, x);
  Prediction out;
  std::size_t best = 0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    out.scores[model.classes[c]] = s[c];
    if (s[c] > s[best]) best = c;
  }
  out.label = model.classes[best];
  return out;
}

std::size_t DecisionTree::leaf_for(const SparseVector& x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(x.at(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right);
  }
  return node;
}

}  // namespace spamtopic::models
