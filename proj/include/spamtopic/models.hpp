#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spamtopic/balance.hpp"
#include "spamtopic/vectorize.hpp"

namespace spamtopic::models {

using vectorize::SparseVector;
using balance::ClassWeights;

enum class Algorithm { multinomial_nb, gaussian_nb, logistic, linear_svm, random_forest };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);
/// Short CLI names: mnb, gnb, lr, svm, rf.
std::string_view short_name(Algorithm a);

struct ModelSpec {
  Algorithm algorithm = Algorithm::logistic;
  double alpha = 1.0;             // naive Bayes smoothing
  std::optional<double> c;        // defaults: 1000 (logistic), 1.0 (svm)
  std::size_t max_iter = 120;     // logistic outer iterations
  std::size_t epochs = 20;        // svm passes over the data
  std::size_t trees = 250;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  std::size_t threads = 0;        // 0: hardware concurrency
  std::optional<ClassWeights> weights;

  double effective_c() const;
  /// Throws a validation error on C <= 0, alpha <= 0, trees == 0 and so on.
  void validate() const;
};

struct NaiveBayesParams {
  std::vector<double> log_prior;                       // per class
  std::vector<std::vector<double>> feature_log_prob;   // class x feature
};

struct GaussianParams {
  std::vector<double> log_prior;
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> variance;  // floor already added
  double epsilon = 0.0;
};

struct LinearParams {
  std::vector<std::vector<double>> coef;  // class x feature
  std::vector<double> intercept;
  /// Value of the implicit constant feature that carries the svm bias.
  double bias_feature = 1.0;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t label = -1;    // leaf class index
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0
  std::size_t leaf_for(const SparseVector& x) const;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
};

using Parameters = std::variant<NaiveBayesParams, GaussianParams, LinearParams, ForestParams>;

struct TrainedModel {
  ModelSpec spec;
  std::vector<std::string> classes;  // sorted
  std::size_t feature_dimension = 0;
  Parameters parameters;
  std::vector<std::string> warnings;
};

struct Prediction {
  std::string label;
  std::map<std::string, double> scores;
};

TrainedModel train_multinomial_nb(std::span<const SparseVector> X, std::span<const std::string> y,
                                  double alpha = 1.0, const std::optional<ClassWeights>& weights = {});
TrainedModel train_gaussian_nb(std::span<const SparseVector> X, std::span<const std::string> y,
                               const std::optional<ClassWeights>& weights = {});
TrainedModel train_logistic_ovr(std::span<const SparseVector> X, std::span<const std::string> y,
                                double c = 1000.0, std::size_t max_iter = 120,
                                const std::optional<ClassWeights>& weights = {});
TrainedModel train_linear_svm_ovr(std::span<const SparseVector> X, std::span<const std::string> y,
                                  double c = 1.0, std::size_t epochs = 20, std::uint64_t seed = 1,
                                  const std::optional<ClassWeights>& weights = {});
TrainedModel train_random_forest(std::span<const SparseVector> X, std::span<const std::string> y,
                                 std::size_t trees = 250, std::uint64_t seed = 1,
                                 const std::optional<ClassWeights>& weights = {}, bool bootstrap = true,
                                 std::size_t threads = 0);

/// Dispatches on spec.algorithm.
TrainedModel train(const ModelSpec& spec, std::span<const SparseVector> X, std::span<const std::string> y);

/// One score per class: posterior probability (naive Bayes), sigmoid of the
/// decision value (logistic), signed margin (svm), vote fraction (forest).
std::vector<double> scores(const TrainedModel& model, const SparseVector& x);
/// argmax of `scores`, first class on ties.
std::size_t predict_index(const TrainedModel& model, const SparseVector& x);
Prediction predict(const TrainedModel& model, const SparseVector& x);

/// Unnormalized naive Bayes log posterior per class.
std::vector<double> joint_log_likelihood(const TrainedModel& model, const SparseVector& x);

/// Weighted binary logistic objective
///   0.5 * |w|^2 + C * sum_i s_i * log(1 + exp(-y_i * (w.x_i + b)))
/// over theta = [w..., b]; the intercept is not regularized.
struct LogisticObjective {
  std::span<const SparseVector> X;
  std::vector<double> y;              // +1 / -1
  std::vector<double> sample_weight;  // empty: all 1
  double c = 1.0;
  std::size_t dimension = 0;

  /// Returns the objective; writes the gradient when `grad` is nonempty.
  double evaluate(std::span<const double> theta, std::span<double> grad) const;
};

/// Limited-memory BFGS with backtracking line search, capped at `max_iter`
/// iterations. Returns the final objective value.
double minimize_lbfgs(const LogisticObjective& objective, std::vector<double>& theta, std::size_t max_iter);

}  // namespace spamtopic::models
