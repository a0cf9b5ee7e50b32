#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamtopic/textprep.hpp"

namespace spamtopic::eval {

/// Rows are true classes, columns predictions.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                          const std::vector<std::string>& classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // per-class recall, the confusion diagonal share
  std::size_t support = 0;
};

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  Averages macro;
  Averages micro;
  Averages weighted;
  double accuracy = 0.0;
  std::optional<double> runtime_ms_per_email;
  ConfusionMatrix confusion;
};

/// Zero denominators give 0. Macro F1 is the mean of per-class F1.
MetricsReport summarize(const ConfusionMatrix& cm);

/// k disjoint stratified test folds. Each class is shuffled with `seed` and
/// dealt round-robin, continuing from the fold where the previous class
/// stopped, so per-class counts differ by at most one across folds.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const std::string> labels, std::size_t k,
                                                       std::uint64_t seed);

struct KeywordModel {
  std::map<std::string, std::vector<std::string>> keywords;  // per class, most frequent first
  std::map<std::string, std::size_t> class_counts;
  std::size_t top = 18;
};

/// Per class, the `top` tokens with highest document frequency (ties
/// lexicographic).
KeywordModel keyword_baseline_train(std::span<const textprep::TokenDoc> docs, std::span<const std::string> labels,
                                    std::size_t top = 18);
/// Most keyword hits; ties go to the larger training class, then the
/// lexicographically smaller name.
std::string keyword_baseline_predict(const KeywordModel& model, const textprep::TokenDoc& doc);

}  // namespace spamtopic::eval
