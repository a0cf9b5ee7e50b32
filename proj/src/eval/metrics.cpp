#include <algorithm>

#include "spamtopic/errors.hpp"
#include "spamtopic/eval.hpp"

namespace spamtopic::eval {

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) t += v;
  }
  return t;
}

ConfusionMatrix confusion(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                          const std::vector<std::string>& classes) {
  if (y_true.size() != y_pred.size()) throw validation_error("y_true and y_pred differ in length");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!index.emplace(classes[i], i).second) throw validation_error("duplicate class '" + classes[i] + "'");
  }
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw validation_error("unknown label '" + label + "'");
    return it->second;
  };
  for (std::size_t i = 0; i < y_true.size(); ++i) ++cm.counts[lookup(y_true[i])][lookup(y_pred[i])];
  return cm;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

MetricsReport summarize(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes.size();
  if (cm.counts.size() != k) throw validation_error("confusion matrix shape does not match its classes");
  for (const auto& row : cm.counts) {
    if (row.size() != k) throw validation_error("confusion matrix is not square");
  }
  const std::size_t total = cm.total();
  if (total == 0) throw validation_error("confusion matrix is empty");

  MetricsReport r;
  r.classes = cm.classes;
  r.confusion = cm;
  r.per_class.resize(k);
  double tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(cm.counts[c][c]);
    double row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(cm.counts[c][j]);
      col += static_cast<double>(cm.counts[j][c]);
    }
    auto& m = r.per_class[c];
    m.support = static_cast<std::size_t>(row);
    m.precision = ratio(tp, col);
    m.recall = ratio(tp, row);
    m.f1 = harmonic(m.precision, m.recall);
    m.accuracy = m.recall;
    tp_sum += tp;
    fp_sum += col - tp;
    fn_sum += row - tp;

    r.macro.precision += m.precision / static_cast<double>(k);
    r.macro.recall += m.recall / static_cast<double>(k);
    r.macro.f1 += m.f1 / static_cast<double>(k);
    const double w = row / static_cast<double>(total);
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  r.micro.precision = ratio(tp_sum, tp_sum + fp_sum);
  r.micro.recall = ratio(tp_sum, tp_sum + fn_sum);
  r.micro.f1 = harmonic(r.micro.precision, r.micro.recall);
  r.accuracy = tp_sum / static_cast<double>(total);
  return r;
}

}  // namespace spamtopic::eval
