#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace oracle {

namespace cl = spamtopic::cluster;
namespace vz = spamtopic::vectorize;

cl::Dendrogram naive_ward(const Points& points) {
  struct Cluster {
    std::vector<std::size_t> leaves;
    std::size_t node;
  };
  const std::size_t n = points.size();
  const std::size_t d = n ? points[0].size() : 0;
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({{i}, i});

  auto centroid = [&](const Cluster& c) {
    std::vector<double> m(d, 0.0);
    for (auto leaf : c.leaves)
      for (std::size_t k = 0; k < d; ++k) m[k] += points[leaf][k];
    for (auto& v : m) v /= static_cast<double>(c.leaves.size());
    return m;
  };
  auto sse = [&](const std::vector<std::size_t>& leaves) {
    Cluster tmp{leaves, 0};
    const auto m = centroid(tmp);
    double s = 0.0;
    for (auto leaf : leaves)
      for (std::size_t k = 0; k < d; ++k) s += (points[leaf][k] - m[k]) * (points[leaf][k] - m[k]);
    return s;
  };

  cl::Dendrogram out;
  out.n_leaves = n;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    // Active clusters stay sorted by smallest leaf, so the first strict
    // minimum in (i, j) order is the lexicographic tie winner.
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        std::vector<std::size_t> both = active[i].leaves;
        both.insert(both.end(), active[j].leaves.begin(), active[j].leaves.end());
        const double delta = sse(both) - sse(active[i].leaves) - sse(active[j].leaves);
        if (delta < best) {
          best = delta;
          bi = i;
          bj = j;
        }
      }
    }
    cl::Merge m;
    m.left = std::min(active[bi].node, active[bj].node);
    m.right = std::max(active[bi].node, active[bj].node);
    m.height = std::sqrt(2.0 * std::max(best, 0.0));
    m.size = active[bi].leaves.size() + active[bj].leaves.size();
    out.merges.push_back(m);
    Cluster merged{active[bi].leaves, n + step};
    merged.leaves.insert(merged.leaves.end(), active[bj].leaves.begin(), active[bj].leaves.end());
    std::sort(merged.leaves.begin(), merged.leaves.end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active[bi] = merged;
  }
  return out;
}

BruteMetrics brute_metrics(const spamtopic::eval::ConfusionMatrix& cm) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < cm.counts.size(); ++t)
    for (std::size_t p = 0; p < cm.counts[t].size(); ++p)
      for (std::size_t r = 0; r < cm.counts[t][p]; ++r) pairs.emplace_back(t, p);
  const std::size_t k = cm.classes.size();
  BruteMetrics m;
  m.precision.assign(k, 0);
  m.recall.assign(k, 0);
  m.f1.assign(k, 0);
  auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  double tp_all = 0, fp_all = 0, fn_all = 0, total = static_cast<double>(pairs.size());
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (auto [t, p] : pairs) {
      if (t == c && p == c) ++tp;
      if (t != c && p == c) ++fp;
      if (t == c && p != c) ++fn;
    }
    m.precision[c] = ratio(tp, tp + fp);
    m.recall[c] = ratio(tp, tp + fn);
    m.f1[c] = ratio(2 * m.precision[c] * m.recall[c], m.precision[c] + m.recall[c]);
    const double support = tp + fn;
    m.macro_p += m.precision[c] / static_cast<double>(k);
    m.macro_r += m.recall[c] / static_cast<double>(k);
    m.macro_f1 += m.f1[c] / static_cast<double>(k);
    if (total > 0) {
      m.weighted_p += m.precision[c] * support / total;
      m.weighted_r += m.recall[c] * support / total;
      m.weighted_f1 += m.f1[c] * support / total;
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  m.micro_p = ratio(tp_all, tp_all + fp_all);
  m.micro_r = ratio(tp_all, tp_all + fn_all);
  m.micro_f1 = ratio(2 * m.micro_p * m.micro_r, m.micro_p + m.micro_r);
  double correct = 0;
  for (auto [t, p] : pairs) correct += t == p ? 1 : 0;
  m.accuracy = ratio(correct, total);
  return m;
}

std::vector<double> multinomial_nb_log_joint(const Points& X, const std::vector<std::string>& y,
                                             const std::vector<std::string>& classes, double alpha,
                                             const std::vector<double>& x) {
  const std::size_t d = x.size();
  std::vector<double> out;
  for (const auto& c : classes) {
    std::vector<double> counts(d, 0.0);
    double docs = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (y[i] != c) continue;
      ++docs;
      for (std::size_t j = 0; j < d; ++j) counts[j] += X[i][j];
    }
    double total = 0;
    for (double v : counts) total += v;
    double lj = std::log(docs / static_cast<double>(X.size()));
    for (std::size_t j = 0; j < d; ++j) lj += x[j] * std::log((counts[j] + alpha) / (total + alpha * static_cast<double>(d)));
    out.push_back(lj);
  }
  return out;
}

double logistic_objective(const Points& X, const std::vector<double>& y, const std::vector<double>& s, double c,
                          const std::vector<double>& theta) {
  const std::size_t d = theta.size() - 1;
  double reg = 0;
  for (std::size_t j = 0; j < d; ++j) reg += theta[j] * theta[j];
  double loss = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double z = theta[d];
    for (std::size_t j = 0; j < d; ++j) z += theta[j] * X[i][j];
    loss += (s.empty() ? 1.0 : s[i]) * std::log1p(std::exp(-y[i] * z));
  }
  return 0.5 * reg + c * loss;
}

std::vector<double> dense(const vz::SparseVector& v) {
  std::vector<double> out(v.dimension, 0.0);
  for (const auto& [j, x] : v.entries) out[j] = x;
  return out;
}

vz::SparseVector sparse(const std::vector<double>& values) {
  vz::SparseVector v;
  v.dimension = values.size();
  for (std::size_t j = 0; j < values.size(); ++j)
    if (values[j] != 0.0) v.entries.emplace_back(static_cast<std::uint32_t>(j), values[j]);
  return v;
}

double segment_residual(const vz::SparseVector& x, const vz::SparseVector& a, const vz::SparseVector& b) {
  const auto xv = dense(x), av = dense(a), bv = dense(b);
  double num = 0, den = 0;
  for (std::size_t j = 0; j < xv.size(); ++j) {
    num += (xv[j] - av[j]) * (bv[j] - av[j]);
    den += (bv[j] - av[j]) * (bv[j] - av[j]);
  }
  const double t = den == 0 ? 0.0 : std::clamp(num / den, 0.0, 1.0);
  double r = 0;
  for (std::size_t j = 0; j < xv.size(); ++j) {
    const double p = av[j] + t * (bv[j] - av[j]);
    r += (xv[j] - p) * (xv[j] - p);
  }
  return std::sqrt(r);
}

Points random_points(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Points p(n, std::vector<double>(d));
  for (auto& row : p)
    for (auto& v : row) v = g(rng);
  return p;
}

}  // namespace oracle
