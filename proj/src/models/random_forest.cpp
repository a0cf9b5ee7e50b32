#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "common.hpp"

namespace spamtopic::models {

namespace {

constexpr std::size_t kDenseLimit = std::size_t{4} << 20;  // values

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class FeatureMatrix {
 public:
  FeatureMatrix(std::span<const SparseVector> rows, std::size_t d) : rows_(rows), n_(rows.size()) {
    if (n_ * d <= kDenseLimit) {
      columns_.assign(n_ * d, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        for (const auto& [j, v] : rows[i].entries) columns_[j * n_ + i] = v;
      }
    }
  }

  double get(std::size_t row, std::size_t feature) const {
    if (!columns_.empty()) return columns_[feature * n_ + row];
    return rows_[row].at(static_cast<std::uint32_t>(feature));
  }

 private:
  std::span<const SparseVector> rows_;
  std::size_t n_;
  std::vector<double> columns_;
};

struct TreeInputs {
  std::span<const SparseVector> rows;
  const FeatureMatrix* matrix;
  const std::vector<int>* ids;
  const std::vector<double>* weights;
  std::size_t n;
  std::size_t d;
  std::size_t classes;
  std::size_t max_features;
  bool bootstrap;
};

std::int32_t argmax_class(const std::vector<double>& totals) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < totals.size(); ++c) {
    if (totals[c] > totals[best]) best = c;
  }
  return static_cast<std::int32_t>(best);
}

// Running Gini state while samples move from the right child to the left.
struct SplitScan {
  const std::vector<double>& totals;
  double total_weight;
  std::vector<double>& left;
  double wl = 0.0, sql = 0.0, sqr = 0.0;

  void add(std::size_t c, double w) {
    const double right_c = totals[c] - left[c];
    sql += (left[c] + w) * (left[c] + w) - left[c] * left[c];
    sqr += (right_c - w) * (right_c - w) - right_c * right_c;
    left[c] += w;
    wl += w;
  }
  // Maximising sum over children of (sum_c w_c^2) / W minimises weighted Gini.
  double score() const {
    const double wr = total_weight - wl;
    return (wl > 0 ? sql / wl : 0.0) + (wr > 0 ? sqr / wr : 0.0);
  }
};

DecisionTree grow_tree(const TreeInputs& in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> samples(in.n);
  if (in.bootstrap) {
    for (auto& s : samples) s = static_cast<std::uint32_t>(rng() % in.n);
  } else {
    std::iota(samples.begin(), samples.end(), 0u);
  }

  DecisionTree tree;
  tree.nodes.emplace_back();
  struct Work {
    std::size_t node, begin, end;
  };
  std::vector<Work> stack{{0, 0, samples.size()}};

  std::vector<double> totals(in.classes), left(in.classes), zero_totals(in.classes);
  std::vector<std::vector<std::pair<double, std::uint32_t>>> lists;
  std::vector<std::uint32_t> batch;
  std::vector<std::int32_t> slot(in.d, -1);
  // A feature absent from every sample of a node is constant there, so only
  // features stored in some row of the node are candidates.
  std::vector<std::uint32_t> candidates;
  std::vector<std::uint64_t> stamp(in.d, 0);
  std::uint64_t visit = 0;

  while (!stack.empty()) {
    const Work work = stack.back();
    stack.pop_back();
    std::fill(totals.begin(), totals.end(), 0.0);
    for (std::size_t p = work.begin; p < work.end; ++p) {
      totals[static_cast<std::size_t>((*in.ids)[samples[p]])] += (*in.weights)[samples[p]];
    }
    const std::int32_t majority = argmax_class(totals);
    tree.nodes[work.node].label = majority;
    std::size_t present = 0;
    double total_weight = 0.0, total_sq = 0.0;
    for (double t : totals) {
      present += t > 0.0 ? 1 : 0;
      total_weight += t;
      total_sq += t * t;
    }
    if (present <= 1) continue;

    ++visit;
    candidates.clear();
    for (std::size_t p = work.begin; p < work.end; ++p) {
      for (const auto& [j, v] : in.rows[samples[p]].entries) {
        if (stamp[j] != visit) {
          stamp[j] = visit;
          candidates.push_back(j);
        }
      }
    }
    // Row order above depends on the sample layout; fix it before drawing.
    std::sort(candidates.begin(), candidates.end());

    double best_score = -1.0;
    std::int64_t best_feature = -1;
    double best_threshold = 0.0;
    std::size_t visited = 0;
    const std::size_t m = work.end - work.begin;
    std::size_t drawn = 0;
    while (drawn < candidates.size() && visited < in.max_features) {
      // Draw a batch and collect its nonzeros in one pass over the node rows.
      batch.clear();
      for (; drawn < candidates.size() && batch.size() < in.max_features - visited; ++drawn) {
        std::swap(candidates[drawn], candidates[drawn + rng() % (candidates.size() - drawn)]);
        slot[candidates[drawn]] = static_cast<std::int32_t>(batch.size());
        batch.push_back(candidates[drawn]);
      }
      if (lists.size() < batch.size()) lists.resize(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) lists[b].clear();
      for (std::size_t p = work.begin; p < work.end; ++p) {
        for (const auto& [j, v] : in.rows[samples[p]].entries) {
          if (slot[j] >= 0 && v != 0.0) lists[static_cast<std::size_t>(slot[j])].emplace_back(v, samples[p]);
        }
      }
      for (auto f : batch) slot[f] = -1;

      for (std::size_t b = 0; b < batch.size() && visited < in.max_features; ++b) {
        const std::size_t f = batch[b];
        auto& values = lists[b];
        zero_totals = totals;
        for (const auto& [v, s] : values) zero_totals[static_cast<std::size_t>((*in.ids)[s])] -= (*in.weights)[s];
        const std::size_t zeros = m - values.size();
        std::sort(values.begin(), values.end());
        if (values.empty() || (zeros == 0 && values.front().first == values.back().first)) continue;
        ++visited;

        std::fill(left.begin(), left.end(), 0.0);
        SplitScan scan{totals, total_weight, left};
        scan.sqr = total_sq;
        auto consider = [&](double lo, double hi) {
          const double score = scan.score();
          if (score > best_score + 1e-12 * std::abs(best_score)) {
            best_score = score;
            best_feature = static_cast<std::int64_t>(f);
            double mid = 0.5 * (lo + hi);
            if (!(mid < hi)) mid = lo;
            best_threshold = mid;
          }
        };
        // Sorted order is: negatives, the block of zeros, positives.
        const auto first_positive = static_cast<std::size_t>(
            std::lower_bound(values.begin(), values.end(), std::pair<double, std::uint32_t>{0.0, 0}) - values.begin());
        std::size_t q = 0;
        for (; q < first_positive; ++q) {
          scan.add(static_cast<std::size_t>((*in.ids)[values[q].second]), (*in.weights)[values[q].second]);
          double next = 0.0;
          if (q + 1 < first_positive) {
            next = values[q + 1].first;
          } else if (zeros == 0) {
            if (first_positive == values.size()) break;
            next = values[first_positive].first;
          }
          if (values[q].first != next) consider(values[q].first, next);
        }
        if (zeros > 0) {
          for (std::size_t c = 0; c < in.classes; ++c) {
            if (zero_totals[c] > 0.0) scan.add(c, zero_totals[c]);
          }
          if (first_positive < values.size()) consider(0.0, values[first_positive].first);
        }
        for (q = first_positive; q + 1 < values.size(); ++q) {
          scan.add(static_cast<std::size_t>((*in.ids)[values[q].second]), (*in.weights)[values[q].second]);
          if (values[q].first != values[q + 1].first) consider(values[q].first, values[q + 1].first);
        }
      }
    }
    if (best_feature < 0) continue;

    const auto mid_it = std::partition(
        samples.begin() + static_cast<std::ptrdiff_t>(work.begin), samples.begin() + static_cast<std::ptrdiff_t>(work.end),
        [&](std::uint32_t s) { return in.matrix->get(s, static_cast<std::size_t>(best_feature)) <= best_threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - samples.begin());
    const auto left_node = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[work.node];
    node.feature = static_cast<std::int32_t>(best_feature);
    node.threshold = best_threshold;
    node.left = left_node;
    node.right = left_node + 1;
    stack.push_back({static_cast<std::size_t>(left_node + 1), mid, work.end});
    stack.push_back({static_cast<std::size_t>(left_node), work.begin, mid});
  }
  return tree;
}

}  // namespace

TrainedModel train_random_forest(std::span<const SparseVector> X, std::span<const std::string> y, std::size_t trees,
                                 std::uint64_t seed, const std::optional<ClassWeights>& weights, bool bootstrap,
                                 std::size_t threads) {
  const std::size_t d = detail::common_dimension(X, y);
  if (trees == 0) throw validation_error("trees must be >= 1");
  if (d == 0) throw validation_error("random forest needs at least one feature");
  detail::require_finite(X);
  const auto labels = detail::index_labels(y);
  const auto sw = detail::sample_weights(labels, weights);
  const FeatureMatrix matrix(X, d);

  TreeInputs in{X, &matrix, &labels.ids, &sw, X.size(), d, labels.classes.size(),
                static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))), bootstrap};

  ForestParams params;
  params.trees.resize(trees);
  std::size_t workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min(workers, trees);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t t = next++; t < trees; t = next++) {
      params.trees[t] = grow_tree(in, splitmix64(seed ^ (t * 0xD1B54A32D192ED03ULL)));
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }

  TrainedModel model;
  model.spec.algorithm = Algorithm::random_forest;
  model.spec.trees = trees;
  model.spec.seed = seed;
  model.spec.bootstrap = bootstrap;
  model.spec.threads = threads;
  model.spec.weights = weights;
  model.classes = labels.classes;
  model.feature_dimension = d;
  model.parameters = std::move(params);
  return model;
}

}  // namespace spamtopic::models
