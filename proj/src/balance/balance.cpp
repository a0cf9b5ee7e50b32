#include "spamtopic/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spamtopic/errors.hpp"

namespace spamtopic::balance {

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::map<std::string, std::vector<std::size_t>> group_by_class(std::span<const std::string> y) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
  return groups;
}

void check_inputs(std::span<const SparseVector> X, std::span<const std::string> y, const ResamplePlan& plan) {
  if (X.size() != y.size()) throw validation_error("feature and label counts differ");
  for (const auto& [cls, target] : plan.targets) {
    if (target < 1) throw validation_error("resample target for class '" + cls + "' must be >= 1");
  }
}

std::size_t target_for(const ResamplePlan& plan, const std::string& cls, std::size_t current) {
  auto it = plan.targets.find(cls);
  return it == plan.targets.end() ? current : it->second;
}

// Rows grouped by class (sorted), then shuffled with the plan seed.
Resampled finish(std::span<const SparseVector> X, std::span<const std::string> y,
                 std::vector<std::pair<Provenance, SparseVector>>&& rows_in_class_order,
                 std::vector<std::string>&& labels, std::vector<std::string>&& warnings, std::uint64_t seed) {
  (void)X;
  (void)y;
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  Resampled out;
  out.X.reserve(order.size());
  out.y.reserve(order.size());
  out.provenance.reserve(order.size());
  for (std::size_t idx : order) {
    out.provenance.push_back(rows_in_class_order[idx].first);
    out.X.push_back(std::move(rows_in_class_order[idx].second));
    out.y.push_back(std::move(labels[idx]));
  }
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace

ClassWeights compute_class_weights(std::span<const std::string> labels) {
  if (labels.empty()) throw validation_error("cannot compute class weights for an empty label list");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  const double n = static_cast<double>(labels.size());
  const double k = static_cast<double>(counts.size());
  ClassWeights weights;
  for (const auto& [cls, count] : counts) weights[cls] = n / (k * static_cast<double>(count));
  return weights;
}

ResamplePlan default_plan(std::span<const std::string> labels, std::uint64_t seed) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  ResamplePlan plan;
  plan.seed = seed;
  if (counts.empty()) return plan;
  const auto target = static_cast<std::size_t>(
      std::llround(static_cast<double>(labels.size()) / static_cast<double>(counts.size())));
  for (const auto& [cls, count] : counts) plan.targets[cls] = std::max<std::size_t>(1, target);
  return plan;
}

Resampled random_rebalance(std::span<const SparseVector> X, std::span<const std::string> y,
                           const ResamplePlan& plan) {
  check_inputs(X, y, plan);
  std::mt19937_64 rng(plan.seed);
  std::vector<std::pair<Provenance, SparseVector>> rows;
  std::vector<std::string> labels;
  for (const auto& [cls, members] : group_by_class(y)) {
    const std::size_t target = target_for(plan, cls, members.size());
    std::vector<std::size_t> chosen;
    if (members.size() > target) {
      std::vector<std::size_t> pool = members;
      for (std::size_t i = 0; i < target; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
      }
      chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target));
      std::sort(chosen.begin(), chosen.end());
    } else {
      chosen = members;
      while (chosen.size() < target) chosen.push_back(members[uniform_index(rng, members.size())]);
    }
    for (std::size_t idx : chosen) {
      rows.emplace_back(Provenance{static_cast<std::int64_t>(idx), -1, 0.0}, X[idx]);
      labels.push_back(cls);
    }
  }
  return finish(X, y, std::move(rows), std::move(labels), {}, plan.seed);
}

Resampled smote_oversample(std::span<const SparseVector> X, std::span<const std::string> y,
                           const ResamplePlan& plan, const SmoteOptions& options) {
  check_inputs(X, y, plan);
  std::mt19937_64 rng(plan.seed);
  std::vector<std::pair<Provenance, SparseVector>> rows;
  std::vector<std::string> labels;
  std::vector<std::string> warnings;
  for (const auto& [cls, members] : group_by_class(y)) {
    for (std::size_t idx : members) {
      rows.emplace_back(Provenance{static_cast<std::int64_t>(idx), -1, 0.0}, X[idx]);
      labels.push_back(cls);
    }
    const std::size_t target = target_for(plan, cls, members.size());
    if (members.size() >= target) continue;
    const std::size_t missing = target - members.size();

    if (members.size() == 1) {
      warnings.push_back("class '" + cls + "' has a single sample; grown by duplication instead of SMOTE");
      for (std::size_t s = 0; s < missing; ++s) {
        rows.emplace_back(Provenance{static_cast<std::int64_t>(members[0]), -1, 0.0}, X[members[0]]);
        labels.push_back(cls);
      }
      continue;
    }

    const std::size_t k = std::max<std::size_t>(1, std::min(options.k, members.size() - 1));
    // k nearest same-class neighbors per member (distance, then index).
    std::vector<std::vector<std::size_t>> neighbors(members.size());
    for (std::size_t a = 0; a < members.size(); ++a) {
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(members.size() - 1);
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a == b) continue;
        dist.emplace_back(vectorize::squared_distance(X[members[a]], X[members[b]]), members[b]);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t j = 0; j < k; ++j) neighbors[a].push_back(dist[j].second);
    }
    for (std::size_t s = 0; s < missing; ++s) {
      const std::size_t a = uniform_index(rng, members.size());
      const std::size_t nb = neighbors[a][uniform_index(rng, k)];
      const double lambda = options.fixed_lambda ? *options.fixed_lambda : uniform01(rng);
      rows.emplace_back(Provenance{static_cast<std::int64_t>(members[a]), static_cast<std::int64_t>(nb), lambda},
                        vectorize::interpolate(X[members[a]], X[nb], lambda));
      labels.push_back(cls);
    }
  }
  return finish(X, y, std::move(rows), std::move(labels), std::move(warnings), plan.seed);
}

Resampled nearmiss_undersample(std::span<const SparseVector> X, std::span<const std::string> y,
                               const ResamplePlan& plan, std::size_t k) {
  check_inputs(X, y, plan);
  if (k < 1) throw validation_error("NearMiss k must be >= 1");
  const auto groups = group_by_class(y);
  if (groups.empty()) return {};

  // Reference class: the smallest (first in sorted order on ties).
  const std::vector<std::size_t>* minority = nullptr;
  std::string minority_class;
  for (const auto& [cls, members] : groups) {
    if (minority == nullptr || members.size() < minority->size()) {
      minority = &members;
      minority_class = cls;
    }
  }
  const std::size_t kk = std::min(k, minority->size());

  std::vector<std::pair<Provenance, SparseVector>> rows;
  std::vector<std::string> labels;
  for (const auto& [cls, members] : groups) {
    const std::size_t target = target_for(plan, cls, members.size());
    if (target > members.size()) {
      throw validation_error("NearMiss target " + std::to_string(target) + " exceeds the " +
                             std::to_string(members.size()) + " samples of class '" + cls + "'");
    }
    std::vector<std::size_t> keep = members;
    if (cls != minority_class && target < members.size()) {
      std::vector<std::pair<double, std::size_t>> scored;
      scored.reserve(members.size());
      std::vector<double> dist(minority->size());
      for (std::size_t idx : members) {
        for (std::size_t j = 0; j < minority->size(); ++j) {
          dist[j] = std::sqrt(vectorize::squared_distance(X[idx], X[(*minority)[j]]));
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        double mean = 0.0;
        for (std::size_t j = 0; j < kk; ++j) mean += dist[j];
        scored.emplace_back(mean / static_cast<double>(kk), idx);
      }
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      keep.clear();
      for (std::size_t j = 0; j < target; ++j) keep.push_back(scored[j].second);
      std::sort(keep.begin(), keep.end());
    } else if (cls == minority_class && target < members.size()) {
      keep.resize(target);
    }
    for (std::size_t idx : keep) {
      rows.emplace_back(Provenance{static_cast<std::int64_t>(idx), -1, 0.0}, X[idx]);
      labels.push_back(cls);
    }
  }
  return finish(X, y, std::move(rows), std::move(labels), {}, plan.seed);
}

Resampled smote_nearmiss(std::span<const SparseVector> X, std::span<const std::string> y,
                         const ResamplePlan& plan) {
  Resampled grown = smote_oversample(X, y, plan);
  Resampled shrunk = nearmiss_undersample(grown.X, grown.y, plan);
  // Provenance chains back to the original rows.
  for (auto& p : shrunk.provenance) {
    p = grown.provenance[static_cast<std::size_t>(p.first)];
  }
  shrunk.warnings.insert(shrunk.warnings.begin(), grown.warnings.begin(), grown.warnings.end());
  return shrunk;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::weights: return "weights";
    case Strategy::random: return "random";
    case Strategy::smote_nearmiss: return "smote_nearmiss";
  }
  return "none";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "none") return Strategy::none;
  if (name == "weights") return Strategy::weights;
  if (name == "random") return Strategy::random;
  if (name == "smote_nearmiss") return Strategy::smote_nearmiss;
  return std::nullopt;
}

}  // namespace spamtopic::balance
