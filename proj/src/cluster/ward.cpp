#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "spamtopic/cluster.hpp"

namespace spamtopic::cluster {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Condensed upper-triangular storage for i < j.
class Condensed {
 public:
  explicit Condensed(std::size_t n) : n_(n), data_(n * (n - 1) / 2) {}
  double& at(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return data_[offset(i) + (j - i - 1)];
  }

 private:
  std::size_t offset(std::size_t i) const { return i * (2 * n_ - i - 1) / 2; }
  std::size_t n_;
  std::vector<double> data_;
};

}  // namespace

Dendrogram ward_agglomerate(std::span<const SparseVector> vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw validation_error("clustering needs at least two vectors");
  for (const auto& v : vectors) {
    if (v.dimension != vectors.front().dimension) throw validation_error("vectors have differing dimensions");
  }

  // Squared Ward distances; singletons start at the squared Euclidean distance.
  Condensed dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist.at(i, j) = vectorize::squared_distance(vectors[i], vectors[j]);
  }

  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> node(n);
  std::iota(node.begin(), node.end(), 0);
  std::vector<char> active(n, 1);
  // Nearest active slot j > i and its distance.
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, kInf);
  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = kInf;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double d = dist.at(i, j);
      if (d < nn_dist[i]) {
        nn_dist[i] = d;
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i + 1 < n; ++i) refresh(i);

  Dendrogram out;
  out.n_leaves = n;
  out.merges.reserve(n - 1);
  double previous = 0.0;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] < n && (a == n || nn_dist[i] < nn_dist[a])) a = i;
    }
    const std::size_t b = nn[a];
    const double d2 = std::max(0.0, nn_dist[a]);
    double height = std::sqrt(d2);
    if (height < previous) {
      if (previous - height > 1e-9 * std::max(1.0, previous)) {
        throw Error(ErrorKind::internal, "Ward merge heights decreased");
      }
      height = previous;
    }
    previous = height;

    const std::size_t na = size[a], nb = size[b];
    out.merges.push_back(
        {std::min(node[a], node[b]), std::max(node[a], node[b]), height, na + nb});

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double nk = static_cast<double>(size[k]);
      const double value = ((static_cast<double>(na) + nk) * dist.at(k, a) +
                            (static_cast<double>(nb) + nk) * dist.at(k, b) - nk * d2) /
                           (static_cast<double>(na + nb) + nk);
      dist.at(k, a) = value;
    }
    active[b] = 0;
    size[a] = na + nb;
    node[a] = n + step;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k]) continue;
      if (k == a || nn[k] == a || nn[k] == b) {
        refresh(k);
      } else if (k < a) {
        const double d = dist.at(k, a);
        if (d < nn_dist[k] || (d == nn_dist[k] && a < nn[k])) {
          nn_dist[k] = d;
          nn[k] = a;
        }
      }
    }
  }
  check_dendrogram(out);
  return out;
}

void check_dendrogram(const Dendrogram& d) {
  if (d.n_leaves < 1) throw validation_error("dendrogram has no leaves");
  if (d.merges.size() + 1 != d.n_leaves) throw validation_error("dendrogram must have n_leaves - 1 merges");
  std::vector<std::size_t> sizes(d.n_leaves, 1);
  std::vector<char> used(2 * d.n_leaves, 0);
  double previous = 0.0;
  for (std::size_t i = 0; i < d.merges.size(); ++i) {
    const auto& m = d.merges[i];
    const std::size_t created = d.n_leaves + i;
    if (m.left >= created || m.right >= created || m.left == m.right) {
      throw validation_error("merge " + std::to_string(i) + " references an unknown node");
    }
    if (used[m.left] || used[m.right]) throw validation_error("merge " + std::to_string(i) + " reuses a node");
    if (!std::isfinite(m.height) || m.height < previous) {
      throw validation_error("merge heights must be finite and non-decreasing");
    }
    if (m.size != sizes[m.left] + sizes[m.right]) {
      throw validation_error("merge " + std::to_string(i) + " size differs from its children");
    }
    used[m.left] = used[m.right] = 1;
    sizes.push_back(m.size);
    previous = m.height;
  }
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

ClusterAssignment components(const Dendrogram& d, std::size_t merges_applied) {
  const std::size_t n = d.n_leaves;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  // Representative leaf of each node.
  std::vector<std::size_t> leaf_of(n);
  std::iota(leaf_of.begin(), leaf_of.end(), 0);
  for (std::size_t i = 0; i < merges_applied; ++i) {
    const auto& m = d.merges[i];
    const std::size_t ra = find_root(parent, leaf_of[m.left]);
    const std::size_t rb = find_root(parent, leaf_of[m.right]);
    parent[std::max(ra, rb)] = std::min(ra, rb);
    leaf_of.push_back(std::min(ra, rb));
  }
  ClusterAssignment out;
  out.membership.assign(n, 0);
  std::vector<std::size_t> id_of_root(n, n);
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    const std::size_t r = find_root(parent, leaf);
    if (id_of_root[r] == n) id_of_root[r] = out.cluster_count++;
    out.membership[leaf] = id_of_root[r];
  }
  return out;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::sizes() const {
  std::vector<std::size_t> out(cluster_count, 0);
  for (std::size_t m : membership) ++out[m];
  return out;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(cluster_count);
  for (std::size_t leaf = 0; leaf < membership.size(); ++leaf) out[membership[leaf]].push_back(leaf);
  return out;
}

ClusterAssignment cut_dendrogram(const Dendrogram& d, double height) {
  if (!(height >= 0.0)) throw validation_error("cut height must be >= 0");
  std::size_t applied = 0;
  while (applied < d.merges.size() && d.merges[applied].height <= height) ++applied;
  auto out = components(d, applied);
  out.cut_height = height;
  return out;
}

ClusterAssignment cut_to_k(const Dendrogram& d, std::size_t k) {
  if (k < 1 || k > d.n_leaves) {
    throw validation_error("k must lie in [1, " + std::to_string(d.n_leaves) + "]");
  }
  auto out = components(d, d.n_leaves - k);
  out.cut_k = k;
  return out;
}

std::string dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : d.merges) merges.push_back({m.left, m.right, m.height, m.size});
  return nlohmann::json{{"n_leaves", d.n_leaves}, {"merges", merges}}.dump();
}

Dendrogram dendrogram_from_json(const std::string& text) {
  Dendrogram d;
  try {
    const auto j = nlohmann::json::parse(text);
    d.n_leaves = j.at("n_leaves").get<std::size_t>();
    for (const auto& m : j.at("merges")) {
      if (!m.is_array() || m.size() != 4) throw validation_error("merge entries must be [left, right, height, size]");
      d.merges.push_back({m[0].get<std::size_t>(), m[1].get<std::size_t>(), m[2].get<double>(), m[3].get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed dendrogram JSON: ") + e.what());
  }
  check_dendrogram(d);
  return d;
}

}  // namespace spamtopic::cluster
