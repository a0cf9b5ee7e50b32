#pragma once

// Reference implementations written without reusing library internals.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spamtopic/cluster.hpp"
#include "spamtopic/eval.hpp"
#include "spamtopic/vectorize.hpp"

namespace oracle {

using Points = std::vector<std::vector<double>>;

/// Recomputes the exact Ward cost between every pair of current clusters at
/// every step. O(n^3 d).
spamtopic::cluster::Dendrogram naive_ward(const Points& points);

struct BruteMetrics {
  std::vector<double> precision, recall, f1;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  double micro_p = 0, micro_r = 0, micro_f1 = 0;
  double weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
  double accuracy = 0;
};

/// Expands the matrix into sample pairs and counts per class.
BruteMetrics brute_metrics(const spamtopic::eval::ConfusionMatrix& cm);

/// log P(c) + sum_j x_j log((N_cj + alpha) / (N_c + alpha d)), priors from
/// class frequencies.
std::vector<double> multinomial_nb_log_joint(const Points& X, const std::vector<std::string>& y,
                                             const std::vector<std::string>& classes, double alpha,
                                             const std::vector<double>& x);

/// Direct evaluation of the weighted logistic objective for one theta.
double logistic_objective(const Points& X, const std::vector<double>& y, const std::vector<double>& s, double c,
                          const std::vector<double>& theta);

/// Distance from `x` to the segment [a, b].
double segment_residual(const spamtopic::vectorize::SparseVector& x, const spamtopic::vectorize::SparseVector& a,
                        const spamtopic::vectorize::SparseVector& b);

spamtopic::vectorize::SparseVector sparse(const std::vector<double>& dense);
std::vector<double> dense(const spamtopic::vectorize::SparseVector& v);

Points random_points(std::mt19937_64& rng, std::size_t n, std::size_t d);

}  // namespace oracle
