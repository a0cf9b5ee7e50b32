#include <algorithm>
#include <map>
#include <random>

#include "spamtopic/errors.hpp"
#include "spamtopic/eval.hpp"

namespace spamtopic::eval {

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const std::string> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw validation_error("k must be >= 2");
  if (k > labels.size()) {
    throw validation_error("k=" + std::to_string(k) + " exceeds the " + std::to_string(labels.size()) + " samples");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& [cls, members] : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
    for (std::size_t idx : members) {
      folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace spamtopic::eval
