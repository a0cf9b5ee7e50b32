#include <algorithm>
#include <set>

#include "spamtopic/errors.hpp"
#include "spamtopic/eval.hpp"

namespace spamtopic::eval {

KeywordModel keyword_baseline_train(std::span<const textprep::TokenDoc> docs, std::span<const std::string> labels,
                                    std::size_t top) {
  if (docs.size() != labels.size()) throw validation_error("document and label counts differ");
  if (docs.empty()) throw validation_error("keyword baseline needs training documents");
  std::map<std::string, std::map<std::string, std::size_t>> df;
  KeywordModel model;
  model.top = top;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ++model.class_counts[labels[i]];
    auto& counts = df[labels[i]];
    std::set<std::string> seen(docs[i].tokens.begin(), docs[i].tokens.end());
    for (const auto& t : seen) ++counts[t];
  }
  for (const auto& [cls, counts] : df) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    auto& list = model.keywords[cls];
    for (std::size_t i = 0; i < ranked.size() && i < top; ++i) list.push_back(ranked[i].first);
  }
  return model;
}

std::string keyword_baseline_predict(const KeywordModel& model, const textprep::TokenDoc& doc) {
  if (model.class_counts.empty()) throw validation_error("keyword model is untrained");
  const std::set<std::string> tokens(doc.tokens.begin(), doc.tokens.end());
  const std::string* best = nullptr;
  std::size_t best_hits = 0, best_count = 0;
  for (const auto& [cls, count] : model.class_counts) {
    std::size_t hits = 0;
    auto it = model.keywords.find(cls);
    if (it != model.keywords.end()) {
      for (const auto& k : it->second) hits += tokens.count(k);
    }
    if (best == nullptr || hits > best_hits || (hits == best_hits && count > best_count)) {
      best = &cls;
      best_hits = hits;
      best_count = count;
    }
  }
  return *best;
}

}  // namespace spamtopic::eval
