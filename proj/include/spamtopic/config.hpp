#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "spamtopic/adapters.hpp"
#include "spamtopic/balance.hpp"
#include "spamtopic/types.hpp"
#include "spamtopic/word2vec.hpp"

namespace spamtopic::store {

struct Config {
  Language language = Language::en;
  std::uint64_t seed = 1;

  std::size_t bow_cap = 7000;
  std::size_t tfidf_cap = 10000;
  std::size_t min_df_en = 5;
  std::size_t min_df_es = 3;

  double lr_c = 1000.0;
  std::size_t lr_max_iter = 120;
  std::size_t rf_trees = 250;
  double svm_c = 1.0;
  std::size_t svm_epochs = 20;
  double nb_alpha = 1.0;
  std::size_t threads = 0;

  vectorize::EmbeddingParams embedding;  // dim 100, epochs 10, rate 0.025, vocab 15000

  balance::Strategy balance = balance::Strategy::weights;
  std::uint64_t balance_seed = 1;
  std::size_t folds = 10;

  adapters::AdapterConfig adapters;
  std::optional<std::string> embedding_provider_url;

  std::string service_host = "127.0.0.1";
  int service_port = 8080;
  std::size_t max_cluster_docs = 30000;

  std::size_t min_df(Language lang) const { return lang == Language::es ? min_df_es : min_df_en; }
  void validate() const;
};

/// Starts from the built-in defaults and applies `json` on top. Unknown keys
/// are validation errors.
Config config_from_json(const std::string& json, const Config& base = {});
std::string config_to_json(const Config& config);
/// Empty path: defaults only.
Config load_config(const std::optional<std::filesystem::path>& path);

}  // namespace spamtopic::store
