#pragma once

#include <string>
#include <vector>

#include "spamtopic/vectorize.hpp"

namespace spamtopic::vectorize {

/// HTTP endpoint that maps a JSON array of strings to a JSON array of
/// equal-length number arrays.
struct ProviderConfig {
  std::string url;
  std::size_t batch_size = 64;
  double timeout_secs = 60.0;
};

/// Posts `texts` in batches and returns one vector per text, in order. The
/// dimension of the first response is enforced on every later vector.
/// Throws an adapter error when the provider is unreachable, answers with a
/// non-200 status or malformed JSON, or changes dimension mid-run.
std::vector<DenseVector> fetch_external_embeddings(const std::vector<std::string>& texts,
                                                   const ProviderConfig& provider);

}  // namespace spamtopic::vectorize
