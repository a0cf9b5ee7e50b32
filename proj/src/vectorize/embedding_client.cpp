#include "spamtopic/embedding_client.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>

#include "spamtopic/errors.hpp"

namespace spamtopic::vectorize {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw adapter_error("embedding provider URL must start with http:// (got '" + url + "')");
  }
  std::size_t slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::vector<DenseVector> fetch_external_embeddings(const std::vector<std::string>& texts,
                                                   const ProviderConfig& provider) {
  std::vector<DenseVector> out;
  if (texts.empty()) return out;
  if (provider.url.empty()) throw adapter_error("embedding_provider_url is not configured");
  if (provider.batch_size == 0) throw validation_error("embedding batch size must be >= 1");

  const Endpoint endpoint = split_url(provider.url);
  httplib::Client client(endpoint.origin);
  const auto secs = static_cast<time_t>(provider.timeout_secs);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  std::size_t dimension = 0;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += provider.batch_size) {
    const std::size_t end = std::min(texts.size(), start + provider.batch_size);
    nlohmann::json request = nlohmann::json::array();
    for (std::size_t i = start; i < end; ++i) request.push_back(texts[i]);
    auto res = client.Post(endpoint.path, request.dump(), "application/json");
    if (!res) {
      throw adapter_error("embedding provider " + provider.url + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw adapter_error("embedding provider answered HTTP " + std::to_string(res->status));
    }
    nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
    if (!body.is_array() || body.size() != end - start) {
      throw adapter_error("embedding provider returned " +
                          (body.is_array() ? std::to_string(body.size()) : std::string("non-array")) +
                          " vectors for a batch of " + std::to_string(end - start));
    }
    for (const auto& row : body) {
      if (!row.is_array() || row.empty()) throw adapter_error("embedding provider returned a non-vector row");
      if (dimension == 0) dimension = row.size();
      if (row.size() != dimension) {
        throw adapter_error("embedding dimension mismatch: expected " + std::to_string(dimension) + ", got " +
                            std::to_string(row.size()));
      }
      DenseVector v;
      v.values.reserve(dimension);
      for (const auto& x : row) {
        if (!x.is_number()) throw adapter_error("embedding provider returned a non-numeric component");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw adapter_error("embedding provider returned a non-finite component");
        v.values.push_back(d);
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace spamtopic::vectorize
