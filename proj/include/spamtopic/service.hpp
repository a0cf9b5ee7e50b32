#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "spamtopic/config.hpp"

namespace spamtopic::service {

struct ServiceOptions {
  /// Holds `<name>.jsonl` datasets, optional `<name>.dendrogram.json`, and
  /// receives `sessions/` logs and `exports/`.
  std::filesystem::path data_dir;
  /// Pipeline artifact served by POST /classify.
  std::optional<std::filesystem::path> model_dir;
  store::Config config;
  /// 0 picks a free port.
  int port = 0;
  std::string host = "127.0.0.1";
};

/// JSON-over-HTTP labeling and classification API. Sessions found under
/// `data_dir/sessions` are restored by replaying their logs.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Blocks until stop() is called (or the server fails).
  void wait();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spamtopic::service
