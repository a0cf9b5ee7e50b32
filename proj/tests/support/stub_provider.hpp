#pragma once

#include <memory>
#include <string>

namespace testsupport {

/// In-process embedding provider: POST / with a JSON array of strings,
/// answers with one hashed bag-of-words vector per string.
class StubProvider {
 public:
  explicit StubProvider(std::size_t dimension = 32);
  ~StubProvider();
  std::string url() const;
  std::size_t requests() const;
  /// Makes every later request fail with 500.
  void fail(bool on);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace testsupport
