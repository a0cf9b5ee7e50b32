#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spamtopic::adapters {

/// External-tool command templates. `{input}` (and for rendering `{output}`)
/// are substituted with shell-quoted temp-file paths.
struct AdapterConfig {
  std::optional<std::string> ocr_command;
  std::optional<std::string> render_command;
  std::optional<std::string> language_command;
  double timeout_secs = 30.0;

  /// Throws a validation error if a template lacks exactly one `{input}`
  /// (render: also exactly one `{output}`) or the timeout is not positive.
  void validate() const;
};

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // stdout

  bool ok() const { return !timed_out && exit_code == 0; }
};

/// Runs `command` through /bin/sh with stdout captured. The process group is
/// killed when `timeout_secs` elapses. Never throws for child failures.
CommandResult run_command(const std::string& command, double timeout_secs);

std::string shell_quote(std::string_view s);

/// Replaces every `{key}` with the shell-quoted value.
std::string expand_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::size_t count_placeholder(std::string_view tmpl, std::string_view key);

/// Scratch directory removed (recursively) on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, std::span<const std::uint8_t> bytes) const;
  std::filesystem::path write(const std::string& name, std::string_view text) const;

 private:
  std::filesystem::path path_;
};

/// ITU-R BT.601 luma, rounded to the nearest integer.
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
};

/// Decodes a PNG (any color type; alpha composited over white) to grayscale.
/// Throws an adapter error on undecodable input.
GrayImage png_to_gray(const std::filesystem::path& png);
void write_gray_png(const GrayImage& image, const std::filesystem::path& out);

/// Image formats accepted for OCR, detected from magic bytes.
enum class ImageFormat { png, jpeg, gif, bmp, unknown };
ImageFormat sniff_image(std::span<const std::uint8_t> bytes);
bool is_allowed_media_type(std::string_view media_type);

}  // namespace spamtopic::adapters
