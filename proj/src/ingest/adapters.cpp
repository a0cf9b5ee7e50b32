#include "spamtopic/adapters.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <png.h>
#include <random>

#include "spamtopic/errors.hpp"

extern char** environ;

namespace spamtopic::adapters {

std::size_t count_placeholder(std::string_view tmpl, std::string_view key) {
  const std::string needle = "{" + std::string(key) + "}";
  std::size_t count = 0;
  for (std::size_t pos = tmpl.find(needle); pos != std::string_view::npos; pos = tmpl.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

void AdapterConfig::validate() const {
  if (!(timeout_secs > 0.0) || !std::isfinite(timeout_secs)) {
    throw validation_error("adapter_timeout_secs must be > 0");
  }
  if (ocr_command && count_placeholder(*ocr_command, "input") != 1) {
    throw validation_error("ocr_command must contain exactly one {input} placeholder");
  }
  if (language_command && count_placeholder(*language_command, "input") != 1) {
    throw validation_error("language_detector_command must contain exactly one {input} placeholder");
  }
  if (render_command) {
    if (count_placeholder(*render_command, "input") != 1 || count_placeholder(*render_command, "output") != 1) {
      throw validation_error("render_command must contain exactly one {input} and one {output} placeholder");
    }
  }
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

std::string expand_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += shell_quote(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

CommandResult run_command(const std::string& command, double timeout_secs) {
  CommandResult result;
  int out_pipe[2];
  if (pipe(out_pipe) != 0) return result;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[1]);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  close(out_pipe[1]);
  if (rc != 0) {
    close(out_pipe[0]);
    return result;
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(static_cast<long long>(timeout_secs * 1000.0));
  char buffer[4096];
  bool open = true;
  while (open) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{out_pipe[0], POLLIN, 0};
    const int pr = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 200)));
    if (pr < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (pr == 0) continue;
    const ssize_t got = read(out_pipe[0], buffer, sizeof buffer);
    if (got > 0) {
      result.output.append(buffer, static_cast<std::size_t>(got));
    } else if (got == 0 || errno != EINTR) {
      open = false;
    }
  }
  close(out_pipe[0]);

  int status = 0;
  if (result.timed_out) {
    kill(-pid, SIGKILL);
    waitpid(pid, &status, 0);
    return result;
  }
  // stdout closed; wait for exit within the remaining budget.
  while (true) {
    const pid_t w = waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) return result;
    if (std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      return result;
    }
    usleep(1000);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / ("spamtopic-" + std::to_string(getpid()) + "-" + std::to_string(counter++) +
                             "-" + std::to_string(rd() % 100000));
    std::error_code ec;
    if (std::filesystem::create_directory(candidate, ec)) {
      path_ = candidate;
      return;
    }
  }
  throw io_error("cannot create a temporary directory under " + base.string());
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path TempDir::write(const std::string& name, std::span<const std::uint8_t> bytes) const {
  auto p = path_ / name;
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("cannot write " + p.string());
  return p;
}

std::filesystem::path TempDir::write(const std::string& name, std::string_view text) const {
  return write(name, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::lround(std::min(255.0, y)));
}

GrayImage png_to_gray(const std::filesystem::path& png) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, png.c_str())) {
    throw adapter_error("cannot decode PNG " + png.string());
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&image);
    throw adapter_error("cannot decode PNG " + png.string());
  }
  GrayImage gray;
  gray.width = image.width;
  gray.height = image.height;
  gray.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const std::uint8_t* px = &rgba[i * 4];
    // Composite over white before taking luma.
    const double a = px[3] / 255.0;
    auto over_white = [a](std::uint8_t c) {
      return static_cast<std::uint8_t>(std::lround(c * a + 255.0 * (1.0 - a)));
    };
    gray.pixels[i] = luminance(over_white(px[0]), over_white(px[1]), over_white(px[2]));
  }
  return gray;
}

void write_gray_png(const GrayImage& gray, const std::filesystem::path& out) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = gray.width;
  image.height = gray.height;
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, out.c_str(), 0, gray.pixels.data(), 0, nullptr)) {
    throw adapter_error("cannot write PNG " + out.string());
  }
}

ImageFormat sniff_image(std::span<const std::uint8_t> b) {
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G') return ImageFormat::png;
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ImageFormat::jpeg;
  if (b.size() >= 6 && b[0] == 'G' && b[1] == 'I' && b[2] == 'F' && b[3] == '8') return ImageFormat::gif;
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return ImageFormat::bmp;
  return ImageFormat::unknown;
}

bool is_allowed_media_type(std::string_view media_type) {
  return media_type == "image/png" || media_type == "image/jpeg" || media_type == "image/jpg" ||
         media_type == "image/pjpeg" || media_type == "image/gif" || media_type == "image/bmp" ||
         media_type == "image/x-bmp" || media_type == "image/x-ms-bmp";
}

}  // namespace spamtopic::adapters
