#include "spamtopic/mime.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "spamtopic/utf8.hpp"

namespace spamtopic::mime {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Splits a structured header value on ';' outside quotes.
std::vector<std::string_view> split_params(std::string_view value) {
  std::vector<std::string_view> out;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '"') quoted = !quoted;
    if (value[i] == ';' && !quoted) {
      out.push_back(trim(value.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(value.substr(start)));
  return out;
}

std::string param_value(std::string_view raw) {
  raw = trim(raw);
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) ++i;
      out.push_back(raw[i]);
    }
    return out;
  }
  return std::string(raw);
}

// RFC 2231 extended value: charset'lang'percent-encoded.
std::string decode_rfc2231(std::string_view raw) {
  std::size_t q1 = raw.find('\'');
  std::size_t q2 = (q1 == std::string_view::npos) ? q1 : raw.find('\'', q1 + 1);
  std::string_view charset = q1 == std::string_view::npos ? "" : raw.substr(0, q1);
  std::string_view data = q2 == std::string_view::npos ? raw : raw.substr(q2 + 1);
  std::string bytes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] == '%' && i + 2 < data.size() + 0 && hex_value(data[i + 1]) >= 0 && hex_value(data[i + 2]) >= 0) {
      bytes.push_back(static_cast<char>(hex_value(data[i + 1]) * 16 + hex_value(data[i + 2])));
      i += 2;
    } else {
      bytes.push_back(data[i]);
    }
  }
  bool replaced = false;
  return to_utf8(bytes, charset.empty() ? "utf-8" : charset, replaced);
}

std::string find_param(const std::vector<std::string_view>& params, std::string_view key) {
  std::string extended;
  for (std::size_t i = 1; i < params.size(); ++i) {
    std::size_t eq = params[i].find('=');
    if (eq == std::string_view::npos) continue;
    std::string k = lower(trim(params[i].substr(0, eq)));
    std::string_view v = params[i].substr(eq + 1);
    if (k == key) return param_value(v);
    if (k == std::string(key) + "*") return decode_rfc2231(param_value(v));
    if (k.starts_with(std::string(key) + "*") && k.size() > key.size() + 1) {
      // Continuations: name*0, name*1*, ... concatenated in order of appearance.
      extended += param_value(v);
    }
  }
  if (!extended.empty()) {
    return extended.find('\'') != std::string::npos ? decode_rfc2231(extended) : extended;
  }
  return {};
}

}  // namespace

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(alphabet[i])] = i;
    t[static_cast<unsigned char>('-')] = 62;  // URL-safe variant
    t[static_cast<unsigned char>('_')] = 63;
    return t;
  }();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t buffer = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) continue;
    buffer = (buffer << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? alphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string quoted_printable_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '=') {
      out.push_back(c);
      continue;
    }
    // Soft line break.
    if (i + 1 < text.size() && text[i + 1] == '\n') {
      i += 1;
      continue;
    }
    if (i + 2 < text.size() && text[i + 1] == '\r' && text[i + 2] == '\n') {
      i += 2;
      continue;
    }
    if (i + 2 < text.size() + 0 && hex_value(text[i + 1]) >= 0 && hex_value(text[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex_value(text[i + 1]) * 16 + hex_value(text[i + 2])));
      i += 2;
      continue;
    }
    out.push_back(c);
  }
  return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset, bool& replaced) {
  std::string cs = lower(trim(charset));
  if (cs.size() >= 2 && cs.front() == '"' && cs.back() == '"') cs = cs.substr(1, cs.size() - 2);
  bool bad = false;
  if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii" ||
      cs == "ansi_x3.4-1968") {
    std::string out = utf8::sanitize(bytes, &bad);
    if (bad) replaced = true;
    return out;
  }
  if (cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1" || cs == "iso8859-1" ||
      cs == "iso-8859-15" || cs == "l1") {
    return utf8::from_latin1(bytes);
  }
  if (cs == "windows-1252" || cs == "cp1252" || cs == "x-cp1252") {
    return utf8::from_windows1252(bytes);
  }
  std::string out = utf8::sanitize(bytes, &bad);
  replaced = true;
  return out;
}

std::string decode_header_value(std::string_view value, bool& replaced) {
  std::string out;
  std::size_t i = 0;
  bool last_was_word = false;
  std::string pending_ws;
  while (i < value.size()) {
    if (value.compare(i, 2, "=?") == 0) {
      std::size_t q1 = value.find('?', i + 2);
      std::size_t q2 = q1 == std::string_view::npos ? q1 : value.find('?', q1 + 1);
      std::size_t end = q2 == std::string_view::npos ? q2 : value.find("?=", q2 + 1);
      if (end != std::string_view::npos && q2 == q1 + 2) {
        std::string_view charset = value.substr(i + 2, q1 - i - 2);
        if (auto star = charset.find('*'); star != std::string_view::npos) charset = charset.substr(0, star);
        const char enc = static_cast<char>(std::toupper(static_cast<unsigned char>(value[q1 + 1])));
        std::string_view payload = value.substr(q2 + 1, end - q2 - 1);
        std::string bytes;
        if (enc == 'B') {
          auto raw = base64_decode(payload);
          bytes.assign(raw.begin(), raw.end());
        } else if (enc == 'Q') {
          std::string tmp(payload);
          std::replace(tmp.begin(), tmp.end(), '_', ' ');
          bytes = quoted_printable_decode(tmp);
        } else {
          bytes = std::string(payload);
        }
        // Whitespace between adjacent encoded-words is dropped.
        if (!last_was_word) out += pending_ws;
        pending_ws.clear();
        out += to_utf8(bytes, charset, replaced);
        last_was_word = true;
        i = end + 2;
        continue;
      }
    }
    const char c = value[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      pending_ws.push_back(c == '\t' ? ' ' : (c == '\r' || c == '\n') ? ' ' : c);
      ++i;
      continue;
    }
    out += pending_ws;
    pending_ws.clear();
    std::size_t j = i;
    while (j < value.size() && value[j] != ' ' && value[j] != '\t' && value.compare(j, 2, "=?") != 0) ++j;
    if (j == i) j = i + 1;
    bool bad = false;
    out += utf8::sanitize(value.substr(i, j - i), &bad);
    if (bad) replaced = true;
    last_was_word = false;
    i = j;
  }
  out += pending_ws;
  std::string_view t = trim(out);
  return std::string(t);
}

ContentType parse_content_type(std::string_view value) {
  ContentType ct;
  auto params = split_params(value);
  if (!params.empty() && !params[0].empty()) {
    std::string type = lower(params[0]);
    if (type.find('/') != std::string::npos) ct.type = type;
  }
  ct.charset = lower(find_param(params, "charset"));
  ct.boundary = find_param(params, "boundary");
  ct.name = find_param(params, "name");
  return ct;
}

std::string disposition_filename(std::string_view value) {
  return find_param(split_params(value), "filename");
}

}  // namespace spamtopic::mime
