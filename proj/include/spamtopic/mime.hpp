#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spamtopic::mime {

/// Lenient base64: skips whitespace and stray characters, stops at padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string base64_encode(const std::vector<std::uint8_t>& bytes);

std::string quoted_printable_decode(std::string_view text);

/// Converts `bytes` in `charset` to UTF-8. Unknown charsets are decoded as
/// UTF-8 with replacement characters and `replaced` is set.
std::string to_utf8(std::string_view bytes, std::string_view charset, bool& replaced);

/// Resolves RFC 2047 encoded-words (`=?charset?B|Q?...?=`) in a header value.
std::string decode_header_value(std::string_view value, bool& replaced);

struct HeaderField {
  std::string name;   // lowercased
  std::string value;  // unfolded, raw
};

struct ContentType {
  std::string type = "text/plain";  // lowercased "type/subtype"
  std::string charset;
  std::string boundary;
  std::string name;
};

ContentType parse_content_type(std::string_view value);
/// Extracts `filename` from a Content-Disposition value ("" when absent).
std::string disposition_filename(std::string_view value);

}  // namespace spamtopic::mime
