#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spamtopic::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8, substituting U+FFFD for every malformed sequence.
/// `replaced` (when non-null) is set if any substitution happened.
std::u32string decode(std::string_view bytes, bool* replaced = nullptr);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

/// Re-encodes arbitrary bytes as valid UTF-8.
std::string sanitize(std::string_view bytes, bool* replaced = nullptr);

/// Latin-1 / Windows-1252 bytes to UTF-8.
std::string from_latin1(std::string_view bytes);
std::string from_windows1252(std::string_view bytes);

/// Unicode simple lowercase mapping for Latin, Greek and Cyrillic blocks.
char32_t to_lower(char32_t cp);

/// Letter test used by tokenizers that must not split non-Latin words
/// (language detection). Covers Latin-1, Latin Extended, Greek, Cyrillic
/// and the CJK/Arabic/Hebrew blocks coarsely.
bool is_letter(char32_t cp);

}  // namespace spamtopic::utf8
