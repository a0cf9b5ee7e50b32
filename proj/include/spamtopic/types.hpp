#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace spamtopic {

enum class Language { en, es, unknown };

inline std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::en: return "en";
    case Language::es: return "es";
    case Language::unknown: break;
  }
  return "unknown";
}

inline std::optional<Language> parse_language(std::string_view tag) {
  if (tag == "en") return Language::en;
  if (tag == "es") return Language::es;
  if (tag == "unknown") return Language::unknown;
  return std::nullopt;
}

}  // namespace spamtopic
