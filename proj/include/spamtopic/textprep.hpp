#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "spamtopic/types.hpp"

namespace spamtopic::textprep {

struct StopwordList {
  Language language = Language::en;
  std::unordered_set<std::string> words;

  bool contains(const std::string& word) const { return words.count(word) != 0; }
};

/// Ordered, deduplicated tokens of one document.
///
/// Every token is lowercase, purely alphabetic for its language, at least two
/// characters long and not a stopword. Order is first occurrence.
struct TokenDoc {
  std::string id;
  Language language = Language::en;
  std::vector<std::string> tokens;
};

/// Bundled list for `en` or `es`. Throws a validation error for anything else.
const StopwordList& load_stopwords(Language language);
StopwordList load_stopwords(std::string_view tag);

/// Reads a one-word-per-line UTF-8 list (the `stopwords.<lang>.txt` format).
StopwordList load_stopwords_file(Language language, const std::filesystem::path& path);

/// Fixed pipeline: lowercase, split on every character outside the language
/// alphabet, drop tokens of length <= 1, drop stopwords, dedupe keeping the
/// first occurrence. No stemming.
TokenDoc tokenize_normalize(std::string_view text, const StopwordList& stopwords,
                            std::string id = {});

/// Alphabet membership: a-z for English, plus áéíóúüñ for Spanish.
bool is_alphabetic(char32_t cp, Language language);

}  // namespace spamtopic::textprep
