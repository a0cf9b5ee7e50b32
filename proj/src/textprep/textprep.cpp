#include "spamtopic/textprep.hpp"

#include <fstream>
#include <sstream>

#include "spamtopic/errors.hpp"
#include "spamtopic/utf8.hpp"

namespace spamtopic::textprep {

namespace detail {
extern const std::string_view kStopwordsEn;
extern const std::string_view kStopwordsEs;
}  // namespace detail

namespace {

StopwordList parse_list(Language language, std::string_view text) {
  StopwordList list;
  list.language = language;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (!line.empty()) {
      std::string word;
      for (char32_t cp : utf8::decode(line)) utf8::append(word, utf8::to_lower(cp));
      list.words.insert(std::move(word));
    }
    start = end + 1;
  }
  if (list.words.empty()) {
    throw validation_error("stopword list for '" + std::string(to_string(language)) + "' is empty");
  }
  return list;
}

}  // namespace

const StopwordList& load_stopwords(Language language) {
  static const StopwordList en = parse_list(Language::en, detail::kStopwordsEn);
  static const StopwordList es = parse_list(Language::es, detail::kStopwordsEs);
  switch (language) {
    case Language::en: return en;
    case Language::es: return es;
    case Language::unknown: break;
  }
  throw validation_error("no stopword list for language 'unknown'");
}

StopwordList load_stopwords(std::string_view tag) {
  auto lang = parse_language(tag);
  if (!lang || *lang == Language::unknown) {
    throw validation_error("unsupported language '" + std::string(tag) + "' (expected en or es)");
  }
  return load_stopwords(*lang);
}

StopwordList load_stopwords_file(Language language, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read stopword list " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_list(language, buffer.str());
}

bool is_alphabetic(char32_t cp, Language language) {
  if (cp >= 'a' && cp <= 'z') return true;
  if (language != Language::es) return false;
  switch (cp) {
    case U'á': case U'é': case U'í': case U'ó': case U'ú': case U'ü': case U'ñ':
      return true;
    default:
      return false;
  }
}

TokenDoc tokenize_normalize(std::string_view text, const StopwordList& stopwords, std::string id) {
  TokenDoc doc;
  doc.id = std::move(id);
  doc.language = stopwords.language;

  std::unordered_set<std::string> seen;
  std::u32string current;
  auto flush = [&] {
    if (current.size() > 1) {
      std::string token = utf8::encode(current);
      if (!stopwords.contains(token) && seen.insert(token).second) {
        doc.tokens.push_back(std::move(token));
      }
    }
    current.clear();
  };

  for (char32_t cp : utf8::decode(text)) {
    const char32_t lower = utf8::to_lower(cp);
    if (is_alphabetic(lower, doc.language)) {
      current.push_back(lower);
    } else {
      flush();
    }
  }
  flush();
  return doc;
}

}  // namespace spamtopic::textprep
