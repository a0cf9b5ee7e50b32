#include "spamtopic/dataset.hpp"

#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include <json.hpp>

#include "spamtopic/errors.hpp"

namespace spamtopic::store {

DatasetRecord make_record(const ingest::EmailDocument& doc) {
  DatasetRecord r;
  r.id = doc.id;
  r.language = doc.language;
  r.subject_text = doc.subject_text;
  r.body_text = doc.body_text;
  r.image_texts = doc.image_texts;
  r.merged_text = doc.merged_text;
  r.tokens = textprep::tokenize_normalize(doc.merged_text, textprep::load_stopwords(doc.language), doc.id).tokens;
  r.flags = doc.flags.names();
  return r;
}

textprep::TokenDoc token_doc(const DatasetRecord& record) {
  return {record.id, record.language, record.tokens};
}

std::string record_to_json(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["language"] = to_string(r.language);
  j["subject_text"] = r.subject_text;
  j["body_text"] = r.body_text;
  j["image_texts"] = r.image_texts;
  j["merged_text"] = r.merged_text;
  j["tokens"] = r.tokens;
  j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nlohmann::ordered_json(nullptr);
  j["flags"] = r.flags;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

DatasetRecord record_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw validation_error("record is not a JSON object");
  auto text = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) throw validation_error(std::string("missing field '") + key + "'");
      return {};
    }
    if (!j[key].is_string()) throw validation_error(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  auto list = [&](const char* key) -> std::vector<std::string> {
    if (!j.contains(key) || j[key].is_null()) return {};
    const auto& v = j[key];
    if (!v.is_array()) throw validation_error(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& item : v) {
      if (!item.is_string()) throw validation_error(std::string("field '") + key + "' must hold strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  };
  DatasetRecord r;
  r.id = text("id", true);
  if (r.id.empty()) throw validation_error("field 'id' must be nonempty");
  const auto lang = parse_language(text("language", true));
  if (!lang || *lang == Language::unknown) throw validation_error("field 'language' must be en or es");
  r.language = *lang;
  r.subject_text = text("subject_text", false);
  r.body_text = text("body_text", false);
  r.image_texts = list("image_texts");
  r.merged_text = text("merged_text", false);
  if (j.contains("tokens") && !j["tokens"].is_null()) {
    r.tokens = list("tokens");
  } else {
    r.tokens = textprep::tokenize_normalize(r.merged_text, textprep::load_stopwords(r.language)).tokens;
  }
  if (j.contains("label") && !j["label"].is_null()) {
    r.label = text("label", false);
    if (r.label->empty()) throw validation_error("field 'label' must be nonempty when present");
  }
  r.flags = list("flags");
  for (const auto& f : r.flags) {
    if (!ingest::Flags::parse(f)) throw validation_error("unknown flag '" + f + "'");
  }
  return r;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw io_error("error while reading " + path.string());
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw io_error("error while writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw io_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

DatasetReadResult read_dataset(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  DatasetReadResult result;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      result.records.push_back(record_from_json(line));
    } catch (const Error& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (result.records.empty()) {
    std::string msg = "dataset " + path.string() + " has no valid records";
    if (!result.errors.empty()) {
      msg += " (line " + std::to_string(result.errors.front().line) + ": " + result.errors.front().message + ")";
    }
    throw validation_error(msg);
  }
  return result;
}

void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace spamtopic::store
