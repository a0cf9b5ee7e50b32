#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spamtopic/ingest.hpp"
#include "spamtopic/textprep.hpp"
#include "spamtopic/types.hpp"

namespace spamtopic::store {

struct DatasetRecord {
  std::string id;
  Language language = Language::en;
  std::string subject_text;
  std::string body_text;
  std::vector<std::string> image_texts;
  std::string merged_text;
  std::vector<std::string> tokens;
  std::optional<std::string> label;
  std::vector<std::string> flags;
  bool operator==(const DatasetRecord&) const = default;
};

/// Copies the document and tokenizes its merged text.
DatasetRecord make_record(const ingest::EmailDocument& doc);

textprep::TokenDoc token_doc(const DatasetRecord& record);

/// One JSON object, keys in fixed order.
std::string record_to_json(const DatasetRecord& record);
/// Throws a validation error on malformed input.
DatasetRecord record_from_json(const std::string& line);

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct DatasetReadResult {
  std::vector<DatasetRecord> records;
  std::vector<LineError> errors;
};

/// Loads every valid line; malformed lines are reported, not fatal. Throws an
/// I/O error when unreadable and a validation error when nothing is valid.
DatasetReadResult read_dataset(const std::filesystem::path& path);

/// JSONL through a temporary file renamed over the target.
void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path);

/// Writes `content` next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace spamtopic::store
