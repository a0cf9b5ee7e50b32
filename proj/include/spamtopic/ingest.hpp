#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spamtopic/adapters.hpp"
#include "spamtopic/errors.hpp"
#include "spamtopic/types.hpp"

namespace spamtopic::ingest {

using adapters::AdapterConfig;

struct ImagePart {
  std::string name;
  std::vector<std::uint8_t> bytes;
  std::string media_type;
};

/// The parts of a message that can carry readable text. Every other header
/// field is discarded at parse time.
struct EmailParts {
  std::string subject;
  std::optional<std::string> plain_body;
  std::optional<std::string> html_body;
  std::vector<ImagePart> images;
  bool charset_replaced = false;
};

enum class Flag : std::uint8_t {
  salting_suspected = 1u << 0,
  ocr_unavailable = 1u << 1,
  html_source = 1u << 2,
  plain_source = 1u << 3,
  charset_replaced = 1u << 4,
};

class Flags {
 public:
  Flags() = default;
  Flags(std::initializer_list<Flag> flags) {
    for (Flag f : flags) set(f);
  }
  void set(Flag f) { bits_ |= static_cast<std::uint8_t>(f); }
  bool has(Flag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  bool empty() const { return bits_ == 0; }
  Flags& operator|=(Flags other) {
    bits_ |= other.bits_;
    return *this;
  }
  bool operator==(const Flags&) const = default;

  /// Names in a fixed order, for serialization.
  std::vector<std::string> names() const;
  static std::optional<Flag> parse(std::string_view name);

 private:
  std::uint8_t bits_ = 0;
};

struct EmailDocument {
  std::string id;
  Language language = Language::en;
  std::string subject_text;
  std::string body_text;
  std::vector<std::string> image_texts;
  std::string merged_text;
  Flags flags;
};

enum class RejectReason { mixed_language, unsupported_language, empty_text, parse_failure };
std::string_view to_string(RejectReason reason);

struct Rejection {
  std::string id;
  RejectReason reason = RejectReason::parse_failure;
  std::string detail;
};

using IngestOutcome = std::variant<EmailDocument, Rejection>;

/// Raised by parse_email when no header/body boundary exists.
class ParseFailure : public Error {
 public:
  explicit ParseFailure(const std::string& what) : Error(ErrorKind::validation, what) {}
};

EmailParts parse_email(std::span<const std::uint8_t> raw);
EmailParts parse_email(std::string_view raw);

enum class BodySource { html, plain, none };
std::string_view to_string(BodySource source);

struct BodySelection {
  BodySource source = BodySource::none;
  std::string content;
};

/// HTML wins whenever present; plain only when HTML is absent.
BodySelection select_body(const EmailParts& parts);

struct ExtractedText {
  std::string text;
  Flags flags;
};

/// Visible text of an HTML body. With both render and OCR commands configured
/// the body is rendered to PNG, converted to grayscale and OCRed. Otherwise
/// (or when either adapter fails) the markup visibility rules apply.
ExtractedText extract_visible_text(std::string_view html, const AdapterConfig& adapters);

/// OCR of one attached/inline image. Empty text plus `ocr_unavailable` when no
/// command is configured, the input is empty or not an allowed format, or the
/// command fails.
ExtractedText ocr_image(std::span<const std::uint8_t> image, const AdapterConfig& adapters);

/// Built-in stopword-ratio heuristic: the language whose stopword fraction is
/// higher wins if that fraction is >= 0.05, else unknown.
Language detect_language(std::string_view text);

/// Heuristic unless a detector command is configured, in which case the
/// command's first stdout word (en/es/anything else) is used.
Language detect_language(std::string_view text, const AdapterConfig& adapters);

/// Number of word tokens the detector sees; parts below
/// `kMinDetectableTokens` are too short to vote on the language.
std::size_t detection_token_count(std::string_view text);
inline constexpr std::size_t kMinDetectableTokens = 4;

/// Language gate and text merge. Parts with too few words to judge are
/// neutral; every other non-empty part must detect as the same language in
/// {en, es}. merged_text joins subject, body, then image texts with single
/// spaces (empty parts skipped).
IngestOutcome assemble_document(std::string id, std::string subject_text, std::string body_text,
                                std::vector<std::string> image_texts, Flags flags,
                                const AdapterConfig& adapters = {});

/// parse -> select body -> visible text -> OCR images -> assemble.
IngestOutcome ingest_message(std::string id, std::span<const std::uint8_t> raw,
                             const AdapterConfig& adapters);

}  // namespace spamtopic::ingest
