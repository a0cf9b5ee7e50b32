#include "spamtopic/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>
#include <unordered_set>

#include "spamtopic/html.hpp"
#include "spamtopic/mime.hpp"
#include "spamtopic/textprep.hpp"
#include "spamtopic/utf8.hpp"

namespace spamtopic::ingest {

namespace {

constexpr int kMaxMimeDepth = 24;

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

struct Entity {
  std::vector<mime::HeaderField> headers;
  std::string_view body;
};

const std::string* find_header(const std::vector<mime::HeaderField>& headers, std::string_view name) {
  for (const auto& h : headers) {
    if (h.name == name) return &h.value;
  }
  return nullptr;
}

bool looks_like_header_line(std::string_view line) {
  if (line.starts_with("From ")) return true;  // mbox separator
  std::size_t colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  for (std::size_t i = 0; i < colon; ++i) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (c <= 32 || c >= 127) return false;
  }
  return true;
}

// Splits header block from body. Returns false when no blank line exists.
bool split_entity(std::string_view text, Entity& entity, bool require_boundary) {
  std::size_t pos = 0;
  std::string current_name;
  std::string current_value;
  auto flush = [&] {
    if (!current_name.empty()) {
      entity.headers.push_back({lower(current_name), current_value});
    }
    current_name.clear();
    current_value.clear();
  };
  bool first = true;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      if (require_boundary) return false;
      // Part without a blank line: everything is body unless it is all headers.
      entity.headers.clear();
      entity.body = text;
      return true;
    }
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      entity.body = text.substr(eol + 1);
      return true;
    }
    if (first && !looks_like_header_line(line)) {
      if (require_boundary) return false;
      entity.headers.clear();
      entity.body = text;
      return true;
    }
    first = false;
    if (line.front() == ' ' || line.front() == '\t') {
      current_value += ' ';
      current_value += trim(line);
    } else if (line.starts_with("From ") && current_name.empty() && entity.headers.empty()) {
      // mbox "From " line: skip.
    } else {
      flush();
      std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) {
        // Garbage line inside headers; tolerate.
      } else {
        current_name = std::string(trim(line.substr(0, colon)));
        current_value = std::string(trim(line.substr(colon + 1)));
      }
    }
    pos = eol + 1;
  }
  return false;
}

std::string decode_transfer(std::string_view body, std::string_view encoding) {
  const std::string enc = lower(trim(encoding));
  if (enc == "base64") {
    auto bytes = mime::base64_decode(body);
    return std::string(bytes.begin(), bytes.end());
  }
  if (enc == "quoted-printable") return mime::quoted_printable_decode(body);
  return std::string(body);
}

std::vector<std::string_view> split_multipart(std::string_view body, const std::string& boundary) {
  std::vector<std::string_view> parts;
  const std::string delimiter = "--" + boundary;
  std::size_t pos = 0;
  std::size_t part_start = std::string_view::npos;
  while (pos <= body.size()) {
    std::size_t eol = body.find('\n', pos);
    const std::size_t line_end = (eol == std::string_view::npos) ? body.size() : eol;
    std::string_view line = body.substr(pos, line_end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.starts_with(delimiter)) {
      std::string_view rest = trim(line.substr(delimiter.size()));
      const bool closing = rest.starts_with("--");
      if (rest.empty() || closing) {
        if (part_start != std::string_view::npos) {
          // Exclude the line break that precedes the delimiter.
          std::size_t end = pos;
          if (end > part_start && body[end - 1] == '\n') --end;
          if (end > part_start && body[end - 1] == '\r') --end;
          parts.push_back(body.substr(part_start, end - part_start));
        }
        if (closing) return parts;
        part_start = (eol == std::string_view::npos) ? body.size() : eol + 1;
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  if (part_start != std::string_view::npos && part_start < body.size()) {
    parts.push_back(body.substr(part_start));  // unterminated final part
  }
  return parts;
}

void collect(const Entity& entity, int depth, EmailParts& parts, std::vector<std::string>& plain,
             std::vector<std::string>& html) {
  if (depth > kMaxMimeDepth) return;
  mime::ContentType ct;
  if (const std::string* v = find_header(entity.headers, "content-type")) ct = mime::parse_content_type(*v);
  const std::string* encoding = find_header(entity.headers, "content-transfer-encoding");
  const std::string* disposition = find_header(entity.headers, "content-disposition");
  const bool attachment = disposition && lower(*disposition).starts_with("attachment");

  if (ct.type.starts_with("multipart/")) {
    if (ct.boundary.empty()) return;
    for (std::string_view raw_part : split_multipart(entity.body, ct.boundary)) {
      Entity child;
      split_entity(raw_part, child, false);
      collect(child, depth + 1, parts, plain, html);
    }
    return;
  }
  if (ct.type == "message/rfc822") {
    std::string decoded = decode_transfer(entity.body, encoding ? *encoding : "");
    Entity nested;
    if (split_entity(decoded, nested, false)) {
      // Nested message text counts as body; its own subject is not the subject.
      std::vector<std::string> nested_plain, nested_html;
      collect(nested, depth + 1, parts, nested_plain, nested_html);
      for (auto& p : nested_plain) plain.push_back(std::move(p));
      for (auto& h : nested_html) html.push_back(std::move(h));
    }
    return;
  }
  if (ct.type.starts_with("image/")) {
    if (!adapters::is_allowed_media_type(ct.type)) return;
    std::string decoded = decode_transfer(entity.body, encoding ? *encoding : "");
    ImagePart image;
    image.media_type = ct.type == "image/jpg" || ct.type == "image/pjpeg" ? "image/jpeg" : ct.type;
    if (image.media_type == "image/x-bmp" || image.media_type == "image/x-ms-bmp") image.media_type = "image/bmp";
    image.name = disposition ? mime::disposition_filename(*disposition) : "";
    if (image.name.empty()) image.name = ct.name;
    image.bytes.assign(decoded.begin(), decoded.end());
    parts.images.push_back(std::move(image));
    return;
  }
  if ((ct.type == "text/plain" || ct.type == "text/html") && !attachment) {
    std::string decoded = decode_transfer(entity.body, encoding ? *encoding : "");
    std::string text = mime::to_utf8(decoded, ct.charset, parts.charset_replaced);
    (ct.type == "text/html" ? html : plain).push_back(std::move(text));
  }
}

std::string join_nonempty(const std::vector<std::string>& pieces, std::string_view sep) {
  std::string out;
  for (const auto& p : pieces) {
    if (p.empty()) continue;
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::vector<std::u32string> detection_tokens(std::string_view text) {
  std::vector<std::u32string> tokens;
  std::u32string current;
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_letter(cp)) {
      current.push_back(utf8::to_lower(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace

std::vector<std::string> Flags::names() const {
  std::vector<std::string> out;
  if (has(Flag::salting_suspected)) out.emplace_back("salting_suspected");
  if (has(Flag::ocr_unavailable)) out.emplace_back("ocr_unavailable");
  if (has(Flag::html_source)) out.emplace_back("html_source");
  if (has(Flag::plain_source)) out.emplace_back("plain_source");
  if (has(Flag::charset_replaced)) out.emplace_back("charset_replaced");
  return out;
}

std::optional<Flag> Flags::parse(std::string_view name) {
  if (name == "salting_suspected") return Flag::salting_suspected;
  if (name == "ocr_unavailable") return Flag::ocr_unavailable;
  if (name == "html_source") return Flag::html_source;
  if (name == "plain_source") return Flag::plain_source;
  if (name == "charset_replaced") return Flag::charset_replaced;
  return std::nullopt;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::mixed_language: return "mixed_language";
    case RejectReason::unsupported_language: return "unsupported_language";
    case RejectReason::empty_text: return "empty_text";
    case RejectReason::parse_failure: return "parse_failure";
  }
  return "parse_failure";
}

std::string_view to_string(BodySource source) {
  switch (source) {
    case BodySource::html: return "html";
    case BodySource::plain: return "plain";
    case BodySource::none: return "none";
  }
  return "none";
}

EmailParts parse_email(std::string_view raw) {
  Entity root;
  if (!split_entity(raw, root, true)) {
    throw ParseFailure("no header/body boundary found");
  }
  if (root.headers.empty()) throw ParseFailure("message has no header fields");

  EmailParts parts;
  if (const std::string* subject = find_header(root.headers, "subject")) {
    parts.subject = mime::decode_header_value(*subject, parts.charset_replaced);
  }
  std::vector<std::string> plain, html;
  collect(root, 0, parts, plain, html);
  if (!plain.empty()) parts.plain_body = join_nonempty(plain, "\n");
  if (!html.empty()) parts.html_body = join_nonempty(html, "\n");
  if (parts.subject.empty() && !parts.plain_body && !parts.html_body && parts.images.empty()) {
    throw ParseFailure("message carries no subject, text body or image");
  }
  return parts;
}

EmailParts parse_email(std::span<const std::uint8_t> raw) {
  return parse_email(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

BodySelection select_body(const EmailParts& parts) {
  if (parts.html_body) return {BodySource::html, *parts.html_body};
  if (parts.plain_body) return {BodySource::plain, *parts.plain_body};
  return {BodySource::none, ""};
}

ExtractedText extract_visible_text(std::string_view markup, const AdapterConfig& adapters) {
  ExtractedText result;
  const html::VisibleText visible = html::extract_visible(markup);
  if (visible.hidden_chars > 0) result.flags.set(Flag::salting_suspected);

  if (adapters.render_command && adapters.ocr_command) {
    try {
      adapters::TempDir tmp;
      const auto input = tmp.write("body.html", markup);
      const auto rendered = tmp.path() / "render.png";
      const auto gray_path = tmp.path() / "render-gray.png";
      auto render = adapters::run_command(
          adapters::expand_template(*adapters.render_command,
                                    {{"input", input.string()}, {"output", rendered.string()}}),
          adapters.timeout_secs);
      if (render.ok() && std::filesystem::exists(rendered)) {
        adapters::write_gray_png(adapters::png_to_gray(rendered), gray_path);
        auto ocr = adapters::run_command(
            adapters::expand_template(*adapters.ocr_command, {{"input", gray_path.string()}}),
            adapters.timeout_secs);
        if (ocr.ok()) {
          result.text = std::string(trim(utf8::sanitize(ocr.output)));
          return result;
        }
      }
    } catch (const Error&) {
      // Undecodable render output or temp-file trouble: degrade below.
    }
    result.flags.set(Flag::ocr_unavailable);
  }
  result.text = visible.text;
  return result;
}

ExtractedText ocr_image(std::span<const std::uint8_t> image, const AdapterConfig& adapters) {
  ExtractedText result;
  const auto format = adapters::sniff_image(image);
  if (!adapters.ocr_command || image.empty() || format == adapters::ImageFormat::unknown) {
    result.flags.set(Flag::ocr_unavailable);
    return result;
  }
  try {
    adapters::TempDir tmp;
    static constexpr const char* kExt[] = {"png", "jpg", "gif", "bmp", "bin"};
    const auto path = tmp.write(std::string("image.") + kExt[static_cast<int>(format)], image);
    auto run = adapters::run_command(adapters::expand_template(*adapters.ocr_command, {{"input", path.string()}}),
                                     adapters.timeout_secs);
    if (run.ok()) {
      result.text = std::string(trim(utf8::sanitize(run.output)));
      return result;
    }
  } catch (const Error&) {
  }
  result.flags.set(Flag::ocr_unavailable);
  return result;
}

std::size_t detection_token_count(std::string_view text) { return detection_tokens(text).size(); }

namespace {

// Function words of nearby languages that are not English or Spanish
// stopwords. Text that scores higher on one of these is not en/es.
const std::vector<std::unordered_set<std::string>>& rival_function_words() {
  static const std::vector<std::unordered_set<std::string>> lists = {
      // fr
      {"le", "les", "et", "est", "je", "vous", "nous", "avec", "pour", "dans", "une", "des", "du", "au", "aux", "pas",
       "sur", "qui", "ce", "il", "elle", "sont", "très", "mais", "ou", "où", "son", "sa", "ses", "leur", "cette",
       "être", "avoir", "été", "ne", "plus", "tout", "mon", "ma", "mes", "ton", "votre", "vos", "notre", "nos"},
      // pt
      {"não", "você", "uma", "os", "em", "um", "é", "ao", "às", "das", "dos", "na", "no", "nas", "nos", "pela",
       "pelo", "isso", "esta", "este", "muito", "também", "ou", "são", "seu", "sua", "foi", "ser", "tem", "já"},
      // it
      {"il", "di", "che", "è", "per", "una", "sono", "non", "gli", "della", "del", "alla", "anche", "questo",
       "questa", "ma", "come", "più", "essere", "ha", "nel", "nella", "tutto", "molto", "mio", "suo", "loro"},
      // de
      {"der", "die", "und", "das", "ist", "nicht", "ich", "sie", "es", "mit", "den", "ein", "eine", "auf", "für",
       "von", "zu", "dem", "sich", "auch", "wir", "ihr", "werden", "sind", "wie", "bei", "oder", "aber", "noch"},
  };
  return lists;
}

}  // namespace

Language detect_language(std::string_view text) {
  const auto tokens = detection_tokens(text);
  if (tokens.empty()) return Language::unknown;
  const auto& en = textprep::load_stopwords(Language::en);
  const auto& es = textprep::load_stopwords(Language::es);
  const auto& rivals = rival_function_words();
  std::size_t en_hits = 0;
  std::size_t es_hits = 0;
  std::vector<std::size_t> rival_hits(rivals.size(), 0);
  for (const auto& token : tokens) {
    const std::string word = utf8::encode(token);
    en_hits += en.contains(word) ? 1 : 0;
    es_hits += es.contains(word) ? 1 : 0;
    for (std::size_t r = 0; r < rivals.size(); ++r) rival_hits[r] += rivals[r].count(word);
  }
  const std::size_t best_rival = *std::max_element(rival_hits.begin(), rival_hits.end());
  const double en_frac = static_cast<double>(en_hits) / static_cast<double>(tokens.size());
  const double es_frac = static_cast<double>(es_hits) / static_cast<double>(tokens.size());
  constexpr double kMinFraction = 0.05;
  if (en_frac > es_frac && en_frac >= kMinFraction && en_hits > best_rival) return Language::en;
  if (es_frac > en_frac && es_frac >= kMinFraction && es_hits > best_rival) return Language::es;
  return Language::unknown;
}

Language detect_language(std::string_view text, const AdapterConfig& adapters) {
  if (!adapters.language_command) return detect_language(text);
  try {
    adapters::TempDir tmp;
    const auto path = tmp.write("text.txt", text);
    auto run = adapters::run_command(
        adapters::expand_template(*adapters.language_command, {{"input", path.string()}}), adapters.timeout_secs);
    if (run.ok()) {
      std::string_view out = trim(run.output);
      out = out.substr(0, out.find_first_of(" \t\r\n"));
      const std::string tag = lower(out);
      if (tag == "en") return Language::en;
      if (tag == "es") return Language::es;
      return Language::unknown;
    }
  } catch (const Error&) {
  }
  // Detector failure degrades to the built-in heuristic.
  return detect_language(text);
}

IngestOutcome assemble_document(std::string id, std::string subject_text, std::string body_text,
                                std::vector<std::string> image_texts, Flags flags, const AdapterConfig& adapters) {
  std::vector<std::string> pieces;
  pieces.push_back(subject_text);
  pieces.push_back(body_text);
  for (const auto& t : image_texts) pieces.push_back(t);
  std::string merged = join_nonempty(pieces, " ");

  if (detection_token_count(merged) == 0) {
    return Rejection{std::move(id), RejectReason::empty_text, "no word tokens survive extraction"};
  }

  std::set<Language> votes;
  for (const auto& piece : pieces) {
    if (detection_token_count(piece) < kMinDetectableTokens) continue;
    votes.insert(detect_language(piece, adapters));
  }
  if (votes.empty()) votes.insert(detect_language(merged, adapters));

  if (votes.size() > 1) {
    std::string detail = "parts disagree:";
    for (Language l : votes) detail += " " + std::string(to_string(l));
    return Rejection{std::move(id), RejectReason::mixed_language, detail};
  }
  const Language language = *votes.begin();
  if (language == Language::unknown) {
    return Rejection{std::move(id), RejectReason::unsupported_language, "language is neither en nor es"};
  }

  EmailDocument doc;
  doc.id = std::move(id);
  doc.language = language;
  doc.subject_text = std::move(subject_text);
  doc.body_text = std::move(body_text);
  doc.image_texts = std::move(image_texts);
  doc.merged_text = std::move(merged);
  doc.flags = flags;
  return doc;
}

IngestOutcome ingest_message(std::string id, std::span<const std::uint8_t> raw, const AdapterConfig& adapters) {
  EmailParts parts;
  try {
    parts = parse_email(raw);
  } catch (const ParseFailure& e) {
    return Rejection{std::move(id), RejectReason::parse_failure, e.what()};
  }
  Flags flags;
  if (parts.charset_replaced) flags.set(Flag::charset_replaced);

  std::string body;
  const BodySelection selection = select_body(parts);
  if (selection.source == BodySource::html) {
    flags.set(Flag::html_source);
    ExtractedText visible = extract_visible_text(selection.content, adapters);
    flags |= visible.flags;
    body = std::move(visible.text);
  } else if (selection.source == BodySource::plain) {
    flags.set(Flag::plain_source);
    body = std::string(trim(selection.content));
  }

  std::vector<std::string> image_texts;
  for (const auto& image : parts.images) {
    ExtractedText ocr = ocr_image(image.bytes, adapters);
    flags |= ocr.flags;
    image_texts.push_back(std::move(ocr.text));
  }
  return assemble_document(std::move(id), parts.subject, std::move(body), std::move(image_texts), flags, adapters);
}

}  // namespace spamtopic::ingest
