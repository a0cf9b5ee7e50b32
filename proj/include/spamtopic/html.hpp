#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace spamtopic::html {

using Rgb = std::array<int, 3>;

/// Text a reader would see, plus how much was suppressed by visibility rules.
struct VisibleText {
  std::string text;
  /// Non-whitespace characters removed because the markup hid them
  /// (display/visibility, tiny font, text colored like its background).
  /// Script, style and head content is never rendered and is not counted.
  std::size_t hidden_chars = 0;
};

/// Forgiving markup walk applying the hidden-text rules:
///  - script, style, head content dropped;
///  - display:none, visibility:hidden and the `hidden` attribute hide subtrees;
///  - effective font-size <= 1px hides text;
///  - text color within Euclidean RGB distance 16 of the nearest enclosing
///    declared background (white when none) hides text.
/// Inline `style`, legacy `color`/`bgcolor`/`size` attributes and simple
/// `<style>` rules (tag, .class, #id, tag.class) are honored.
VisibleText extract_visible(std::string_view markup);

/// Every text node of the markup, tags removed and entities decoded.
/// No visibility analysis; used as the reference the visible text must be a
/// subset of.
std::string extract_naive(std::string_view markup);

std::optional<Rgb> parse_color(std::string_view value);
/// Font size in px relative to `parent_px`. nullopt for unparseable values.
std::optional<double> parse_font_size(std::string_view value, double parent_px);
double color_distance(const Rgb& a, const Rgb& b);

/// Decodes named and numeric character references.
std::string decode_entities(std::string_view text);

}  // namespace spamtopic::html
