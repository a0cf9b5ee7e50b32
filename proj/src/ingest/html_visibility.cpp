#include "spamtopic/html.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>
#include <vector>

#include "spamtopic/utf8.hpp"

namespace spamtopic::html {

namespace {

constexpr double kDefaultFontPx = 16.0;
constexpr double kHiddenFontPx = 1.0;
constexpr double kHiddenColorDistance = 16.0;
constexpr Rgb kWhite = {255, 255, 255};
constexpr Rgb kBlack = {0, 0, 0};

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

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

const std::unordered_map<std::string_view, char32_t>& entity_table() {
  static const std::unordered_map<std::string_view, char32_t> table = {
      {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},
      {"apos", '\''},     {"nbsp", 0xA0},     {"copy", 0xA9},     {"reg", 0xAE},
      {"trade", 0x2122},  {"euro", 0x20AC},   {"pound", 0xA3},    {"yen", 0xA5},
      {"cent", 0xA2},     {"sect", 0xA7},     {"deg", 0xB0},      {"plusmn", 0xB1},
      {"middot", 0xB7},   {"laquo", 0xAB},    {"raquo", 0xBB},    {"iexcl", 0xA1},
      {"iquest", 0xBF},   {"ndash", 0x2013},  {"mdash", 0x2014},  {"lsquo", 0x2018},
      {"rsquo", 0x2019},  {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"bull", 0x2022},
      {"hellip", 0x2026}, {"zwnj", 0x200C},   {"zwj", 0x200D},    {"shy", 0xAD},
      {"times", 0xD7},    {"divide", 0xF7},   {"ordf", 0xAA},     {"ordm", 0xBA},
      {"Agrave", 0xC0},   {"Aacute", 0xC1},   {"Acirc", 0xC2},    {"Atilde", 0xC3},
      {"Auml", 0xC4},     {"Aring", 0xC5},    {"AElig", 0xC6},    {"Ccedil", 0xC7},
      {"Egrave", 0xC8},   {"Eacute", 0xC9},   {"Ecirc", 0xCA},    {"Euml", 0xCB},
      {"Igrave", 0xCC},   {"Iacute", 0xCD},   {"Icirc", 0xCE},    {"Iuml", 0xCF},
      {"Ntilde", 0xD1},   {"Ograve", 0xD2},   {"Oacute", 0xD3},   {"Ocirc", 0xD4},
      {"Otilde", 0xD5},   {"Ouml", 0xD6},     {"Oslash", 0xD8},   {"Ugrave", 0xD9},
      {"Uacute", 0xDA},   {"Ucirc", 0xDB},    {"Uuml", 0xDC},     {"Yacute", 0xDD},
      {"szlig", 0xDF},    {"agrave", 0xE0},   {"aacute", 0xE1},   {"acirc", 0xE2},
      {"atilde", 0xE3},   {"auml", 0xE4},     {"aring", 0xE5},    {"aelig", 0xE6},
      {"ccedil", 0xE7},   {"egrave", 0xE8},   {"eacute", 0xE9},   {"ecirc", 0xEA},
      {"euml", 0xEB},     {"igrave", 0xEC},   {"iacute", 0xED},   {"icirc", 0xEE},
      {"iuml", 0xEF},     {"ntilde", 0xF1},   {"ograve", 0xF2},   {"oacute", 0xF3},
      {"ocirc", 0xF4},    {"otilde", 0xF5},   {"ouml", 0xF6},     {"oslash", 0xF8},
      {"ugrave", 0xF9},   {"uacute", 0xFA},   {"ucirc", 0xFB},    {"uuml", 0xFC},
      {"yacute", 0xFD},   {"yuml", 0xFF},
  };
  return table;
}

const std::unordered_map<std::string_view, Rgb>& named_colors() {
  static const std::unordered_map<std::string_view, Rgb> table = {
      {"black", {0, 0, 0}},          {"white", {255, 255, 255}},    {"red", {255, 0, 0}},
      {"lime", {0, 255, 0}},         {"blue", {0, 0, 255}},         {"yellow", {255, 255, 0}},
      {"cyan", {0, 255, 255}},       {"aqua", {0, 255, 255}},       {"magenta", {255, 0, 255}},
      {"fuchsia", {255, 0, 255}},    {"silver", {192, 192, 192}},   {"gray", {128, 128, 128}},
      {"grey", {128, 128, 128}},     {"maroon", {128, 0, 0}},       {"olive", {128, 128, 0}},
      {"green", {0, 128, 0}},        {"purple", {128, 0, 128}},     {"teal", {0, 128, 128}},
      {"navy", {0, 0, 128}},         {"orange", {255, 165, 0}},     {"pink", {255, 192, 203}},
      {"brown", {165, 42, 42}},      {"gold", {255, 215, 0}},       {"beige", {245, 245, 220}},
      {"ivory", {255, 255, 240}},    {"snow", {255, 250, 250}},     {"whitesmoke", {245, 245, 245}},
      {"ghostwhite", {248, 248, 255}}, {"floralwhite", {255, 250, 240}}, {"azure", {240, 255, 255}},
      {"mintcream", {245, 255, 250}}, {"honeydew", {240, 255, 240}}, {"aliceblue", {240, 248, 255}},
      {"seashell", {255, 245, 238}}, {"linen", {250, 240, 230}},    {"lightgray", {211, 211, 211}},
      {"lightgrey", {211, 211, 211}}, {"gainsboro", {220, 220, 220}}, {"darkgray", {169, 169, 169}},
      {"darkgrey", {169, 169, 169}}, {"dimgray", {105, 105, 105}},  {"dimgrey", {105, 105, 105}},
      {"darkblue", {0, 0, 139}},     {"darkred", {139, 0, 0}},      {"darkgreen", {0, 100, 0}},
      {"lightyellow", {255, 255, 224}}, {"lightblue", {173, 216, 230}}, {"orangered", {255, 69, 0}},
  };
  return table;
}

bool parse_hex_component(std::string_view s, int& out) {
  int v = 0;
  for (char c : s) {
    v *= 16;
    if (c >= '0' && c <= '9') v += c - '0';
    else if (c >= 'a' && c <= 'f') v += c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v += c - 'A' + 10;
    else return false;
  }
  out = v;
  return true;
}

// ---------------------------------------------------------------------------
// Computed style carried down the element stack.

struct Style {
  bool display_none = false;
  bool visibility_hidden = false;
  bool transparent_text = false;
  double font_px = kDefaultFontPx;
  Rgb color = kBlack;
  Rgb background = kWhite;
};

struct Declarations {
  std::vector<std::pair<std::string, std::string>> items;
};

Declarations parse_declarations(std::string_view css) {
  Declarations decls;
  std::size_t pos = 0;
  while (pos < css.size()) {
    std::size_t end = css.find(';', pos);
    if (end == std::string_view::npos) end = css.size();
    std::string_view item = css.substr(pos, end - pos);
    std::size_t colon = item.find(':');
    if (colon != std::string_view::npos) {
      std::string key = lower(trim(item.substr(0, colon)));
      std::string value = lower(trim(item.substr(colon + 1)));
      if (auto bang = value.find("!important"); bang != std::string::npos) {
        value = std::string(trim(std::string_view(value).substr(0, bang)));
      }
      if (!key.empty()) decls.items.emplace_back(std::move(key), std::move(value));
    }
    pos = end + 1;
  }
  return decls;
}

void apply_declarations(const Declarations& decls, Style& style, double parent_px) {
  for (const auto& [key, value] : decls.items) {
    if (key == "display") {
      if (value == "none") style.display_none = true;
    } else if (key == "visibility") {
      if (value == "hidden" || value == "collapse") style.visibility_hidden = true;
      else if (value == "visible") style.visibility_hidden = false;
    } else if (key == "font-size") {
      if (auto px = parse_font_size(value, parent_px)) style.font_px = *px;
    } else if (key == "font") {
      // Shorthand: the size is the first token starting with a digit,
      // optionally followed by "/line-height".
      std::size_t p = 0;
      while (p < value.size()) {
        while (p < value.size() && value[p] == ' ') ++p;
        std::size_t q = value.find(' ', p);
        if (q == std::string::npos) q = value.size();
        std::string_view tok = std::string_view(value).substr(p, q - p);
        if (!tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '.')) {
          tok = tok.substr(0, tok.find('/'));
          if (auto px = parse_font_size(tok, parent_px)) style.font_px = *px;
          break;
        }
        p = q;
      }
    } else if (key == "color") {
      if (value == "transparent") {
        style.transparent_text = true;
      } else if (auto rgb = parse_color(value)) {
        style.color = *rgb;
        style.transparent_text = false;
      }
    } else if (key == "background-color") {
      if (auto rgb = parse_color(value)) style.background = *rgb;
    } else if (key == "background") {
      std::size_t p = 0;
      while (p < value.size()) {
        while (p < value.size() && value[p] == ' ') ++p;
        std::size_t q = p;
        int depth = 0;
        while (q < value.size() && (depth > 0 || value[q] != ' ')) {
          if (value[q] == '(') ++depth;
          if (value[q] == ')') --depth;
          ++q;
        }
        if (auto rgb = parse_color(std::string_view(value).substr(p, q - p))) {
          style.background = *rgb;
          break;
        }
        p = q;
      }
    }
  }
}

// Simple stylesheet: tag, .class, #id and tag.class selectors only.
struct StyleSheet {
  struct Rule {
    std::string tag;
    std::string cls;
    std::string id;
    Declarations decls;
    int specificity = 0;
    std::size_t order = 0;
  };
  std::vector<Rule> rules;

  void parse(std::string_view css) {
    // Strip comments.
    std::string text;
    for (std::size_t i = 0; i < css.size();) {
      if (css.compare(i, 2, "/*") == 0) {
        std::size_t end = css.find("*/", i + 2);
        i = (end == std::string_view::npos) ? css.size() : end + 2;
      } else {
        text.push_back(css[i++]);
      }
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t open = text.find('{', pos);
      if (open == std::string::npos) break;
      std::size_t close = text.find('}', open);
      if (close == std::string::npos) close = text.size();
      std::string_view selectors = std::string_view(text).substr(pos, open - pos);
      std::string_view body = std::string_view(text).substr(open + 1, close - open - 1);
      if (trim(selectors).starts_with("@")) {
        // Skip at-rules (media queries nest blocks; skip to the matching brace).
        std::size_t depth = 1;
        std::size_t i = open + 1;
        while (i < text.size() && depth > 0) {
          if (text[i] == '{') ++depth;
          if (text[i] == '}') --depth;
          ++i;
        }
        pos = i;
        continue;
      }
      Declarations decls = parse_declarations(body);
      std::size_t s = 0;
      while (s <= selectors.size()) {
        std::size_t comma = selectors.find(',', s);
        if (comma == std::string_view::npos) comma = selectors.size();
        add_rule(trim(selectors.substr(s, comma - s)), decls);
        s = comma + 1;
      }
      pos = close + 1;
    }
  }

  void add_rule(std::string_view selector, const Declarations& decls) {
    if (selector.empty()) return;
    for (char c : selector) {
      if (is_space(c) || c == '>' || c == '+' || c == '~' || c == ':' || c == '[' || c == '*') return;
    }
    Rule rule;
    rule.decls = decls;
    std::string sel = lower(selector);
    std::size_t hash = sel.find('#');
    std::size_t dot = sel.find('.');
    std::size_t first = std::min(hash, dot);
    rule.tag = sel.substr(0, first == std::string::npos ? sel.size() : first);
    if (hash != std::string::npos) {
      std::size_t end = sel.find('.', hash);
      rule.id = sel.substr(hash + 1, (end == std::string::npos ? sel.size() : end) - hash - 1);
    }
    if (dot != std::string::npos) {
      std::size_t end = sel.find('#', dot);
      rule.cls = sel.substr(dot + 1, (end == std::string::npos ? sel.size() : end) - dot - 1);
      if (rule.cls.find('.') != std::string::npos) return;  // compound classes unsupported
    }
    rule.specificity = (rule.id.empty() ? 0 : 100) + (rule.cls.empty() ? 0 : 10) + (rule.tag.empty() ? 0 : 1);
    rule.order = rules.size();
    rules.push_back(std::move(rule));
  }

  std::vector<const Rule*> matching(const std::string& tag, const std::vector<std::string>& classes,
                                    const std::string& id) const {
    std::vector<const Rule*> out;
    for (const auto& rule : rules) {
      if (!rule.tag.empty() && rule.tag != tag) continue;
      if (!rule.id.empty() && rule.id != id) continue;
      if (!rule.cls.empty() && std::find(classes.begin(), classes.end(), rule.cls) == classes.end()) continue;
      out.push_back(&rule);
    }
    std::stable_sort(out.begin(), out.end(), [](const Rule* a, const Rule* b) {
      return a->specificity < b->specificity;
    });
    return out;
  }
};

// ---------------------------------------------------------------------------
// Tokenizer.

struct Tag {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  bool closing = false;
  bool self_closing = false;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

bool is_void_element(std::string_view name) {
  static constexpr std::string_view kVoid[] = {"area", "base", "br", "col", "embed", "hr", "img",
                                               "input", "link", "meta", "param", "source", "track",
                                               "wbr", "basefont", "frame", "keygen"};
  return std::find(std::begin(kVoid), std::end(kVoid), name) != std::end(kVoid);
}

bool is_block_element(std::string_view name) {
  static constexpr std::string_view kBlock[] = {
      "p",     "div",   "br",    "li",      "ul",      "ol",     "tr",     "td",    "th",
      "table", "tbody", "thead", "tfoot",   "h1",      "h2",     "h3",     "h4",    "h5",
      "h6",    "hr",    "pre",   "blockquote", "section", "article", "header", "footer", "center",
      "dl",    "dt",    "dd",    "form",    "address", "title",  "body",   "html",  "caption",
      "nav",   "aside", "main",  "figure",  "figcaption"};
  return std::find(std::begin(kBlock), std::end(kBlock), name) != std::end(kBlock);
}

bool is_raw_text_element(std::string_view name) {
  return name == "script" || name == "style" || name == "textarea" || name == "title" ||
         name == "xmp" || name == "noembed" || name == "noframes";
}

// Parses a tag starting at markup[pos] == '<'. Returns false when this '<'
// does not open a tag (treated as text).
bool parse_tag(std::string_view markup, std::size_t& pos, Tag& tag) {
  std::size_t i = pos + 1;
  const std::size_t n = markup.size();
  tag = Tag{};
  if (i < n && markup[i] == '/') {
    tag.closing = true;
    ++i;
  }
  if (i >= n || !std::isalpha(static_cast<unsigned char>(markup[i]))) return false;
  std::size_t name_start = i;
  while (i < n && !is_space(markup[i]) && markup[i] != '>' && markup[i] != '/') ++i;
  tag.name = lower(markup.substr(name_start, i - name_start));
  while (i < n && markup[i] != '>') {
    if (is_space(markup[i])) {
      ++i;
      continue;
    }
    if (markup[i] == '/') {
      tag.self_closing = true;
      ++i;
      continue;
    }
    std::size_t key_start = i;
    while (i < n && !is_space(markup[i]) && markup[i] != '=' && markup[i] != '>' && markup[i] != '/') ++i;
    std::string key = lower(markup.substr(key_start, i - key_start));
    while (i < n && is_space(markup[i])) ++i;
    std::string value;
    if (i < n && markup[i] == '=') {
      ++i;
      while (i < n && is_space(markup[i])) ++i;
      if (i < n && (markup[i] == '"' || markup[i] == '\'')) {
        const char quote = markup[i++];
        std::size_t vstart = i;
        while (i < n && markup[i] != quote) ++i;
        value = decode_entities(markup.substr(vstart, i - vstart));
        if (i < n) ++i;
      } else {
        std::size_t vstart = i;
        while (i < n && !is_space(markup[i]) && markup[i] != '>') ++i;
        value = decode_entities(markup.substr(vstart, i - vstart));
      }
    }
    if (!key.empty()) tag.attrs.emplace_back(std::move(key), std::move(value));
    if (key_start == i) ++i;
  }
  pos = (i < n) ? i + 1 : n;
  return true;
}

// Walks the markup, calling `on_text(text, style, suppressed)` for each text
// run. `suppressed` is true for never-rendered content (script/style/head).
template <typename OnText, typename OnBreak>
void walk(std::string_view markup, OnText&& on_text, OnBreak&& on_break) {
  struct Frame {
    std::string name;
    Style style;
    bool suppressed = false;
  };
  StyleSheet sheet;
  std::vector<Frame> stack;
  stack.push_back(Frame{"#root", Style{}, false});

  const std::size_t n = markup.size();
  std::size_t pos = 0;
  std::string pending;

  auto flush_text = [&] {
    if (pending.empty()) return;
    const Frame& top = stack.back();
    on_text(decode_entities(pending), top.style, top.suppressed);
    pending.clear();
  };

  auto pop_to = [&](const std::string& name) {
    for (std::size_t k = stack.size(); k-- > 1;) {
      if (stack[k].name == name) {
        stack.resize(k);
        return;
      }
    }
  };

  while (pos < n) {
    const char c = markup[pos];
    if (c != '<') {
      pending.push_back(c);
      ++pos;
      continue;
    }
    if (markup.compare(pos, 4, "<!--") == 0) {
      flush_text();
      std::size_t end = markup.find("-->", pos + 4);
      pos = (end == std::string_view::npos) ? n : end + 3;
      continue;
    }
    if (pos + 1 < n && (markup[pos + 1] == '!' || markup[pos + 1] == '?')) {
      flush_text();
      std::size_t end = markup.find('>', pos);
      pos = (end == std::string_view::npos) ? n : end + 1;
      continue;
    }
    std::size_t tag_pos = pos;
    Tag tag;
    if (!parse_tag(markup, tag_pos, tag)) {
      pending.push_back(c);
      ++pos;
      continue;
    }
    flush_text();
    pos = tag_pos;

    if (tag.closing) {
      if (is_block_element(tag.name)) on_break();
      pop_to(tag.name);
      continue;
    }

    const Frame& parent = stack.back();
    Frame frame;
    frame.name = tag.name;
    frame.style = parent.style;
    frame.suppressed = parent.suppressed || tag.name == "head" || tag.name == "script" ||
                       tag.name == "style" || tag.name == "template";
    if (tag.name == "body") frame.suppressed = false;
    if (tag.name == "p" && stack.back().name == "p") stack.pop_back();

    // Legacy presentational attributes first, then stylesheet, then inline.
    const double parent_px = parent.style.font_px;
    if (tag.attr("hidden") != nullptr) frame.style.display_none = true;
    if (const std::string* v = tag.attr("bgcolor")) {
      if (auto rgb = parse_color(*v)) frame.style.background = *rgb;
    }
    if (tag.name == "font") {
      if (const std::string* v = tag.attr("color")) {
        if (auto rgb = parse_color(*v)) frame.style.color = *rgb;
      }
      if (const std::string* v = tag.attr("size")) {
        static constexpr double kLegacy[] = {10, 13, 16, 18, 24, 32, 48};
        int level = std::atoi(v->c_str());
        if (!v->empty() && ((*v)[0] == '+' || (*v)[0] == '-')) level += 3;
        level = std::clamp(level, 1, 7);
        frame.style.font_px = kLegacy[level - 1];
      }
    }
    std::vector<std::string> classes;
    if (const std::string* v = tag.attr("class")) {
      std::size_t p = 0;
      std::string cls = lower(*v);
      while (p < cls.size()) {
        while (p < cls.size() && is_space(cls[p])) ++p;
        std::size_t q = p;
        while (q < cls.size() && !is_space(cls[q])) ++q;
        if (q > p) classes.push_back(cls.substr(p, q - p));
        p = q;
      }
    }
    std::string id;
    if (const std::string* v = tag.attr("id")) id = lower(*v);
    for (const auto* rule : sheet.matching(tag.name, classes, id)) {
      apply_declarations(rule->decls, frame.style, parent_px);
    }
    if (const std::string* v = tag.attr("style")) {
      apply_declarations(parse_declarations(*v), frame.style, parent_px);
    }

    if (is_block_element(tag.name)) on_break();

    if (is_raw_text_element(tag.name) && !tag.self_closing) {
      std::string close = "</" + tag.name;
      std::size_t end = pos;
      while (true) {
        end = markup.find("</", end);
        if (end == std::string_view::npos) break;
        if (lower(markup.substr(end, close.size())) == close) break;
        end += 2;
      }
      std::string_view content =
          markup.substr(pos, (end == std::string_view::npos ? n : end) - pos);
      if (tag.name == "style") {
        sheet.parse(content);
      } else if (tag.name == "script") {
        on_text(std::string(content), frame.style, true);
      } else {
        // title/textarea content: textarea renders, title sits in head.
        const bool suppressed = frame.suppressed || tag.name == "title";
        on_text(decode_entities(content), frame.style, suppressed);
      }
      if (end == std::string_view::npos) {
        pos = n;
      } else {
        std::size_t gt = markup.find('>', end);
        pos = (gt == std::string_view::npos) ? n : gt + 1;
      }
      if (is_block_element(tag.name)) on_break();
      continue;
    }

    if (tag.self_closing || is_void_element(tag.name)) continue;
    stack.push_back(std::move(frame));
  }
  flush_text();
}

bool hidden_by_style(const Style& s) {
  if (s.display_none || s.visibility_hidden || s.transparent_text) return true;
  if (s.font_px <= kHiddenFontPx) return true;
  return color_distance(s.color, s.background) <= kHiddenColorDistance;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto b = static_cast<unsigned char>(text[i]);
    // U+00A0 (C2 A0) counts as whitespace too.
    const bool nbsp = b == 0xC2 && i + 1 < text.size() &&
                      static_cast<unsigned char>(text[i + 1]) == 0xA0;
    if (std::isspace(b) || nbsp) {
      space = true;
      if (nbsp) ++i;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(text[i]);
  }
  return out;
}

std::size_t count_non_space(std::string_view text) {
  std::size_t count = 0;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) ++count;
  }
  return count;
}

}  // namespace

std::optional<Rgb> parse_color(std::string_view value) {
  std::string v = lower(trim(value));
  if (v.empty()) return std::nullopt;
  if (v[0] == '#') {
    std::string_view hex = std::string_view(v).substr(1);
    Rgb rgb{};
    if (hex.size() == 3 || hex.size() == 4) {
      for (int k = 0; k < 3; ++k) {
        int d = 0;
        if (!parse_hex_component(hex.substr(k, 1), d)) return std::nullopt;
        rgb[k] = d * 17;
      }
      return rgb;
    }
    if (hex.size() == 6 || hex.size() == 8) {
      for (int k = 0; k < 3; ++k) {
        if (!parse_hex_component(hex.substr(2 * k, 2), rgb[k])) return std::nullopt;
      }
      return rgb;
    }
    return std::nullopt;
  }
  if (v.starts_with("rgb")) {
    std::size_t open = v.find('(');
    std::size_t close = v.find(')');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    std::string inner = v.substr(open + 1, close - open - 1);
    for (char& c : inner) {
      if (c == ',' || c == '/') c = ' ';
    }
    Rgb rgb{};
    const char* p = inner.c_str();
    for (int k = 0; k < 3; ++k) {
      char* end = nullptr;
      double x = std::strtod(p, &end);
      if (end == p) return std::nullopt;
      if (*end == '%') {
        x = x * 255.0 / 100.0;
        ++end;
      }
      rgb[k] = static_cast<int>(std::lround(std::clamp(x, 0.0, 255.0)));
      p = end;
    }
    return rgb;
  }
  // Legacy HTML accepts bare hex without '#'.
  if (v.size() == 6 && std::all_of(v.begin(), v.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
    return parse_color("#" + v);
  }
  const auto& names = named_colors();
  if (auto it = names.find(v); it != names.end()) return it->second;
  return std::nullopt;
}

std::optional<double> parse_font_size(std::string_view value, double parent_px) {
  std::string v = lower(trim(value));
  if (v.empty()) return std::nullopt;
  static const std::map<std::string, double, std::less<>> kKeywords = {
      {"xx-small", 9}, {"x-small", 10}, {"small", 13}, {"medium", 16},
      {"large", 18},   {"x-large", 24}, {"xx-large", 32}, {"xxx-large", 48}};
  if (auto it = kKeywords.find(v); it != kKeywords.end()) return it->second;
  if (v == "smaller") return parent_px / 1.2;
  if (v == "larger") return parent_px * 1.2;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || !std::isfinite(x) || x < 0) return std::nullopt;
  std::string_view unit = trim(std::string_view(end));
  if (unit.empty() || unit == "px") return x;
  if (unit == "pt") return x * 4.0 / 3.0;
  if (unit == "pc") return x * 16.0;
  if (unit == "em") return x * parent_px;
  if (unit == "rem") return x * kDefaultFontPx;
  if (unit == "%") return x * parent_px / 100.0;
  if (unit == "in") return x * 96.0;
  if (unit == "cm") return x * 96.0 / 2.54;
  if (unit == "mm") return x * 96.0 / 25.4;
  if (unit == "vw" || unit == "vh" || unit == "ex" || unit == "ch") return x * parent_px / 2.0;
  return std::nullopt;
}

double color_distance(const Rgb& a, const Rgb& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  const auto& table = entity_table();
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(text[i++]);
      continue;
    }
    std::string_view name = text.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      char32_t cp = 0;
      bool ok = name.size() > 1;
      const bool hex = ok && (name[1] == 'x' || name[1] == 'X');
      for (std::size_t k = hex ? 2 : 1; ok && k < name.size(); ++k) {
        const char ch = name[k];
        int digit;
        if (ch >= '0' && ch <= '9') digit = ch - '0';
        else if (hex && ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
        else if (hex && ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
        else { ok = false; break; }
        cp = cp * (hex ? 16 : 10) + digit;
        if (cp > 0x10FFFF) ok = false;
      }
      if (ok && (hex ? name.size() > 2 : true)) {
        if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = utf8::kReplacement;
        utf8::append(out, cp);
        i = semi + 1;
        continue;
      }
    } else if (auto it = table.find(name); it != table.end()) {
      utf8::append(out, it->second);
      i = semi + 1;
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

VisibleText extract_visible(std::string_view markup) {
  VisibleText result;
  std::string raw;
  walk(
      markup,
      [&](const std::string& text, const Style& style, bool suppressed) {
        if (suppressed) return;
        if (hidden_by_style(style)) {
          result.hidden_chars += count_non_space(text);
          return;
        }
        raw += text;
        raw.push_back(' ');
      },
      [&] { raw.push_back(' '); });
  result.text = collapse_whitespace(raw);
  return result;
}

std::string extract_naive(std::string_view markup) {
  std::string raw;
  walk(
      markup,
      [&](const std::string& text, const Style&, bool) {
        raw += text;
        raw.push_back(' ');
      },
      [&] { raw.push_back(' '); });
  return collapse_whitespace(raw);
}

}  // namespace spamtopic::html
