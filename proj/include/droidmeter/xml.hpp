#pragma once

// Minimal XML element-tree parser covering the dialect produced by on-device
// UI dumpers: a prolog, comments, nested elements with quoted attributes and
// the five named entities plus numeric character references. No DTDs, no
// namespaces, no CDATA. Text content between elements is ignored.

#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "droidmeter/errors.hpp"

namespace droidmeter::xml {

class ParseError : public Error {
 public:
  using Error::Error;
};

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Element parse_document() {
    skip_misc();
    if (eof()) fail("document contains no element");
    Element root = parse_element();
    skip_misc();
    if (!eof()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("xml: " + msg + " (offset " + std::to_string(pos_) + ")");
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char next() {
    if (eof()) fail("unexpected end of input");
    return text_[pos_++];
  }
  bool starts_with(std::string_view s) const {
    return text_.compare(pos_, s.size(), s) == 0;
  }
  void expect(char c) {
    if (eof() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  // Whitespace, prolog, comments, and stray text outside elements.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<?")) {
        auto end = text_.find("?>", pos_);
        if (end == std::string_view::npos) fail("unterminated processing instruction");
        pos_ = end + 2;
      } else if (starts_with("<!--")) {
        auto end = text_.find("-->", pos_);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos_ = end + 3;
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    size_t start = pos_;
    while (!eof()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.' || c == ':') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size();) {
      if (raw[i] != '&') {
        out += raw[i++];
        continue;
      }
      auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference");
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") {
        out += '&';
      } else if (ent == "lt") {
        out += '<';
      } else if (ent == "gt") {
        out += '>';
      } else if (ent == "quot") {
        out += '"';
      } else if (ent == "apos") {
        out += '\'';
      } else if (!ent.empty() && ent[0] == '#') {
        int base = 10;
        std::string_view digits = ent.substr(1);
        if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
          base = 16;
          digits = digits.substr(1);
        }
        if (digits.empty()) fail("empty character reference");
        unsigned long code = 0;
        for (char c : digits) {
          int d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
          else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
          else { fail("bad character reference"); }
          code = code * base + static_cast<unsigned long>(d);
        }
        append_utf8(out, code);
      } else {
        fail("unknown entity '&" + std::string(ent) + ";'");
      }
      i = semi + 1;
    }
    return out;
  }

  static void append_utf8(std::string& out, unsigned long code) {
    if (code < 0x80) {
      out += static_cast<char>(code);
    } else if (code < 0x800) {
      out += static_cast<char>(0xC0 | (code >> 6));
      out += static_cast<char>(0x80 | (code & 0x3F));
    } else if (code < 0x10000) {
      out += static_cast<char>(0xE0 | (code >> 12));
      out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (code & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (code >> 18));
      out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (code & 0x3F));
    }
  }

  std::string parse_attribute_value() {
    char quote = next();
    if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
    size_t start = pos_;
    while (!eof() && text_[pos_] != quote) {
      if (text_[pos_] == '<') fail("'<' in attribute value");
      ++pos_;
    }
    if (eof()) fail("unterminated attribute value");
    std::string value = decode_entities(text_.substr(start, pos_ - start));
    ++pos_;  // closing quote
    return value;
  }

  Element parse_element() {
    expect('<');
    Element el;
    el.name = parse_name();
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated start tag");
      if (peek() == '/') {
        ++pos_;
        expect('>');
        return el;  // self-closing
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      std::string key = parse_name();
      skip_ws();
      expect('=');
      skip_ws();
      el.attributes.emplace_back(std::move(key), parse_attribute_value());
    }
    // content: child elements until the matching end tag
    for (;;) {
      // skip text content, comments
      while (!eof() && peek() != '<') ++pos_;
      if (eof()) fail("unterminated element '" + el.name + "'");
      if (starts_with("<!--")) {
        auto end = text_.find("-->", pos_);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos_ = end + 3;
        continue;
      }
      if (starts_with("</")) {
        pos_ += 2;
        std::string closing = parse_name();
        if (closing != el.name)
          fail("mismatched end tag '" + closing + "' for '" + el.name + "'");
        skip_ws();
        expect('>');
        return el;
      }
      el.children.push_back(parse_element());
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
};

}  // namespace detail

inline Element parse(std::string_view text) {
  return detail::Parser(text).parse_document();
}

inline void escape_into(std::string& out, std::string_view value) {
  for (char c : value) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
}

}  // namespace droidmeter::xml
