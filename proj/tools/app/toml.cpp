#include "toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "dld/common.hpp"

namespace dld::app {

namespace {

class Parser {
 public:
  Parser(std::string_view text, std::string name) : s_(text), name_(std::move(name)) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_ws();
        const auto path = key_path();
        skip_ws();
        expect(']');
        if (!defined_.insert(join(path)).second) fail("table [" + join(path) + "] defined twice");
        end_of_line();
        table = &root;
        for (const auto& k : path) {
          auto& next = (*table)[k];
          if (next.is_null()) next = nlohmann::json::object();
          else if (!next.is_object()) fail("key '" + k + "' is not a table");
          table = &next;
        }
        continue;
      }
      key_value(*table);
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(name_ + ":" + std::to_string(line_) + ": " + msg);
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }
  void newline() {
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }
  void skip_blank_lines() {
    while (!at_end()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') newline();
      else break;
    }
  }
  /// Whitespace, comments and newlines inside arrays.
  void skip_space_in_array() {
    while (!at_end()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') newline();
      else break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (at_end()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected text after value");
    newline();
  }

  static std::string join(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out;
  }

  std::string simple_key() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path{simple_key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      skip_ws();
      path.push_back(simple_key());
      skip_ws();
    }
    return path;
  }

  void key_value(nlohmann::json& table) {
    const auto path = key_path();
    skip_ws();
    expect('=');
    skip_ws();
    nlohmann::json* target = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      auto& next = (*target)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      else if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(path.back())) fail("duplicate key '" + join(path) + "'");
    (*target)[path.back()] = value();
  }

  nlohmann::json value() {
    const char c = peek();
    if (c == '"') {
      if (s_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return basic_string();
    }
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = s_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': append_utf8(out, hex_code(4)); break;
        case 'U': append_utf8(out, hex_code(8)); break;
        default: fail(std::string("unsupported escape '\\") + e + "'");
      }
    }
    return out;
  }

  unsigned long hex_code(int digits) {
    if (pos_ + digits > s_.size()) fail("truncated unicode escape");
    unsigned long code = 0;
    for (int k = 0; k < digits; ++k) {
      const char c = s_[pos_++];
      if (!std::isxdigit(static_cast<unsigned char>(c))) fail("bad unicode escape");
      code = code * 16 + static_cast<unsigned long>(std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : (std::tolower(c) - 'a' + 10));
    }
    if (code > 0x10FFFF || (code >= 0xD800 && code <= 0xDFFF)) fail("escape is not a unicode scalar value");
    return code;
  }

  static void append_utf8(std::string& out, unsigned long c) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }

  std::string literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated string");
    std::string out(s_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  nlohmann::json number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                         peek() == '.' || peek() == '_')) {
      ++pos_;
    }
    std::string tok;
    for (char ch : s_.substr(start, pos_ - start)) {
      if (ch != '_') tok += ch;
    }
    if (tok.empty()) fail("expected a value");
    std::string_view body = tok;
    bool negative = false;
    if (body.front() == '+' || body.front() == '-') {
      negative = body.front() == '-';
      body.remove_prefix(1);
    }
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
      return negative ? -v : v;
    }
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
    const char* last = tok.data() + tok.size();
    if (is_float) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("invalid number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) fail("invalid value '" + tok + "'");
    return v;
  }

  nlohmann::json array() {
    expect('[');
    nlohmann::json out = nlohmann::json::array();
    while (true) {
      skip_space_in_array();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_space_in_array();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_space_in_array();
      expect(']');
      return out;
    }
  }

  nlohmann::json inline_table() {
    expect('{');
    nlohmann::json out = nlohmann::json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      key_value(out);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return out;
    }
  }

  std::string_view s_;
  std::string name_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text, const std::string& name) { return Parser(text, name).run(); }

}  // namespace dld::app
