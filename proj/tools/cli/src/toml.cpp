#include "pcapce_cli/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "pcapce/error.hpp"

namespace pcapce::cli {
namespace {

using nlohmann::json;

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::ConfigInvalid, "config line " + std::to_string(line) + ": " + what);
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Drops a trailing comment, ignoring '#' inside strings.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  json parse() {
    json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "unexpected text after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
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

  json basic_string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  json literal_string() {
    const std::size_t end = s_.find('\'', pos_ + 1);
    if (end == std::string_view::npos) fail(line_, "unterminated string");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  json array() {
    json arr = json::array();
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      arr.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail(line_, "unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {  // trailing comma
          ++pos_;
          return arr;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail(line_, "expected ',' or ']' in array");
    }
  }

  json number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                               s_[end] == '+' || s_[end] == '-' || s_[end] == '_')) {
      ++end;
    }
    std::string tok;
    for (std::size_t i = pos_; i < end; ++i) {
      if (s_[i] != '_') tok.push_back(s_[i]);
    }
    if (tok.empty()) fail(line_, "expected a value");
    pos_ = end;
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" ||
                          tok == "+inf" || tok == "-inf" || tok == "nan";
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (*first == '+') ++first;
    if (!is_float) {
      long long v = 0;
      const auto r = std::from_chars(first, last, v);
      if (r.ec == std::errc() && r.ptr == last) return v;
      fail(line_, "bad integer '" + tok + "'");
    }
    double d = 0.0;
    const auto r = std::from_chars(first, last, d);
    if (r.ec == std::errc() && r.ptr == last) return d;
    fail(line_, "bad number '" + tok + "'");
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_key(const std::string& raw, int line) {
  std::vector<std::string> parts;
  std::string cur;
  char quote = 0;
  for (char c : raw) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '.') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(trim(cur));
  for (const auto& p : parts) {
    if (p.empty()) fail(line, "empty key");
  }
  return parts;
}

// Bracket depth outside strings, to detect multi-line arrays.
int bracket_balance(const std::string& s) {
  int depth = 0;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

}  // namespace

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;

  // Canonical names of explicitly opened tables; opening one twice is an error.
  std::set<std::string> defined;
  std::string where;

  auto descend = [&](json& from, const std::vector<std::string>& path, int line) -> json& {
    json* node = &from;
    for (const auto& key : path) {
      json& next = (*node)[key];
      where += "." + key;
      if (next.is_null()) next = json::object();
      if (next.is_array()) {
        if (next.empty() || !next.back().is_object()) fail(line, "'" + key + "' is not a table");
        where += "#" + std::to_string(next.size() - 1);
        node = &next.back();
      } else if (next.is_object()) {
        node = &next;
      } else {
        fail(line, "'" + key + "' is not a table");
      }
    }
    return *node;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.rfind("[[", 0) == 0) {
      if (line.size() < 4 || line.substr(line.size() - 2) != "]]") fail(line_no, "bad array-of-tables header");
      auto path = split_key(line.substr(2, line.size() - 4), line_no);
      const std::string last = path.back();
      path.pop_back();
      where.clear();
      json& parent = descend(root, path, line_no);
      json& arr = parent[last];
      if (arr.is_null()) arr = json::array();
      if (!arr.is_array()) fail(line_no, "'" + last + "' is not an array of tables");
      arr.push_back(json::object());
      table = &arr.back();
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "bad table header");
      where.clear();
      table = &descend(root, split_key(line.substr(1, line.size() - 2), line_no), line_no);
      if (!defined.insert(where).second) fail(line_no, "table defined twice");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    auto path = split_key(line.substr(0, eq), line_no);
    std::string value_text = trim(line.substr(eq + 1));
    const int start_line = line_no;
    while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
      ++line_no;
      value_text += " " + trim(strip_comment(raw));
    }
    const std::string last = path.back();
    path.pop_back();
    json& target = descend(*table, path, start_line);
    if (target.contains(last)) fail(start_line, "duplicate key '" + last + "'");
    target[last] = ValueParser(value_text, start_line).parse();
  }
  return root;
}

json parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace pcapce::cli
