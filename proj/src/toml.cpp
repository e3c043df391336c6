#include "ikp/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

namespace ikp::toml {

namespace {

[[noreturn]] void fail(const std::string& origin, std::size_t lineno, const std::string& what) {
  throw Error(origin + ":" + std::to_string(lineno) + ": " + what);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Strips a trailing comment that is not inside a basic string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool is_bare_date(const std::string& v) {
  if (v.size() != 10 || v[4] != '-' || v[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
  return true;
}

Value parse_value(const std::string& origin, std::size_t lineno, const std::string& raw) {
  if (raw.empty()) fail(origin, lineno, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      fail(origin, lineno, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      char c = raw[i];
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (i + 2 >= raw.size() + 1) fail(origin, lineno, "dangling escape");
      char e = raw[++i];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(origin, lineno, std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[' || raw.front() == '{')
    fail(origin, lineno, "arrays and inline tables are not supported");
  if (is_bare_date(raw)) return raw;  // dates kept as strings
  char* end = nullptr;
  if (raw.find_first_of(".eE") != std::string::npos ||
      raw.find("inf") != std::string::npos || raw.find("nan") != std::string::npos) {
    double d = std::strtod(raw.c_str(), &end);
    if (end && *end == '\0') return d;
  } else {
    long long i = std::strtoll(raw.c_str(), &end, 10);
    if (end && *end == '\0') return static_cast<std::int64_t>(i);
    double d = std::strtod(raw.c_str(), &end);
    if (end && *end == '\0') return d;
  }
  fail(origin, lineno, "cannot parse value: '" + raw + "'");
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

}  // namespace

Document parse(const std::string& text, const std::string& origin) {
  Document doc;
  Table* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "unterminated table header");
      if (line.size() > 2 && line[1] == '[')
        fail(origin, lineno, "array-of-tables is not supported");
      std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) fail(origin, lineno, "bad table name: '" + name + "'");
      if (doc.tables.count(name)) fail(origin, lineno, "duplicate table: '" + name + "'");
      current = &doc.tables[name];
      doc.table_order.push_back(name);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!valid_key(key)) fail(origin, lineno, "bad key: '" + key + "'");
    if (current->count(key)) fail(origin, lineno, "duplicate key: '" + key + "'");
    (*current)[key] = parse_value(origin, lineno, val);
  }
  return doc;
}

Document parse_file(const std::filesystem::path& p) {
  return parse(read_file(p), p.string());
}

namespace {
[[noreturn]] void type_fail(const std::string& key, const char* want) {
  throw Error("config key '" + key + "' has the wrong type (expected " + want + ")");
}
}  // namespace

std::optional<std::string> get_string(const Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  type_fail(key, "string");
}

std::optional<double> get_number(const Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  type_fail(key, "number");
}

std::optional<std::int64_t> get_int(const Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  type_fail(key, "integer");
}

std::optional<bool> get_bool(const Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  type_fail(key, "boolean");
}

}  // namespace ikp::toml
