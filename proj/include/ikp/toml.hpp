#pragma once

/**
 * @file toml.hpp
 * Minimal TOML reader covering the flat-table subset used by the model
 * registry and the runtime config: `[table]` headers, `key = value` pairs
 * with basic strings, integers, floats, booleans, bare YYYY-MM-DD dates
 * (stored as strings), and `#` comments. Nested tables, arrays, and inline
 * tables are rejected with a line-numbered error.
 */

#include <map>
#include <optional>
#include <string>
#include <variant>

#include "ikp/util.hpp"

namespace ikp::toml {

using Value = std::variant<std::string, double, std::int64_t, bool>;
using Table = std::map<std::string, Value>;

struct Document {
  Table root;                          // keys before any [table]
  std::map<std::string, Table> tables; // insertion order not preserved; keys sorted
  std::vector<std::string> table_order;

  const Table* find(const std::string& name) const {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
  }
};

Document parse(const std::string& text, const std::string& origin = "<toml>");
Document parse_file(const std::filesystem::path& p);

// Typed lookups; throw Error naming the key when the type mismatches.
std::optional<std::string> get_string(const Table& t, const std::string& key);
std::optional<double> get_number(const Table& t, const std::string& key);
std::optional<std::int64_t> get_int(const Table& t, const std::string& key);
std::optional<bool> get_bool(const Table& t, const std::string& key);

}  // namespace ikp::toml
