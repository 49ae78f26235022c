// Copyright 2026 The kerrcubic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kerrcubic/errors.hpp"
#include "kerrcubic/linalg.hpp"

namespace kerrcubic {

/// Reading or writing an artifact failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration file; `line` is 1-based, 0 when not tied to a line.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& message, int line = 0)
      : InvalidArgument(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table() = default;
  explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}

  void add(std::vector<Cell> row) {
    require(row.size() == columns.size(), "Table: row has " + std::to_string(row.size()) + " cells, expected " +
                                              std::to_string(columns.size()));
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw InvalidArgument("Table: no column '" + name + "'");
  }

  double number(std::size_t row, const std::string& name) const {
    const Cell& c = rows.at(row).at(column(name));
    if (const double* d = std::get_if<double>(&c)) return *d;
    throw InvalidArgument("Table: column '" + name + "' is not numeric");
  }

  std::string text(std::size_t row, const std::string& name) const {
    const Cell& c = rows.at(row).at(column(name));
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    throw InvalidArgument("Table: column '" + name + "' is not text");
  }

  bool operator==(const Table&) const = default;
};

/// Shortest round-trip is not enough for the format contract: always 17 significant digits.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Parses a whole field as a double; false when it is not a number.
inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  if (s == "nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s == "inf" || s == "-inf") {
    out = s[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return true;
  }
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

namespace detail {

inline std::string csv_field(const std::string& s, bool force_quote) {
  const bool quote = force_quote || s.find_first_of(",\"\r\n") != std::string::npos;
  if (!quote) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

/// Text cells that would read back as numbers are quoted so the round trip keeps their type.
inline std::string to_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_field(t.columns[i], false);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (const double* d = std::get_if<double>(&row[i])) {
        os << format_double(*d);
      } else {
        const auto& s = std::get<std::string>(row[i]);
        double ignored;
        os << detail::csv_field(s, s.empty() || parse_double(s, ignored));
      }
    }
    os << '\n';
  }
  return os.str();
}

inline Table parse_csv(const std::string& text) {
  std::vector<std::vector<std::pair<std::string, bool>>> records;  // (field, was quoted)
  std::vector<std::pair<std::string, bool>> record;
  std::string field;
  bool quoted = false, in_quotes = false, any = false;
  auto end_field = [&] {
    record.emplace_back(field, quoted);
    field.clear();
    quoted = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_field();
      records.push_back(std::move(record));
      record.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw IoError("CSV: unterminated quoted field");
  if (any) {
    end_field();
    records.push_back(std::move(record));
  }
  if (records.empty()) throw IoError("CSV: missing header row");
  Table t;
  for (const auto& [name, q] : records[0]) t.columns.push_back(name);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.columns.size())
      throw IoError("CSV: row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                    " fields, expected " + std::to_string(t.columns.size()));
    std::vector<Cell> row;
    for (const auto& [s, q] : records[r]) {
      double d;
      if (!q && parse_double(s, d)) {
        row.emplace_back(d);
      } else {
        row.emplace_back(s);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_csv(const std::filesystem::path& path, const Table& t) { write_text(path, to_csv(t)); }
inline Table read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

/// Long-format Wigner grid: one (x, p, w) row per point, x outermost.
inline Table wigner_table(const std::vector<double>& xs, const std::vector<double>& ps, const RealMatrix& w) {
  require(w.rows() == static_cast<Eigen::Index>(xs.size()) && w.cols() == static_cast<Eigen::Index>(ps.size()),
          "wigner_table: grid shape mismatch");
  Table t({"x", "p", "w"});
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j) t.add({xs[i], ps[j], w(i, j)});
  return t;
}

// ---------------------------------------------------------------------------
// JSON sidecars

using Json = nlohmann::ordered_json;

/// Stamps the schema version and writes pretty-printed JSON.
inline void write_json(const std::filesystem::path& path, Json doc) {
  doc["schema_version"] = kSchemaVersion;
  write_text(path, doc.dump(2) + "\n");
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Configuration files

/// Parsed `key = value` lines; keys keep the line they came from.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string text(const std::string& key) const { return values.at(key); }

  double number(const std::string& key) const {
    double d;
    if (!parse_double(values.at(key), d) || !std::isfinite(d))
      throw ConfigError("'" + key + "' expects a number, got '" + values.at(key) + "'", lines.at(key));
    return d;
  }

  int integer(const std::string& key) const {
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 1e9)
      throw ConfigError("'" + key + "' expects an integer, got '" + values.at(key) + "'", lines.at(key));
    return static_cast<int>(d);
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(values.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      double d;
      if (b == std::string::npos || !parse_double(item.substr(b, e - b + 1), d))
        throw ConfigError("'" + key + "' expects a comma-separated list of numbers", lines.at(key));
      out.push_back(d);
    }
    if (out.empty()) throw ConfigError("'" + key + "' is an empty list", lines.at(key));
    return out;
  }
};

/// One `key = value` per line; `#` starts a comment. Keys outside `allowed` are rejected.
inline ConfigFile parse_config(const std::string& text, const std::set<std::string>& allowed) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", number);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key", number);
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "'", number);
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", number);
    if (cfg.has(key)) throw ConfigError("duplicate key '" + key + "'", number);
    cfg.values[key] = value;
    cfg.lines[key] = number;
  }
  return cfg;
}

inline ConfigFile load_config(const std::filesystem::path& path, const std::set<std::string>& allowed) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, allowed);
}

}  // namespace kerrcubic
