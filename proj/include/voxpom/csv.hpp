#pragma once

// Minimal comma-separated tables: header row plus numeric rows, with the
// source line number kept for error messages.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "voxpom/error.hpp"

namespace voxpom::csv {

struct Row {
  std::size_t line = 0;
  std::vector<std::optional<double>> values;  // nullopt for empty fields
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError("missing column '" + name + "'", 1);
  }
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view field, std::size_t line) {
  if (field.empty()) return std::nullopt;
  const std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw SchemaError("not a number: '" + s + "'", line);
  return v;
}

/// Reads a table; blank lines are skipped, every row must match the header width.
inline Table read(std::istream& in) {
  Table t;
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (!have_header) {
      for (auto f : fields) {
        if (f.empty()) throw SchemaError("empty column name in header", n);
        t.header.emplace_back(f);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw SchemaError("expected " + std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()),
                        n);
    }
    Row r;
    r.line = n;
    for (auto f : fields) r.values.push_back(parse_number(f, n));
    t.rows.push_back(std::move(r));
  }
  if (!have_header) throw SchemaError("empty file", 1);
  return t;
}

/// Nine significant digits; negative zero printed as 0.
inline std::string format(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline void write_header(std::ostream& os, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
}

inline void write_row(std::ostream& os, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << format(values[i]);
  os << '\n';
}

}  // namespace voxpom::csv
