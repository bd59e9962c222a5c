#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fairpen/error.hpp"

namespace fairpen::csv {

using Row = std::vector<std::string>;

/// Reads one logical record. Handles double-quoted fields with embedded
/// commas, doubled quotes and line breaks. Returns false at end of input.
inline bool read_row(std::istream& in, Row& row) {
  row.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char ch = 0;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      row.push_back(std::move(field));
      return true;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      row.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (!any) return false;
  row.push_back(std::move(field));
  return true;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

}  // namespace fairpen::csv
