#include "fusemetrics/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fusemetrics/error.hpp"

namespace fusemetrics::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_row(std::span<const std::string> fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  out += '\n';
  return out;
}

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    Row row;
    row.line = line;
    std::string field;
    bool record_done = false;
    bool any_content = false;
    while (!record_done) {
      if (i < text.size() && text[i] == '"') {
        any_content = true;
        ++i;
        while (true) {
          if (i >= text.size()) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(row.line) + ": unterminated quoted field");
          }
          if (text[i] == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              field += '"';
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          field += text[i++];
        }
      }
      while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        any_content = true;
        field += text[i++];
      }
      if (i < text.size() && text[i] == ',') {
        any_content = true;
        row.fields.push_back(std::move(field));
        field.clear();
        ++i;
        continue;
      }
      row.fields.push_back(std::move(field));
      field.clear();
      if (i < text.size() && text[i] == '\r') ++i;
      if (i < text.size() && text[i] == '\n') ++i;
      ++line;
      record_done = true;
    }
    if (any_content) rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double parse_number(std::string_view field, std::size_t line) {
  std::string s(field);
  if (s.empty()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": empty numeric field");
  }
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fusemetrics::csv
