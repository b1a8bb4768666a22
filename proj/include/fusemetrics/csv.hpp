#pragma once

// RFC 4180 CSV helpers.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fusemetrics::csv {

/// Quotes the field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
/// Fields joined with commas, terminated by "\n".
std::string join_row(std::span<const std::string> fields);

struct Row {
  std::size_t line = 0;  // 1-based line on which the record starts
  std::vector<std::string> fields;
};

/// Parses a whole document. Blank lines are skipped. Throws ParseError on an
/// unterminated quoted field.
std::vector<Row> parse(std::string_view text);

/// printf %.<digits>g
std::string format_number(double v, int digits = 6);
/// Strict decimal parse of the whole field; throws ParseError mentioning `line`.
double parse_number(std::string_view field, std::size_t line);

std::string read_file(const std::string& path);

}  // namespace fusemetrics::csv
