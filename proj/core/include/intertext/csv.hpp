#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// RFC-4180 CSV: comma delimiter, double-quote quoting with "" escapes,
// CRLF or LF line endings. A leading UTF-8 BOM is ignored.
namespace intertext::csv {

using Row = std::vector<std::string>;

// Throws Error{schema} on an unterminated quoted field. Blank lines are skipped.
std::vector<Row> parse(std::string_view content);

std::string escape(std::string_view field);
std::string format_row(const Row& row);

struct Table {
  Row header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  // Throws Error{schema} naming the column when it is absent.
  std::size_t require(std::string_view name) const;
};

Table read_table(std::string_view content);

}  // namespace intertext::csv
