#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossview {

/// Malformed CSV input; the message names the offending line.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvRow {
  int line = 0;
  std::vector<double> values;
};

/// Parses rows of exactly `columns` numeric fields. Blank lines are ignored and
/// a first line that does not parse as numbers is treated as a header.
std::vector<CsvRow> read_numeric_csv(const std::filesystem::path& path, std::size_t columns);
std::vector<CsvRow> parse_numeric_csv(const std::string& text, std::size_t columns,
                                      const std::string& source = "<csv>");

/// Shortest round-trip representation of a double, locale independent.
std::string format_number(double v);

}  // namespace crossview
