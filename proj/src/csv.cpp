#include "crossview/csv.hpp"

#include <charconv>
#include <sstream>

#include "crossview/tensor.hpp"

namespace crossview {
namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    std::string field = trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) return false;
    out.push_back(v);
    if (comma == std::string::npos) return true;
    start = comma + 1;
  }
}

}  // namespace

std::vector<CsvRow> parse_numeric_csv(const std::string& text, std::size_t columns,
                                      const std::string& source) {
  std::vector<CsvRow> rows;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool seen_content = false;
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const bool first = !seen_content;
    seen_content = true;
    if (!parse_row(line, values)) {
      if (first) continue;  // header
      throw CsvError(source + ":" + std::to_string(line_no) + ": malformed row '" + trim(line) + "'");
    }
    if (values.size() != columns) {
      throw CsvError(source + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(columns) + " columns, got " + std::to_string(values.size()));
    }
    rows.push_back({line_no, values});
  }
  return rows;
}

std::vector<CsvRow> read_numeric_csv(const std::filesystem::path& path, std::size_t columns) {
  return parse_numeric_csv(read_text_file(path), columns, path.string());
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace crossview
