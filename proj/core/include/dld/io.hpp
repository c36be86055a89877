#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dld {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict parse of a whole field; throws DataError naming `context`.
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

/// Line-oriented reader for the simple CSV files written by this library
/// (no quoting). Errors carry the file name and 1-based line number.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string name, const std::vector<std::string>& expected_header);

  /// Reads the next non-empty row. Returns false at end of input.
  bool next();
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::vector<std::string_view>& fields() const { return fields_; }
  [[nodiscard]] double number(std::size_t col) const;
  [[nodiscard]] long long integer(std::size_t col) const;
  [[nodiscard]] std::string text(std::size_t col) const { return std::string(fields_.at(col)); }
  [[noreturn]] void fail(const std::string& message) const;

 private:
  void split();

  std::istream& in_;
  std::string name_;
  std::size_t columns_ = 0;
  std::size_t line_ = 0;
  std::string buffer_;
  std::vector<std::string_view> fields_;
};

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// FNV-1a, used for short content fingerprints in reports.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace dld
