#include "dld/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <system_error>

#include "dld/common.hpp"

namespace dld {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError(context + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text, const std::string& context) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError(context + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

CsvReader::CsvReader(std::istream& in, std::string name, const std::vector<std::string>& expected_header)
    : in_(in), name_(std::move(name)), columns_(expected_header.size()) {
  if (!next()) fail("empty file, expected a header");
  bool ok = fields_.size() == expected_header.size();
  for (std::size_t k = 0; ok && k < fields_.size(); ++k) ok = fields_[k] == expected_header[k];
  if (!ok) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    fail("unexpected header, expected '" + want + "'");
  }
}

bool CsvReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    if (buffer_.empty()) continue;
    // A row without its newline means the file was cut short.
    if (in_.eof()) fail("truncated row (missing line terminator)");
    split();
    if (line_ > 1 && fields_.size() != columns_) {
      fail("expected " + std::to_string(columns_) + " fields, got " + std::to_string(fields_.size()));
    }
    return true;
  }
  return false;
}

void CsvReader::split() {
  fields_.clear();
  std::string_view rest(buffer_);
  while (true) {
    const auto comma = rest.find(',');
    fields_.push_back(rest.substr(0, comma));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
}

double CsvReader::number(std::size_t col) const {
  try {
    return parse_double(fields_.at(col), "column " + std::to_string(col + 1));
  } catch (const DataError& e) {
    fail(e.what());
  }
}

long long CsvReader::integer(std::size_t col) const {
  try {
    return parse_int(fields_.at(col), "column " + std::to_string(col + 1));
  } catch (const DataError& e) {
    fail(e.what());
  }
}

void CsvReader::fail(const std::string& message) const {
  throw DataError(name_ + ":" + std::to_string(line_) + ": " + message);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dld
