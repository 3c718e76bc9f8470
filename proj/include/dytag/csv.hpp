#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace dytag {

/// Streaming RFC-4180 reader: quoted fields, doubled quotes, embedded line
/// breaks, LF or CRLF record ends. A leading UTF-8 BOM is skipped.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  /// Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based physical line on which the last returned record started.
  std::size_t line() const noexcept { return record_line_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  int get();
  int peek();

  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

/// Quotes a field when it contains a delimiter, quote, or line break.
std::string csv_field(std::string_view value);

}  // namespace dytag
