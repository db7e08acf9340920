#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

// RFC 4180 CSV reading and writing. Quoted fields may contain commas, quotes
// (doubled), and line breaks; CRLF and LF row terminators are both accepted.

namespace avianrisk::csvio {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0; // 1-based line the row starts on, for error messages
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// Parses an entire file; throws InputError on I/O failure, an unterminated
// quote, or a missing header.
Table read_file(const std::string& path);

Table parse(std::string_view text, const std::string& origin);

// Quotes the field only when RFC 4180 requires it.
std::string escape(std::string_view field);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

class Writer {
public:
  explicit Writer(const std::string& path);

  void write_row(const std::vector<std::string>& fields);

  void close();

private:
  std::ofstream out_;
  std::string path_;
};

} // namespace avianrisk::csvio
