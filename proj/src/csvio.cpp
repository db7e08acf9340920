#include "avianrisk/csvio.hpp"

#include <charconv>
#include <sstream>

#include "avianrisk/error.hpp"

namespace avianrisk::csvio {

Table parse(std::string_view text, const std::string& origin) {
  Table table;
  std::vector<std::string> fields;
  std::string field;
  std::size_t line = 1;
  std::size_t row_start_line = 1;
  bool in_quotes = false;
  bool row_has_content = false;

  const auto flush_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    if (table.header.empty()) {
      table.header = std::move(fields);
    } else {
      table.rows.push_back({std::move(fields), row_start_line});
    }
    fields.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty() || !fields.empty()) flush_row();
        ++line;
        row_start_line = line;
        break;
      default:
        field += c;
        row_has_content = true;
        break;
    }
  }
  if (in_quotes)
    throw InputError(origin + ": unterminated quoted field starting near line " +
                     std::to_string(row_start_line));
  if (row_has_content || !field.empty() || !fields.empty()) flush_row();

  if (table.header.empty())
    throw InputError(origin + ": empty file, expected a header row");
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out += '"';
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw InputError(path + ": cannot open file for writing");
}

void Writer::write_row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << escape(fields[i]);
  }
  out_ << '\n';
}

void Writer::close() {
  out_.close();
  if (out_.fail()) throw InputError(path_ + ": write failed");
}

} // namespace avianrisk::csvio
