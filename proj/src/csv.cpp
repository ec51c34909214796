#include "odflow/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "odflow/errors.hpp"

namespace odflow::csv {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_int(long long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& where) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError(where + ": expected a number, got '" + std::string(field) + "'");
  }
  return value;
}

long long parse_int(std::string_view field, const std::string& where) {
  long long value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError(where + ": expected an integer, got '" + std::string(field) + "'");
  }
  return value;
}

bool parse_bool01(std::string_view field, const std::string& where) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw ParseError(where + ": expected 0 or 1, got '" + std::string(field) + "'");
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

int Table::col(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw ParseError(path.string() + ": missing column '" + std::string(name) + "'");
}

std::string Table::where(std::size_t row) const {
  // +2: one for the header line, one to convert to 1-based numbering.
  return path.string() + " line " + std::to_string(row + 2);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return content;
}

Table read_table(const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  Table table;
  table.path = path;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      for (const auto f : split(line, ',')) table.header.emplace_back(f);
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty())) {
        throw ParseError(path.string() + ": empty header");
      }
    } else if (!line.empty()) {
      const auto fields = split(line, ',');
      if (fields.size() != table.header.size()) {
        throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(fields.size()));
      }
      std::vector<std::string> row;
      row.reserve(fields.size());
      for (const auto f : fields) row.emplace_back(f);
      table.rows.push_back(std::move(row));
    }
    start = end + 1;
  }
  if (line_no == 0) throw ParseError(path.string() + ": empty file");
  return table;
}

void require_header(const Table& table, const std::vector<std::string>& expected) {
  if (table.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) want += ',';
      want += expected[i];
    }
    std::string got;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i) got += ',';
      got += table.header[i];
    }
    throw ParseError(table.path.string() + ": expected header '" + want + "', got '" + got + "'");
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

}  // namespace odflow::csv
