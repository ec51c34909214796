#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace odflow::csv {

// Shortest decimal string that round-trips back to exactly the same double
// (std::to_chars). Used for every floating-point value we serialize so that
// save -> load -> save is byte-identical.
std::string format_double(double v);
std::string format_int(long long v);

// Strict numeric parsing: the whole field must be consumed. `where` is a
// human-readable location ("file.csv line 12, column count") for the error.
double parse_double(std::string_view field, const std::string& where);
long long parse_int(std::string_view field, const std::string& where);
// Booleans are serialized as 0/1 only.
bool parse_bool01(std::string_view field, const std::string& where);

// Split one line on a separator. No quoting: fields in these formats never
// contain commas (multi-valued fields use '|').
std::vector<std::string_view> split(std::string_view line, char sep);

// In-memory CSV table with a header row. Rows are rectangular (enforced).
struct Table {
  std::filesystem::path path;  // for error messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws ParseError when absent.
  int col(std::string_view name) const;
  // Location string for error messages; row is 0-based data row index.
  std::string where(std::size_t row) const;
};

// Read a whole CSV file (LF line endings; a trailing CR per line is tolerated
// on input, never produced on output). Throws IoError / ParseError.
Table read_table(const std::filesystem::path& path);

// Enforce an exact, order-sensitive header.
void require_header(const Table& table, const std::vector<std::string>& expected);

std::string read_text_file(const std::filesystem::path& path);

// Write via temp file in the same directory + rename, so readers never observe
// a partially written file and failed writes leave the old content intact.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

// Join cells with commas and terminate with LF, appending to `out`.
void append_row(std::string& out, const std::vector<std::string>& cells);

}  // namespace odflow::csv
