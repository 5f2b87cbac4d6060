#ifndef FIXTHRESH_CSV_HPP
#define FIXTHRESH_CSV_HPP

#include <string>
#include <vector>

namespace fixthresh::csv {

// Minimal CSV handling for the project's file formats: header + simple
// comma-separated fields, no quoting. All numeric formatting is
// locale-independent (std::to_chars / from_chars).

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;       // -1 when absent
  int require_column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text);
void write_file(const std::string& path, const Table& table);

std::vector<std::string> split_fields(const std::string& line);

// Shortest round-trip representation of a double.
std::string format_double(double v);
// Fixed-precision decimal form (used for report tables).
std::string format_fixed(double v, int decimals);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace fixthresh::csv

#endif
