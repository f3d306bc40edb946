#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "focalridge/dataset.hpp"

namespace focalridge::csv {

// RFC-4180 reader: comma-separated, optional double-quote quoting, "" as an
// escaped quote inside a quoted field, LF or CRLF record ends (newlines
// inside quoted fields are literal). The first record is the header; fully
// blank lines are ignored.
RawTable read_table(std::istream& in);
RawTable read_table_file(const std::string& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string quote_field(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal form that parses back to the same double: '.' separator,
// locale-independent, round-trip safe.
std::string format_double(double value);

// Full-string parse; ok reports success. Locale-independent.
double parse_double(const std::string& text, bool& ok);

}  // namespace focalridge::csv
