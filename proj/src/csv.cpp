#include "focalridge/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "focalridge/errors.hpp"

namespace focalridge::csv {

namespace {

// Splits raw CSV text into records of fields, honoring quoting.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // A lone empty field from a blank line is not a record.
    if (record.size() > 1 || !record[0].empty() || record_has_content) {
      records.push_back(record);
    }
    record.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw IngestionError("malformed CSV: quote character inside an unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') {
          ++i;
        }
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        if (field_was_quoted) {
          throw IngestionError("malformed CSV: content after a closing quote");
        }
        field.push_back(c);
        record_has_content = true;
        break;
    }
  }
  if (in_quotes) {
    throw IngestionError("malformed CSV: unterminated quoted field");
  }
  if (!field.empty() || !record.empty() || field_was_quoted) {
    end_record();
  }
  return records;
}

}  // namespace

RawTable read_table(std::istream& in) {
  const std::string text(std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>{});
  auto records = parse_records(text);
  if (records.empty()) {
    throw IngestionError("empty CSV input: a header row is required");
  }
  RawTable table;
  table.columns = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1),
                    std::make_move_iterator(records.end()));
  return table;
}

RawTable read_table_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestionError("cannot open input file '" + path + "'");
  }
  return read_table(in);
}

std::string quote_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) {
    return field;
  }
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') {
      quoted += "\"\"";
    } else {
      quoted.push_back(c);
    }
  }
  quoted.push_back('"');
  return quoted;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out.put(',');
    }
    out << quote_field(fields[i]);
  }
  out.put('\n');
}

std::string format_double(double value) {
  std::array<char, 32> buffer;
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

double parse_double(const std::string& text, bool& ok) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto result = std::from_chars(first, last, value);
  ok = result.ec == std::errc{} && result.ptr == last;
  return value;
}

}  // namespace focalridge::csv
