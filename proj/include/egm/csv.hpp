#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "egm/error.hpp"

namespace egm::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the row starts
  std::vector<std::string> fields;
};

// RFC 4180: comma separated, double-quoted fields may contain commas,
// newlines and doubled quotes. CRLF and LF both end a row.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t line = 1;
  row.line = 1;
  bool in_quotes = false;
  bool row_has_content = false;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row_has_content || row.fields.size() > 1 || !row.fields.front().empty()) rows.push_back(std::move(row));
    row = Row{};
    row_has_content = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == ',') {
      end_field();
      row_has_content = true;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      end_row();
      ++line;
      row.line = line;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw Error(ErrorCode::SchemaError, "unterminated quoted field near line " + std::to_string(line));
  if (!field.empty() || !row.fields.empty() || row_has_content) end_row();
  return rows;
}

inline std::string escape(std::string_view value) {
  bool quote = value.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!quote) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

// Header-keyed view over parsed rows.
class Table {
 public:
  explicit Table(std::string_view text) {
    auto rows = parse(text);
    if (rows.empty()) throw Error(ErrorCode::SchemaError, "missing CSV header row");
    header_ = rows.front().fields;
    for (std::size_t i = 0; i < header_.size(); ++i) column_[header_[i]] = i;
    rows_.assign(rows.begin() + 1, rows.end());
  }

  bool has_column(const std::string& name) const { return column_.count(name) > 0; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<std::string>& header() const { return header_; }

  // Empty string when the column is absent or the row is short.
  std::string get(const Row& row, const std::string& name) const {
    auto it = column_.find(name);
    if (it == column_.end() || it->second >= row.fields.size()) return {};
    return row.fields[it->second];
  }

 private:
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> column_;
  std::vector<Row> rows_;
};

}  // namespace egm::csv
