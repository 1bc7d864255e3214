#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/csv.hpp"
#include "egm/error.hpp"
#include "egm/ingest/dedupe.hpp"
#include "egm/ingest/record.hpp"

namespace egm::ingest {

enum class ImportFormat { Jsonl, Csv };

inline ImportFormat parse_import_format(const std::string& s) {
  if (s == "jsonl") return ImportFormat::Jsonl;
  if (s == "csv") return ImportFormat::Csv;
  throw Error(ErrorCode::InvalidArgument, "unknown import format '" + s + "' (expected jsonl or csv)");
}

namespace detail {

inline void finish_import_record(StudyRecord& r, std::size_t line) {
  if (trim(r.title).empty()) throw SchemaError(line, "missing required field 'title'");
  if (r.doi) {
    auto norm = normalize_doi(*r.doi);
    if (!norm) throw SchemaError(line, "invalid doi '" + *r.doi + "'");
    r.doi = norm;
  }
  if (r.year && !valid_year(*r.year)) throw SchemaError(line, "year " + std::to_string(*r.year) + " out of range");
  r.source = "import";
}

inline std::optional<std::string> optional_text(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(line, std::string("field '") + key + "' must be a string");
  std::string v = it->get<std::string>();
  if (trim(v).empty()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_year_text(const std::string& s, std::size_t line) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    int y = std::stoi(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return y;
  } catch (const std::exception&) {
    throw SchemaError(line, "year '" + s + "' is not an integer");
  }
}

}  // namespace detail

inline std::vector<StudyRecord> parse_jsonl_records(std::istream& in) {
  std::vector<StudyRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw SchemaError(lineno, "expected a JSON object");
    StudyRecord r;
    auto title = obj.find("title");
    if (title == obj.end() || !title->is_string()) throw SchemaError(lineno, "missing required field 'title'");
    r.title = title->get<std::string>();
    r.abstract = detail::optional_text(obj, "abstract", lineno).value_or("");
    r.doi = detail::optional_text(obj, "doi", lineno);
    r.venue = detail::optional_text(obj, "venue", lineno);
    r.url = detail::optional_text(obj, "url", lineno);
    if (auto y = obj.find("year"); y != obj.end() && !y->is_null()) {
      if (y->is_number_integer()) {
        r.year = y->get<int>();
      } else if (y->is_string()) {
        r.year = detail::parse_year_text(y->get<std::string>(), lineno);
      } else {
        throw SchemaError(lineno, "field 'year' must be an integer");
      }
    }
    if (auto a = obj.find("authors"); a != obj.end() && !a->is_null()) {
      if (!a->is_array()) throw SchemaError(lineno, "field 'authors' must be a list");
      for (const auto& name : *a) {
        if (!name.is_string()) throw SchemaError(lineno, "authors must be strings");
        r.authors.push_back(name.get<std::string>());
      }
    }
    detail::finish_import_record(r, lineno);
    out.push_back(std::move(r));
  }
  return out;
}

// Same column names as the JSONL schema; authors are ';'-separated.
inline std::vector<StudyRecord> parse_csv_records(const std::string& text) {
  csv::Table table(text);
  if (!table.has_column("title")) throw SchemaError(1, "header lacks required column 'title'");
  std::vector<StudyRecord> out;
  for (const auto& row : table.rows()) {
    StudyRecord r;
    r.title = table.get(row, "title");
    r.abstract = table.get(row, "abstract");
    auto opt = [&](const char* col) -> std::optional<std::string> {
      std::string v = trim(table.get(row, col));
      if (v.empty()) return std::nullopt;
      return v;
    };
    r.doi = opt("doi");
    r.venue = opt("venue");
    r.url = opt("url");
    r.year = detail::parse_year_text(table.get(row, "year"), row.line);
    std::stringstream authors(table.get(row, "authors"));
    std::string name;
    while (std::getline(authors, name, ';')) {
      if (!trim(name).empty()) r.authors.push_back(trim(name));
    }
    detail::finish_import_record(r, row.line);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<StudyRecord> parse_import_text(const std::string& text, ImportFormat format) {
  if (format == ImportFormat::Csv) return parse_csv_records(text);
  std::istringstream in(text);
  return parse_jsonl_records(in);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Validates every record before touching the corpus; returns the number of
// genuinely new records (0 when everything was a duplicate).
inline std::size_t import_records(std::vector<StudyRecord>& corpus, std::vector<MergeLogEntry>& merge_log,
                                  const std::set<std::string>& retired_ids, const std::string& text,
                                  ImportFormat format, const DedupeOptions& opts = {}) {
  auto parsed = parse_import_text(text, format);
  auto result = merge_into_corpus(corpus, std::move(parsed), retired_ids, opts);
  merge_log.insert(merge_log.end(), result.log.begin(), result.log.end());
  return result.added.size();
}

}  // namespace egm::ingest
