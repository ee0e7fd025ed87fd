#include "celllts/cli_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace celllts {

Index CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Index>(j);
  return -1;
}

namespace {

// Splits one logical record starting at `pos`; advances past its newline.
std::vector<std::string> next_record(const std::string& text, std::size_t& pos, int lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw Error("csv line " + std::to_string(lineno) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable parse_csv_table(const std::string& text) {
  CsvTable t;
  std::size_t pos = 0;
  int lineno = 1;
  if (text.empty()) throw Error("csv: missing header row");
  t.header = next_record(text, pos, lineno);
  for (auto& h : t.header) h = trim(h);
  while (pos < text.size()) {
    ++lineno;
    auto rec = next_record(text, pos, lineno);
    if (rec.size() == 1 && trim(rec[0]).empty()) continue;
    if (rec.size() != t.header.size()) {
      throw Error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                  " fields, found " + std::to_string(rec.size()));
    }
    t.rows.push_back(std::move(rec));
  }
  return t;
}

bool parse_cell(const std::string& field, double& out) {
  const std::string s = trim(field);
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") {
    out = kMissing;
    return true;
  }
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

namespace {

Vector numeric_column(const CsvTable& t, Index j) {
  Vector v(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!parse_cell(t.rows[i][static_cast<std::size_t>(j)], v(static_cast<Index>(i)))) {
      throw Error("csv: column '" + t.header[static_cast<std::size_t>(j)] + "' is not numeric (row " +
                  std::to_string(i + 1) + ": '" + t.rows[i][static_cast<std::size_t>(j)] + "')");
    }
  }
  return v;
}

}  // namespace

MaskedMatrix select_columns(const CsvTable& table, const std::vector<std::string>& names) {
  Matrix vals(static_cast<Index>(table.rows.size()), static_cast<Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const Index j = table.column(names[c]);
    if (j < 0) throw Error("csv: missing column '" + names[c] + "'");
    vals.col(static_cast<Index>(c)) = numeric_column(table, j);
  }
  return MaskedMatrix::from_nan(std::move(vals), names);
}

CsvData parse_csv_text(const std::string& text, const std::string& response_column,
                       const std::string& label_column) {
  const CsvTable t = parse_csv_table(text);
  Index resp = -1, label = -1;
  if (!response_column.empty()) {
    resp = t.column(response_column);
    if (resp < 0) throw Error("csv: unknown response column '" + response_column + "'");
  }
  if (!label_column.empty()) {
    label = t.column(label_column);
    if (label < 0) throw Error("csv: unknown label column '" + label_column + "'");
    if (label == resp) throw Error("csv: label column equals response column");
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (static_cast<Index>(j) != resp && static_cast<Index>(j) != label) names.push_back(t.header[j]);

  CsvData out;
  out.x = select_columns(t, names);
  if (resp >= 0) {
    out.y = numeric_column(t, resp);
    out.response_name = response_column;
  }
  if (label >= 0) {
    for (const auto& r : t.rows) out.row_labels.push_back(r[static_cast<std::size_t>(label)]);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

CsvData parse_csv(const std::string& path, const std::string& response_column,
                  const std::string& label_column) {
  return parse_csv_text(read_file(path), response_column, label_column);
}

std::string format_csv(const MaskedMatrix& m) {
  std::string out;
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out += ',';
    out += m.column_names.empty() ? "V" + std::to_string(j + 1)
                                  : quote_if_needed(m.column_names[static_cast<std::size_t>(j)]);
  }
  out += '\n';
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      if (!m.is_observed(i, j)) {
        out += "NA";
        continue;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", m.values(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const MaskedMatrix& m) { write_file(path, format_csv(m)); }

}  // namespace celllts
