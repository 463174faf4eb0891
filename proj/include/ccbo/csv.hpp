#pragma once

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/strategy.hpp"

namespace ccbo {

/// Malformed CSV input. `row` is the 1-based line number (header is row 1).
class CsvError : public DomainError {
public:
  CsvError(std::size_t row, const std::string& msg)
      : DomainError("row " + std::to_string(row) + ": " + msg), row_(row) {}
  std::size_t row() const { return row_; }

private:
  std::size_t row_;
};

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return v;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Splits one line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw CsvError(row, "unterminated quoted field");
  out.push_back(trim(cur));
  return out;
}

inline std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "TRUE" || s == "True" || s == "1" || s == "yes" || s == "Y") return true;
  if (s == "false" || s == "FALSE" || s == "False" || s == "0" || s == "no" || s == "N") return false;
  return std::nullopt;
}

} // namespace detail

/// Column order shared by every CSV file: label, one column per design
/// variable in space order, size, feasible.
inline std::vector<std::string> csv_header(const DesignSpace& space) {
  std::vector<std::string> h{"label"};
  for (const auto& v : space.variables()) h.push_back(v.name);
  h.emplace_back("size");
  h.emplace_back("feasible");
  return h;
}

struct CsvRow {
  std::string label;
  DesignPoint point;
  std::optional<double> size;
  std::optional<bool> feasible;
};

/// Reads rows in the shared schema. Size and feasible may be blank (design-only
/// rows) unless `require_measurements` is set.
inline std::vector<CsvRow> read_csv(std::istream& in, const DesignSpace& space,
                                    bool require_measurements = false) {
  const auto expected = csv_header(space);
  std::string line;
  std::size_t row = 0;
  std::vector<CsvRow> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, row);
    if (!have_header) {
      if (cells != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw CsvError(row, "header must be '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != expected.size()) {
      throw CsvError(row, "expected " + std::to_string(expected.size()) + " fields, got " +
                              std::to_string(cells.size()));
    }
    CsvRow r;
    r.label = cells[0];
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& v = space.variables()[i];
      const std::string& cell = cells[i + 1];
      if (v.is_continuous()) {
        const auto x = parse_number(cell);
        if (!x) throw CsvError(row, "'" + v.name + "': not a number: '" + cell + "'");
        r.point.values.emplace_back(*x);
      } else {
        r.point.values.emplace_back(cell);
      }
    }
    try {
      space.validate(r.point);
    } catch (const DomainError& e) {
      throw CsvError(row, e.what());
    }
    const std::string& size_cell = cells[space.size() + 1];
    const std::string& feas_cell = cells[space.size() + 2];
    if (!size_cell.empty()) {
      r.size = parse_number(size_cell);
      if (!r.size || *r.size < 0.0) throw CsvError(row, "size must be a number >= 0");
    }
    if (!feas_cell.empty()) {
      r.feasible = detail::parse_bool(feas_cell);
      if (!r.feasible) throw CsvError(row, "feasible must be true or false");
    }
    if (require_measurements && (!r.size || !r.feasible)) {
      throw CsvError(row, "size and feasible are required");
    }
    rows.push_back(std::move(r));
  }
  if (!have_header) throw CsvError(row == 0 ? 1 : row, "missing header row");
  return rows;
}

inline std::vector<CsvRow> read_csv_string(const std::string& text, const DesignSpace& space,
                                           bool require_measurements = false) {
  std::istringstream in(text);
  return read_csv(in, space, require_measurements);
}

inline std::vector<Observation> to_observations(const std::vector<CsvRow>& rows) {
  std::vector<Observation> out;
  for (const auto& r : rows) {
    if (!r.size || !r.feasible) throw DomainError("row '" + r.label + "' has no measurement");
    out.push_back({r.point, *r.size, *r.feasible, r.label});
  }
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& out, const DesignSpace& space, const std::vector<CsvRow>& rows) {
  const auto header = csv_header(space);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    out << csv_escape(r.label);
    for (const auto& v : r.point.values) {
      out << ',';
      if (const auto* d = std::get_if<double>(&v)) {
        out << format_number(*d);
      } else {
        out << csv_escape(std::get<std::string>(v));
      }
    }
    out << ',' << (r.size ? format_number(*r.size) : "");
    out << ',' << (r.feasible ? (*r.feasible ? "true" : "false") : "");
    out << '\n';
  }
}

inline std::string write_csv_string(const DesignSpace& space, const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  write_csv(out, space, rows);
  return out.str();
}

inline std::vector<CsvRow> to_rows(const std::vector<Observation>& obs) {
  std::vector<CsvRow> out;
  for (const auto& o : obs) out.push_back({o.label, o.point, o.size, o.feasible});
  return out;
}

} // namespace ccbo
