// Copyright 2026 The cfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// CSV input and output for particle tables. Quoting follows RFC 4180: fields
// containing commas, quotes, or line breaks are quoted and embedded quotes
// doubled. Cells are doubles; NA round-trips as the literal "NA".

#ifndef CFSIM_IO_HPP
#define CFSIM_IO_HPP

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

inline std::string csv_escape(const std::string& field) {
  bool needs_quotes = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs_quotes = true;
      break;
    }
  }
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Writes a header row and one row per particle. `columns` restricts and
/// orders the output; empty means every column in table order.
inline void write_csv(std::ostream& os, const ParticleTable& t,
                      const std::vector<std::string>& columns = {}) {
  const std::vector<std::string>& names =
      columns.empty() ? t.names() : columns;
  std::vector<const std::vector<double>*> cols;
  cols.reserve(names.size());
  for (const auto& name : names) cols.push_back(&t.col(name));
  for (size_t c = 0; c < names.size(); ++c) {
    if (c) os << ',';
    os << csv_escape(names[c]);
  }
  os << '\n';
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ',';
      os << format_double((*cols[c])[r]);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed while writing CSV output");
}

inline void write_csv_file(const std::string& path, const ParticleTable& t,
                           const std::vector<std::string>& columns = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_csv(f, t, columns);
  f.close();
  if (!f) throw IoError("failed to write '" + path + "'");
}

namespace detail {

/// Splits one CSV record, honoring quoted fields that may span raw lines.
/// Returns false at end of input.
inline bool read_csv_record(std::istream& is, std::vector<std::string>& out) {
  out.clear();
  int c = is.get();
  if (c == std::istream::traits_type::eof()) return false;
  std::string field;
  bool in_quotes = false;
  while (true) {
    if (c == std::istream::traits_type::eof()) {
      if (in_quotes) throw IoError("CSV input ends inside a quoted field");
      break;
    }
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (is.peek() == '"') {
          field += '"';
          is.get();
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (is.peek() == '\n') is.get();
      break;
    } else {
      field += ch;
    }
    c = is.get();
  }
  out.push_back(std::move(field));
  return true;
}

inline double parse_csv_cell(const std::string& text, size_t row, size_t col) {
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan") {
    return kNa;
  }
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw IoError("CSV cell at row " + std::to_string(row + 1) + ", column " +
                  std::to_string(col + 1) + " is not a number: '" + text +
                  "'");
  }
  return v;
}

}  // namespace detail

/// Reads a header row plus numeric records. Every record must match the
/// header width; blank and NA cells become NA.
inline ParticleTable read_csv(std::istream& is) {
  std::vector<std::string> header;
  if (!detail::read_csv_record(is, header)) {
    throw IoError("CSV input is empty; expected a header row");
  }
  std::vector<std::vector<double>> cols(header.size());
  std::vector<std::string> record;
  size_t row = 0;
  while (detail::read_csv_record(is, record)) {
    if (record.size() == 1 && record[0].empty()) continue;  // blank line
    if (record.size() != header.size()) {
      throw IoError("CSV row " + std::to_string(row + 1) + " has " +
                    std::to_string(record.size()) + " fields, header has " +
                    std::to_string(header.size()));
    }
    for (size_t c = 0; c < record.size(); ++c) {
      cols[c].push_back(detail::parse_csv_cell(record[c], row, c));
    }
    ++row;
  }
  ParticleTable t;
  for (size_t c = 0; c < header.size(); ++c) {
    if (t.has_col(header[c])) {
      throw IoError("CSV header repeats column '" + header[c] + "'");
    }
    t.add_col(header[c], std::move(cols[c]));
  }
  return t;
}

inline ParticleTable read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(f);
}

}  // namespace cfsim

#endif  // CFSIM_IO_HPP
