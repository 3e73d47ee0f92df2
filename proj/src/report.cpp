// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpgrad/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "dpgrad/errors.hpp"

namespace dpgrad {
namespace {

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string cell_to_csv(const ReportCell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return csv_escape(*s);
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&cell)) {
    return std::to_string(*i);
  }
  return std::get<bool>(cell) ? "true" : "false";
}

void cell_to_json(nlohmann::ordered_json& obj, const std::string& key,
                  const ReportCell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) {
    obj[key] = *s;
  } else if (const auto* d = std::get_if<double>(&cell)) {
    if (std::isfinite(*d)) {
      obj[key] = *d;
    } else {
      obj[key] = *d > 0 ? "inf" : "-inf";
    }
  } else if (const auto* i = std::get_if<std::int64_t>(&cell)) {
    obj[key] = *i;
  } else {
    obj[key] = std::get<bool>(cell);
  }
}

void validate(const ReportTable& table) {
  if (table.header.empty()) {
    throw InvalidParameter("emit_report: empty header");
  }
  if (table.rows.empty()) {
    throw InvalidParameter("emit_report: empty record set");
  }
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw LayoutError("emit_report: ragged row");
    }
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

void emit_report(const ReportTable& table, ReportFormat format,
                 std::ostream& out) {
  validate(table);
  if (format == ReportFormat::csv) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(table.header[i]);
    }
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << cell_to_csv(row[i]);
      }
      out << '\n';
    }
    return;
  }
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) {
      cell_to_json(obj, table.header[i], row[i]);
    }
    records.push_back(std::move(obj));
  }
  out << records.dump(2) << '\n';
}

void emit_report_file(const ReportTable& table, ReportFormat format,
                      const std::string& path) {
  validate(table);  // before the file exists
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report destination: " + path);
  emit_report(table, format, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace dpgrad
