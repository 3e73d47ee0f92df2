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

#ifndef DPGRAD_REPORT_HPP_
#define DPGRAD_REPORT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace dpgrad {

using ReportCell = std::variant<std::string, double, std::int64_t, bool>;

struct ReportTable {
  std::vector<std::string> header;
  std::vector<std::vector<ReportCell>> rows;
};

enum class ReportFormat { csv, json };

/// Deterministic decimal rendering used by every CSV emitter.
std::string format_double(double value);

/// Emits the table. CSV always carries the header row; JSON is an array of
/// objects keyed by the header. Byte-stable for identical inputs. Throws
/// InvalidParameter on an empty record set and LayoutError on ragged rows.
void emit_report(const ReportTable& table, ReportFormat format,
                 std::ostream& out);

/// File variant; validates before creating the file, so an empty record set
/// leaves no file behind.
void emit_report_file(const ReportTable& table, ReportFormat format,
                      const std::string& path);

}  // namespace dpgrad

#endif  // DPGRAD_REPORT_HPP_
