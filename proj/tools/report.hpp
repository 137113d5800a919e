/* Copyright 2026 The segloss Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SEGLOSS_TOOLS_REPORT_HPP_
#define SEGLOSS_TOOLS_REPORT_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace segloss::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

enum class ReportFormat { kText, kCsv };

struct ReportTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Structured result of one command. Numbers are stored preformatted with 9
// significant digits so text output diffs cleanly; the raw values are kept
// alongside for programmatic checks.
class RunReport {
 public:
  explicit RunReport(std::string command) : command_(std::move(command)) {}

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void config(const std::string& key, const std::string& value);
  void config(const std::string& key, double value);
  void metric(const std::string& key, double value);
  void metric(const std::string& key, const std::string& value);
  void add_table(ReportTable table) { tables_.push_back(std::move(table)); }
  void diagnostic(std::string line) { diagnostics_.push_back(std::move(line)); }
  void set_wall_seconds(double s) { wall_seconds_ = s; }

  const std::string& command() const { return command_; }
  std::optional<double> number(const std::string& key) const;
  std::optional<std::string> text(const std::string& key) const;
  const std::vector<ReportTable>& tables() const { return tables_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  void write(std::ostream& out, ReportFormat format, bool include_wall_time = true) const;

 private:
  std::string command_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::pair<std::string, std::string>> metrics_;
  std::map<std::string, double> numbers_;
  std::vector<ReportTable> tables_;
  std::vector<std::string> diagnostics_;
  double wall_seconds_ = 0.0;
};

std::string format_number(double v);

}  // namespace segloss::cli

#endif  // SEGLOSS_TOOLS_REPORT_HPP_
