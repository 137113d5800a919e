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
#include "report.hpp"

#include <cstdio>
#include <ostream>

namespace segloss::cli {
namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void upsert(std::vector<std::pair<std::string, std::string>>& items, const std::string& key,
            std::string value) {
  for (auto& [k, v] : items) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  items.emplace_back(key, std::move(value));
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void RunReport::config(const std::string& key, const std::string& value) {
  upsert(config_, key, value);
}

void RunReport::config(const std::string& key, double value) {
  upsert(config_, key, format_number(value));
}

void RunReport::metric(const std::string& key, double value) {
  upsert(metrics_, key, format_number(value));
  numbers_[key] = value;
}

void RunReport::metric(const std::string& key, const std::string& value) {
  upsert(metrics_, key, value);
}

std::optional<double> RunReport::number(const std::string& key) const {
  auto it = numbers_.find(key);
  if (it == numbers_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> RunReport::text(const std::string& key) const {
  for (const auto& [k, v] : metrics_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void RunReport::write(std::ostream& out, ReportFormat format, bool include_wall_time) const {
  if (format == ReportFormat::kCsv) {
    out << "section,key,value\n";
    out << "run,command," << csv_escape(command_) << '\n';
    out << "run,version," << kVersion << '\n';
    if (seed_) out << "run,seed," << *seed_ << '\n';
    for (const auto& [k, v] : config_) out << "config," << csv_escape(k) << ',' << csv_escape(v) << '\n';
    for (const auto& [k, v] : metrics_) out << "metric," << csv_escape(k) << ',' << csv_escape(v) << '\n';
    for (const auto& d : diagnostics_) out << "diagnostic,," << csv_escape(d) << '\n';
    if (include_wall_time) out << "run,wall_time_s," << format_number(wall_seconds_) << '\n';
    for (const auto& t : tables_) {
      out << "\ntable," << csv_escape(t.name) << ",\n";
      for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << csv_escape(t.columns[c]);
      out << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_escape(row[c]);
        out << '\n';
      }
    }
    return;
  }
  out << "command = " << command_ << '\n';
  out << "version = " << kVersion << '\n';
  if (seed_) out << "seed = " << *seed_ << '\n';
  out << "[config]\n";
  for (const auto& [k, v] : config_) out << k << " = " << v << '\n';
  out << "[metrics]\n";
  for (const auto& [k, v] : metrics_) out << k << " = " << v << '\n';
  for (const auto& t : tables_) {
    out << "[table " << t.name << "]\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
  }
  if (!diagnostics_.empty()) {
    out << "[diagnostics]\n";
    for (const auto& d : diagnostics_) out << d << '\n';
  }
  if (include_wall_time) out << "wall_time_s = " << format_number(wall_seconds_) << '\n';
}

}  // namespace segloss::cli
