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
#include "segloss/grid_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "segloss/error.hpp"

namespace segloss {
namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::kParse, what); }

void expect_tag(std::istream& in, const char* tag) {
  std::string word;
  if (!(in >> word) || word != tag) parse_error(std::string("expected header tag ") + tag);
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T value{};
  if (!(in >> value)) parse_error(std::string("failed to read ") + what);
  return value;
}

// Rewraps validation failures from the type constructors as parse errors.
template <typename Fn>
auto validated(Fn&& make) {
  try {
    return make();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse) throw;
    parse_error(e.what());
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& write) {
  std::ofstream out(path);
  if (!out) throw_invalid("cannot open " + path.string() + " for writing");
  write(out);
  if (!out) throw_invalid("failed writing " + path.string());
}

template <typename Fn>
auto with_input(const std::filesystem::path& path, Fn&& read) {
  std::ifstream in(path);
  if (!in) parse_error("cannot open " + path.string());
  try {
    return read(in);
  } catch (const Error& e) {
    parse_error(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_soft(std::ostream& out, const SoftSegmentation& soft) {
  out << "SOFT " << soft.height() << ' ' << soft.width() << ' ' << soft.classes() << '\n';
  for (std::size_t i = 0; i < soft.pixels(); ++i) {
    const auto row = soft.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k > 0) out << ' ';
      out << fmt_double(row[k]);
    }
    out << '\n';
  }
}

void write_hard(std::ostream& out, const HardSegmentation& hard) {
  out << "HARD " << hard.height() << ' ' << hard.width() << ' ' << hard.classes() << '\n';
  for (int r = 0; r < hard.height(); ++r) {
    for (int c = 0; c < hard.width(); ++c) {
      if (c > 0) out << ' ';
      out << hard.at(r, c);
    }
    out << '\n';
  }
}

void write_superpixels(std::ostream& out, const SuperpixelMap& sp) {
  out << "SP " << sp.height() << ' ' << sp.width() << ' ' << sp.count() << '\n';
  for (int r = 0; r < sp.height(); ++r) {
    for (int c = 0; c < sp.width(); ++c) {
      if (c > 0) out << ' ';
      out << sp.at(static_cast<std::size_t>(r) * static_cast<std::size_t>(sp.width()) +
                   static_cast<std::size_t>(c));
    }
    out << '\n';
  }
}

SoftSegmentation read_soft(std::istream& in) {
  expect_tag(in, "SOFT");
  const int h = read_value<int>(in, "height");
  const int w = read_value<int>(in, "width");
  const int k = read_value<int>(in, "class count");
  if (h <= 0 || w <= 0 || k < 2) parse_error("invalid SOFT header");
  std::vector<double> values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
                             static_cast<std::size_t>(k));
  for (double& v : values) v = read_value<double>(in, "probability");
  return validated([&] { return SoftSegmentation(h, w, k, std::move(values)); });
}

HardSegmentation read_hard(std::istream& in) {
  expect_tag(in, "HARD");
  const int h = read_value<int>(in, "height");
  const int w = read_value<int>(in, "width");
  const int k = read_value<int>(in, "class count");
  if (h <= 0 || w <= 0 || k < 1) parse_error("invalid HARD header");
  std::vector<int> labels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int& v : labels) v = read_value<int>(in, "label");
  return validated([&] { return HardSegmentation(h, w, k, std::move(labels)); });
}

SuperpixelMap read_superpixels(std::istream& in) {
  expect_tag(in, "SP");
  const int h = read_value<int>(in, "height");
  const int w = read_value<int>(in, "width");
  const int s = read_value<int>(in, "superpixel count");
  if (h <= 0 || w <= 0 || s < 1) parse_error("invalid SP header");
  std::vector<int> ids(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int& v : ids) v = read_value<int>(in, "superpixel id");
  SuperpixelMap map = validated([&] { return SuperpixelMap(h, w, std::move(ids)); });
  if (map.count() != s) parse_error("SP header count does not match ids");
  return map;
}

void save_soft(const std::filesystem::path& path, const SoftSegmentation& soft) {
  with_output(path, [&](std::ostream& out) { write_soft(out, soft); });
}
void save_hard(const std::filesystem::path& path, const HardSegmentation& hard) {
  with_output(path, [&](std::ostream& out) { write_hard(out, hard); });
}
void save_superpixels(const std::filesystem::path& path, const SuperpixelMap& sp) {
  with_output(path, [&](std::ostream& out) { write_superpixels(out, sp); });
}

SoftSegmentation load_soft(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_soft(in); });
}
HardSegmentation load_hard(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_hard(in); });
}
SuperpixelMap load_superpixels(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_superpixels(in); });
}

}  // namespace segloss
