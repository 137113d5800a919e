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
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "segloss/error.hpp"
#include "segloss/grid_io.hpp"
#include "test_util.hpp"

namespace segloss {
namespace {

TEST(GridIo, SoftRoundTripIsExact) {
  std::mt19937_64 rng(1);
  const SoftSegmentation s = testing::random_soft(4, 3, 5, rng);
  std::stringstream buf;
  write_soft(buf, s);
  const SoftSegmentation back = read_soft(buf);
  EXPECT_EQ(back.shape(), s.shape());
  for (std::size_t j = 0; j < s.values().size(); ++j) EXPECT_EQ(back.values()[j], s.values()[j]);
}

TEST(GridIo, HardAndSuperpixelRoundTrip) {
  std::mt19937_64 rng(2);
  const HardSegmentation h = testing::random_labels(5, 6, 4, rng);
  std::stringstream buf;
  write_hard(buf, h);
  EXPECT_EQ(read_hard(buf), h);

  const SuperpixelMap sp(2, 2, {0, 0, 1, 1});
  std::stringstream sbuf;
  write_superpixels(sbuf, sp);
  const SuperpixelMap back = read_superpixels(sbuf);
  EXPECT_EQ(back.count(), 2);
  EXPECT_TRUE(std::equal(back.ids().begin(), back.ids().end(), sp.ids().begin()));
}

TEST(GridIo, MalformedInputIsParseError) {
  auto kind_of = [](const std::string& text) {
    std::stringstream in(text);
    try {
      read_hard(in);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kInvalidInput;
  };
  EXPECT_EQ(kind_of("SOFT 1 1 2\n0.5 0.5\n"), ErrorKind::kParse);
  EXPECT_EQ(kind_of("HARD 1 2 2\n0\n"), ErrorKind::kParse);
  EXPECT_EQ(kind_of("HARD 1 2 2\n0 7\n"), ErrorKind::kParse);
  EXPECT_EQ(kind_of(""), ErrorKind::kParse);
}

TEST(GridIo, MissingFileIsParseError) {
  try {
    load_soft("/nonexistent/segloss/file.soft");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

TEST(GridIo, FileRoundTrip) {
  testing::TempDir dir("io");
  const HardSegmentation h(1, 3, 3, {2, 1, 0});
  save_hard(dir.path() / "a.hard", h);
  EXPECT_EQ(load_hard(dir.path() / "a.hard"), h);
}

}  // namespace
}  // namespace segloss
