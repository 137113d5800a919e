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
#ifndef SEGLOSS_GRID_IO_HPP_
#define SEGLOSS_GRID_IO_HPP_

// Text grid formats:
//   SOFT H W K   followed by H*W lines of K probabilities (row-major pixels)
//   HARD H W K   followed by H lines of W labels
//   SP H W S     followed by H lines of W superpixel ids
// Readers validate the same invariants as the in-memory types and throw
// Error(kParse) on malformed text.

#include <filesystem>
#include <iosfwd>

#include "segloss/grid.hpp"

namespace segloss {

void write_soft(std::ostream& out, const SoftSegmentation& soft);
void write_hard(std::ostream& out, const HardSegmentation& hard);
void write_superpixels(std::ostream& out, const SuperpixelMap& sp);

SoftSegmentation read_soft(std::istream& in);
HardSegmentation read_hard(std::istream& in);
SuperpixelMap read_superpixels(std::istream& in);

void save_soft(const std::filesystem::path& path, const SoftSegmentation& soft);
void save_hard(const std::filesystem::path& path, const HardSegmentation& hard);
void save_superpixels(const std::filesystem::path& path, const SuperpixelMap& sp);

SoftSegmentation load_soft(const std::filesystem::path& path);
HardSegmentation load_hard(const std::filesystem::path& path);
SuperpixelMap load_superpixels(const std::filesystem::path& path);

}  // namespace segloss

#endif  // SEGLOSS_GRID_IO_HPP_
