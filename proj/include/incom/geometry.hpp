// Copyright 2026 The incom Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace incom::geometry {

/// Axis-aligned box in normalized image coordinates; y grows downward.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool operator==(const Box&) const = default;
};

bool is_valid(const Box& box);
/// Throws std::invalid_argument naming the violated constraint.
void validate(const Box& box);

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

struct PatchGrid {
  std::size_t rows = 8;
  std::size_t cols = 8;

  std::size_t size() const { return rows * cols; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
  std::size_t row_of(std::size_t index) const { return index / cols; }
  std::size_t col_of(std::size_t index) const { return index % cols; }
  /// Normalized extent of one patch.
  Box patch_box(std::size_t index) const;

  bool operator==(const PatchGrid&) const = default;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}
  explicit BinaryMask(std::vector<std::uint8_t> bits);
  static BinaryMask from_indices(std::size_t n, std::span<const std::size_t> set_indices);

  std::size_t size() const { return bits_.size(); }
  bool test(std::size_t i) const { return bits_.at(i) != 0; }
  void set(std::size_t i, bool v = true) { bits_.at(i) = v ? 1 : 0; }

  std::size_t popcount() const;
  bool none() const { return popcount() == 0; }
  bool all() const { return popcount() == size(); }
  /// Positions with a set bit, ascending.
  std::vector<std::size_t> indices() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  BinaryMask operator|(const BinaryMask& other) const;
  BinaryMask operator&(const BinaryMask& other) const;
  /// Set difference: bits of this mask that are not set in `other`.
  BinaryMask minus(const BinaryMask& other) const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct MaskSet {
  PatchGrid grid;
  std::vector<BinaryMask> instance_masks;
  std::vector<BinaryMask> surrounding_masks;
  BinaryMask global_mask;

  std::size_t instance_count() const { return instance_masks.size(); }
};

inline constexpr double kDefaultOverlapThreshold = 0.5;

/// A patch is set when at least `overlap_threshold` of its area lies inside
/// the box. If nothing qualifies, only the patch holding the box center is
/// set; a center on a patch boundary goes to the lower index.
BinaryMask instance_mask(const Box& box, const PatchGrid& grid,
                         double overlap_threshold = kDefaultOverlapThreshold);

/// Union of the other masks minus mask i. When that is empty: the global mask
/// for K = 1, otherwise the complement of mask i (global if mask i is full).
BinaryMask surrounding_mask(std::span<const BinaryMask> instance_masks, std::size_t i);

MaskSet build_mask_set(std::span<const Box> boxes, const PatchGrid& grid,
                       double overlap_threshold = kDefaultOverlapThreshold);

nlohmann::json mask_to_json(const BinaryMask& mask, const PatchGrid& grid);
nlohmann::json mask_set_to_json(const MaskSet& masks);

}  // namespace incom::geometry
