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

#include "incom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace incom::geometry {

bool is_valid(const Box& b) {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in_unit(b.x_min) && in_unit(b.y_min) && in_unit(b.x_max) && in_unit(b.y_max) &&
         b.x_min < b.x_max && b.y_min < b.y_max;
}

void validate(const Box& b) {
  const auto fmt = [&b] {
    return "(" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
           std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + ")";
  };
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
    throw std::invalid_argument("degenerate box " + fmt());
  }
  if (!is_valid(b)) throw std::invalid_argument("box outside the unit square " + fmt());
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double iou(const Box& a, const Box& b) {
  validate(a);
  validate(b);
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

Box PatchGrid::patch_box(std::size_t idx) const {
  const double r = static_cast<double>(row_of(idx));
  const double c = static_cast<double>(col_of(idx));
  const double h = static_cast<double>(rows);
  const double w = static_cast<double>(cols);
  return {c / w, r / h, (c + 1.0) / w, (r + 1.0) / h};
}

BinaryMask::BinaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw std::invalid_argument("mask bits must be 0 or 1");
  }
}

BinaryMask BinaryMask::from_indices(std::size_t n, std::span<const std::size_t> set_indices) {
  BinaryMask m(n);
  for (std::size_t i : set_indices) m.set(i);
  return m;
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::vector<std::size_t> BinaryMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

namespace {

void check_same_size(const BinaryMask& a, const BinaryMask& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask length mismatch");
}

// Cell index for a coordinate in [0, 1]; values on a boundary go to the lower cell.
std::size_t cell_of(double v, std::size_t cells) {
  const double scaled = v * static_cast<double>(cells);
  const double idx = std::ceil(scaled) - 1.0;
  return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(cells - 1)));
}

}  // namespace

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  check_same_size(*this, other);
  BinaryMask out(size());
  for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  check_same_size(*this, other);
  BinaryMask out(size());
  for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

BinaryMask BinaryMask::minus(const BinaryMask& other) const {
  check_same_size(*this, other);
  BinaryMask out(size());
  for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & (other.bits_[i] ^ 1);
  return out;
}

BinaryMask instance_mask(const Box& box, const PatchGrid& grid, double overlap_threshold) {
  validate(box);
  if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0)) {
    throw std::invalid_argument("overlap threshold must lie in (0, 1]");
  }
  if (grid.rows == 0 || grid.cols == 0) throw std::invalid_argument("empty patch grid");
  const double patch_area = 1.0 / static_cast<double>(grid.size());
  BinaryMask mask(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double frac = intersection_area(grid.patch_box(n), box) / patch_area;
    if (frac >= overlap_threshold) mask.set(n);
  }
  if (mask.none()) {
    mask.set(grid.index(cell_of(box.center_y(), grid.rows), cell_of(box.center_x(), grid.cols)));
  }
  return mask;
}

BinaryMask surrounding_mask(std::span<const BinaryMask> instance_masks, std::size_t i) {
  if (instance_masks.empty()) throw std::invalid_argument("surrounding_mask needs K >= 1");
  if (i >= instance_masks.size()) {
    throw std::out_of_range("instance index " + std::to_string(i) + " out of range for K=" +
                            std::to_string(instance_masks.size()));
  }
  const std::size_t n = instance_masks[i].size();
  BinaryMask others(n);
  for (std::size_t j = 0; j < instance_masks.size(); ++j) {
    if (j != i) others = others | instance_masks[j];
  }
  BinaryMask result = others.minus(instance_masks[i]);
  if (!result.none()) return result;
  // K = 1 gets the global mask. With K >= 2 every other instance sits inside
  // instance i, so take everything outside instance i to keep the two contexts
  // disjoint; the global mask remains the last resort.
  if (instance_masks.size() >= 2) {
    BinaryMask outside = BinaryMask(n, true).minus(instance_masks[i]);
    if (!outside.none()) return outside;
  }
  return BinaryMask(n, true);
}

MaskSet build_mask_set(std::span<const Box> boxes, const PatchGrid& grid,
                       double overlap_threshold) {
  if (boxes.empty()) throw std::invalid_argument("build_mask_set needs at least one box");
  MaskSet set;
  set.grid = grid;
  set.global_mask = BinaryMask(grid.size(), true);
  for (const Box& b : boxes) set.instance_masks.push_back(instance_mask(b, grid, overlap_threshold));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    set.surrounding_masks.push_back(surrounding_mask(set.instance_masks, i));
  }
  return set;
}

nlohmann::json mask_to_json(const BinaryMask& mask, const PatchGrid& grid) {
  nlohmann::json bits = nlohmann::json::array();
  for (auto b : mask.bits()) bits.push_back(static_cast<int>(b));
  return {{"rows", grid.rows}, {"cols", grid.cols}, {"bits", std::move(bits)}};
}

nlohmann::json mask_set_to_json(const MaskSet& masks) {
  nlohmann::json intra = nlohmann::json::array();
  nlohmann::json inter = nlohmann::json::array();
  for (const auto& m : masks.instance_masks) intra.push_back(mask_to_json(m, masks.grid));
  for (const auto& m : masks.surrounding_masks) inter.push_back(mask_to_json(m, masks.grid));
  return {{"grid", {{"rows", masks.grid.rows}, {"cols", masks.grid.cols}}},
          {"instance_masks", std::move(intra)},
          {"surrounding_masks", std::move(inter)},
          {"global_mask", mask_to_json(masks.global_mask, masks.grid)}};
}

}  // namespace incom::geometry
