#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace medcurate::pooling {

// Dense height x width x dim grid, row-major with channels innermost.
class PatchGrid {
 public:
  // Throws medcurate::Error (kConfig) on zero extents, size mismatch or
  // non-finite values.
  PatchGrid(std::size_t height, std::size_t width, std::size_t dim,
            std::vector<double> values);
  // Zero-filled grid.
  PatchGrid(std::size_t height, std::size_t width, std::size_t dim);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return values_[(row * width_ + col) * dim_ + channel];
  }
  double& at(std::size_t row, std::size_t col, std::size_t channel) {
    return values_[(row * width_ + col) * dim_ + channel];
  }

  static PatchGrid FromJson(const nlohmann::json& doc);
  nlohmann::json ToJson() const;

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t dim_;
  std::vector<double> values_;
};

struct Region {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  friend bool operator==(const Region&, const Region&) = default;
};

// start = floor(i * in / out), end = ceil((i + 1) * in / out). Regions
// overlap when out does not divide in.
Region RegionBounds(std::size_t in_dim, std::size_t out_dim, std::size_t index);

// Each output cell is the mean of its input region, accumulated in double.
PatchGrid AdaptiveAvgPool(const PatchGrid& grid, std::size_t out_h, std::size_t out_w);

// Pools to a sqrt(target) x sqrt(target) grid; target must be a perfect
// square no larger than the input's smaller side squared.
PatchGrid ProjectTokens(const PatchGrid& grid, std::size_t target_tokens);

}  // namespace medcurate::pooling
