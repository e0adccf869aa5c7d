#include "medcurate/pooling.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "medcurate/error.hpp"

namespace medcurate::pooling {

namespace {

Error PoolingError(std::string code, const std::string& message) {
  return Error(ErrorKind::kConfig, "pooling." + std::move(code), message);
}

}  // namespace

PatchGrid::PatchGrid(std::size_t height, std::size_t width, std::size_t dim,
                     std::vector<double> values)
    : height_(height), width_(width), dim_(dim), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0 || dim_ == 0) {
    throw PoolingError("bad_grid", "height, width and dim must be >= 1");
  }
  if (values_.size() != height_ * width_ * dim_) {
    throw PoolingError("bad_grid", fmt::format("expected {} values, got {}",
                                               height_ * width_ * dim_, values_.size()));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw PoolingError("bad_grid", "values must be finite");
  }
}

PatchGrid::PatchGrid(std::size_t height, std::size_t width, std::size_t dim)
    : PatchGrid(height, width, dim, std::vector<double>(height * width * dim, 0.0)) {}

PatchGrid PatchGrid::FromJson(const nlohmann::json& doc) {
  try {
    return PatchGrid(doc.at("height").get<std::size_t>(), doc.at("width").get<std::size_t>(),
                     doc.at("dim").get<std::size_t>(),
                     doc.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw PoolingError("bad_grid", e.what());
  }
}

nlohmann::json PatchGrid::ToJson() const {
  return {{"height", height_}, {"width", width_}, {"dim", dim_}, {"values", values_}};
}

Region RegionBounds(std::size_t in_dim, std::size_t out_dim, std::size_t index) {
  if (out_dim < 1 || out_dim > in_dim) {
    throw PoolingError("bad_extent", fmt::format("need 1 <= out ({}) <= in ({})", out_dim, in_dim));
  }
  if (index >= out_dim) {
    throw PoolingError("bad_index", fmt::format("index {} outside [0, {})", index, out_dim));
  }
  const std::size_t start = index * in_dim / out_dim;
  const std::size_t end = ((index + 1) * in_dim + out_dim - 1) / out_dim;
  return {start, end};
}

PatchGrid AdaptiveAvgPool(const PatchGrid& grid, std::size_t out_h, std::size_t out_w) {
  if (out_h > grid.height() || out_w > grid.width()) {
    throw PoolingError("upsampling", fmt::format("{}x{} -> {}x{} is not a reduction",
                                                 grid.height(), grid.width(), out_h, out_w));
  }
  PatchGrid out(out_h, out_w, grid.dim());
  std::vector<double> acc(grid.dim());
  for (std::size_t i = 0; i < out_h; ++i) {
    const Region rows = RegionBounds(grid.height(), out_h, i);
    for (std::size_t j = 0; j < out_w; ++j) {
      const Region cols = RegionBounds(grid.width(), out_w, j);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t r = rows.start; r < rows.end; ++r) {
        for (std::size_t c = cols.start; c < cols.end; ++c) {
          for (std::size_t d = 0; d < grid.dim(); ++d) acc[d] += grid.at(r, c, d);
        }
      }
      const double count =
          static_cast<double>((rows.end - rows.start) * (cols.end - cols.start));
      for (std::size_t d = 0; d < grid.dim(); ++d) out.at(i, j, d) = acc[d] / count;
    }
  }
  return out;
}

PatchGrid ProjectTokens(const PatchGrid& grid, std::size_t target_tokens) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(target_tokens))));
  if (target_tokens == 0 || side * side != target_tokens) {
    throw PoolingError("non_square_target", fmt::format("{} is not a perfect square", target_tokens));
  }
  if (side > std::min(grid.height(), grid.width())) {
    throw PoolingError("oversized_target",
                       fmt::format("{} tokens need a {}x{} output from a {}x{} grid",
                                   target_tokens, side, side, grid.height(), grid.width()));
  }
  return AdaptiveAvgPool(grid, side, side);
}

}  // namespace medcurate::pooling
