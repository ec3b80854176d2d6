#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aerodet {

/// Output-resolution cell coordinate.
struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Dense height x width x channels grid, row-major, channel-last.
class DenseGrid {
 public:
  DenseGrid() = default;
  DenseGrid(int width, int height, int channels, double fill = 0.0)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const DenseGrid& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const DenseGrid&, const DenseGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

}  // namespace aerodet
