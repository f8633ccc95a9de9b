#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polar/errors.hpp"

namespace polar {

/// Row-major single-channel raster.
template <typename T>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw DimensionError("negative image dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Plane(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height) {
      throw DimensionError("pixel buffer does not match " +
                           std::to_string(width) + "x" +
                           std::to_string(height));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  const std::vector<T>& vector() const { return data_; }

  bool same_shape(const Plane& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Plane& a, const Plane& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image = Plane<double>;
using Image16 = Plane<std::uint16_t>;
using Mask = Plane<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Plane<A>& a, const Plane<B>& b,
                        const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " +
                         std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
  }
}

inline double mean(const Image& img) {
  if (img.empty()) return 0.0;
  double s = 0.0;
  for (double v : img.pixels()) s += v;
  return s / static_cast<double>(img.size());
}

inline double max_value(const Image& img) {
  return img.empty() ? 0.0
                     : *std::max_element(img.pixels().begin(),
                                         img.pixels().end());
}

inline double min_value(const Image& img) {
  return img.empty() ? 0.0
                     : *std::min_element(img.pixels().begin(),
                                         img.pixels().end());
}

}  // namespace polar
