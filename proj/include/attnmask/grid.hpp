#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attnmask/error.hpp"

namespace attnmask {

struct Dims {
  int height = 0;
  int width = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
  std::size_t area() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
};

inline std::string to_string(Dims d) { return std::to_string(d.height) + "x" + std::to_string(d.width); }

// Row-major 2-D grid with value semantics.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : dims_{height, width}, data_(checked_area(height, width), fill) {}
  explicit Grid(Dims d, T fill = T{}) : Grid(d.height, d.width, fill) {}
  Grid(int height, int width, std::vector<T> values) : dims_{height, width}, data_(std::move(values)) {
    if (data_.size() != checked_area(height, width)) {
      throw ValidationError("grid payload size does not match " + to_string(dims_));
    }
  }

  int height() const noexcept { return dims_.height; }
  int width() const noexcept { return dims_.width; }
  Dims dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x) { return data_[index(y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* row(int y) { return data_.data() + index(y, 0); }
  const T* row(int y) const { return data_.data() + index(y, 0); }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_area(int height, int width) {
    if (height < 0 || width < 0) throw ValidationError("negative grid dimensions");
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x);
  }

  Dims dims_{};
  std::vector<T> data_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using RgbImage = Grid<Rgb>;

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kForeground = 1;
inline constexpr std::uint8_t kIgnoreLabel = 255;

// {0 = background, 1 = foreground}.
using BinaryMask = Grid<std::uint8_t>;
// Class ids, with kIgnoreLabel for pixels excluded from evaluation.
using SegMask = Grid<std::uint8_t>;
// Coarse fg/bg estimate used as the threshold-matching target. Values {0,1}.
using AffinityMap = BinaryMask;

// Single-channel map with values in [0, 1].
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  // Throws ValidationError if any value is non-finite or outside [0, 1].
  explicit ProbabilityMap(Grid<double> values);

  int height() const noexcept { return values_.height(); }
  int width() const noexcept { return values_.width(); }
  Dims dims() const noexcept { return values_.dims(); }
  double operator()(int y, int x) const { return values_(y, x); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }
  const Grid<double>& grid() const noexcept { return values_; }
  double max() const;

  friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

 private:
  Grid<double> values_;
};

// Throws ValidationError unless every value is 0 or 1.
void require_binary(const BinaryMask& mask, const std::string& what);
void require_same_dims(Dims a, Dims b, const std::string& what);

// {0,1} mask viewed as a probability map.
ProbabilityMap to_probability(const BinaryMask& mask);

}  // namespace attnmask
