#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segadv/tensor/tensor.hpp"

namespace segadv {

// Integer-gray-value raster, row-major H x W x C.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const {
    return (y * width + x) * channels + c;
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return data[index(y, x, c)]; }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return data[index(y, x, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

// Per-pixel class assignment, row-major H x W.
struct LabelMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> classes;

  LabelMask() = default;
  LabelMask(std::size_t h, std::size_t w, int fill = 0) : height(h), width(w), classes(h * w, fill) {}

  int at(std::size_t y, std::size_t x) const { return classes[y * width + x]; }
  int& at(std::size_t y, std::size_t x) { return classes[y * width + x]; }
  std::size_t size() const { return classes.size(); }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

// Throws UsageError if any class id falls outside [0, num_classes).
void validate_mask(const LabelMask& mask, std::size_t num_classes);

tensor::Tensor to_tensor(const Image& image);

// Clamp to [0, 255], round half away from zero, cast.
std::uint8_t quantize_gray(double v);
Image clip_quantize(const tensor::Tensor& image_real);

// Integer l_inf projection of `candidate` onto the ball of radius floor(epsilon)
// around `reference`. Both images must have identical geometry.
Image project_linf(const Image& candidate, const Image& reference, double epsilon);

// Largest |a - b| over all channels, in gray levels.
int linf_distance(const Image& a, const Image& b);

// (a - b) as a real tensor.
tensor::Tensor difference(const Image& a, const Image& b);

}  // namespace segadv
