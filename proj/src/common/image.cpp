#include "segadv/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "segadv/error.hpp"

namespace segadv {

void validate_mask(const LabelMask& mask, std::size_t num_classes) {
  if (mask.classes.size() != mask.height * mask.width) {
    throw ShapeError("label mask storage does not match " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width));
  }
  for (int c : mask.classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw UsageError("label mask contains class id " + std::to_string(c) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

tensor::Tensor to_tensor(const Image& image) {
  std::vector<double> values(image.data.begin(), image.data.end());
  return tensor::Tensor({image.height, image.width, image.channels}, std::move(values));
}

std::uint8_t quantize_gray(double v) {
  const double clamped = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::round(clamped));
}

Image clip_quantize(const tensor::Tensor& image_real) {
  if (image_real.rank() != 3) {
    throw ShapeError("clip_quantize: expected H x W x C, got " + tensor::to_string(image_real.shape()));
  }
  Image out(image_real.dim(0), image_real.dim(1), image_real.dim(2));
  auto v = image_real.values();
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = quantize_gray(v[i]);
  return out;
}

namespace {

void require_same_geometry(const Image& a, const Image& b, const char* op) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw ShapeError(std::string(op) + ": image geometries differ");
  }
}

}  // namespace

Image project_linf(const Image& candidate, const Image& reference, double epsilon) {
  require_same_geometry(candidate, reference, "project_linf");
  const int radius = static_cast<int>(std::floor(epsilon));
  Image out = candidate;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int ref = reference.data[i];
    const int v = std::clamp<int>(candidate.data[i], std::max(0, ref - radius), std::min(255, ref + radius));
    out.data[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

int linf_distance(const Image& a, const Image& b) {
  require_same_geometry(a, b, "linf_distance");
  int worst = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<int>(a.data[i]) - static_cast<int>(b.data[i])));
  }
  return worst;
}

tensor::Tensor difference(const Image& a, const Image& b) {
  require_same_geometry(a, b, "difference");
  tensor::Tensor out({a.height, a.width, a.channels});
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
  }
  return out;
}

}  // namespace segadv
