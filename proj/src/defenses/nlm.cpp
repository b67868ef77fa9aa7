#include "segadv/defenses/nlm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segadv/error.hpp"

namespace segadv::defenses {
namespace {

// Reflect-101 indexing, repeated for offsets larger than the extent.
std::ptrdiff_t mirror(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double median_abs(std::vector<double>& v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

}  // namespace

void NlmConfig::validate() const {
  if (patch_size % 2 == 0 || window_size % 2 == 0) throw UsageError("NLM patch and window sizes must be odd");
  if (patch_size >= window_size) throw UsageError("NLM patch must be smaller than the search window");
  if (!(gaussian_a > 0.0)) throw UsageError("NLM Gaussian std must be positive");
  if (filtering_h && !(*filtering_h > 0.0)) throw UsageError("explicit NLM filtering h must be positive");
}

double estimate_sigma(const tensor::Tensor& image) {
  if (image.rank() != 3 || image.dim(0) < 3 || image.dim(1) < 3) {
    throw ShapeError("estimate_sigma needs an image of at least 3x3, got " + tensor::to_string(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  constexpr double kMask[3][3] = {{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}};
  // MAD of N(0, s^2) is 0.6745 s; the mask has l2 norm 6.
  constexpr double kScale = 1.482602218505602 / 6.0;
  double total = 0.0;
  std::vector<double> responses;
  responses.reserve((h - 2) * (w - 2));
  for (std::size_t ch = 0; ch < c; ++ch) {
    responses.clear();
    for (std::size_t y = 1; y + 1 < h; ++y) {
      for (std::size_t x = 1; x + 1 < w; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            acc += kMask[dy + 1][dx + 1] * image[((y + dy) * w + (x + dx)) * c + ch];
          }
        }
        responses.push_back(std::abs(acc));
      }
    }
    total += kScale * median_abs(responses);
  }
  return total / static_cast<double>(c);
}

double estimate_sigma(const Image& image) { return estimate_sigma(to_tensor(image)); }

double resolve_filtering_h(const Image& image, const NlmConfig& config) {
  return config.filtering_h ? *config.filtering_h : kAutoFilteringFactor * estimate_sigma(image);
}

Image nlm_denoise(const Image& image, const NlmConfig& config, NlmDiagnostics* diagnostics) {
  config.validate();
  const std::size_t h = image.height, w = image.width, c = image.channels;
  if (h <= config.window_size || w <= config.window_size) {
    throw ShapeError("NLM needs an image larger than the " + std::to_string(config.window_size) + "x" +
                     std::to_string(config.window_size) + " search window");
  }
  const double filtering_h = resolve_filtering_h(image, config);
  if (diagnostics) diagnostics->filtering_h = filtering_h;
  if (filtering_h == 0.0) {
    if (diagnostics) {
      diagnostics->weight_sums.assign(h * w, 1.0);
      diagnostics->unquantized = to_tensor(image);
      diagnostics->window_min = diagnostics->unquantized;
      diagnostics->window_max = diagnostics->unquantized;
    }
    return image;
  }

  const auto half_patch = static_cast<std::ptrdiff_t>(config.patch_size / 2);
  const auto half_window = static_cast<std::ptrdiff_t>(config.window_size / 2);
  const std::ptrdiff_t pad = half_patch + half_window;
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
  const std::ptrdiff_t ph = ih + 2 * pad, pw = iw + 2 * pad;

  std::vector<double> padded(static_cast<std::size_t>(ph * pw) * c);
  for (std::ptrdiff_t y = 0; y < ph; ++y) {
    const std::ptrdiff_t sy = mirror(y - pad, ih);
    for (std::ptrdiff_t x = 0; x < pw; ++x) {
      const std::ptrdiff_t sx = mirror(x - pad, iw);
      for (std::size_t ch = 0; ch < c; ++ch) {
        padded[static_cast<std::size_t>(y * pw + x) * c + ch] = image.at(sy, sx, ch);
      }
    }
  }
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x, std::size_t ch) {
    return padded[static_cast<std::size_t>((y + pad) * pw + (x + pad)) * c + ch];
  };

  // Separable, normalised Gaussian over patch offsets.
  std::vector<double> g1(config.patch_size);
  double g1_sum = 0.0;
  for (std::ptrdiff_t d = -half_patch; d <= half_patch; ++d) {
    g1[static_cast<std::size_t>(d + half_patch)] =
        std::exp(-static_cast<double>(d * d) / (2.0 * config.gaussian_a * config.gaussian_a));
    g1_sum += g1[static_cast<std::size_t>(d + half_patch)];
  }
  for (double& v : g1) v /= g1_sum;

  const double inv_h2 = 1.0 / (filtering_h * filtering_h);
  const std::ptrdiff_t dh = ih + 2 * half_patch, dw = iw + 2 * half_patch;
  std::vector<double> diff(static_cast<std::size_t>(dh * dw));
  std::vector<double> rowpass(static_cast<std::size_t>(dh * iw));
  std::vector<double> acc(h * w * c, 0.0), wsum(h * w, 0.0);
  std::vector<double> wmin(h * w * c, 255.0), wmax(h * w * c, 0.0);
  std::vector<double> raw_weights;  // [offset][pixel], only when instrumented
  if (diagnostics) raw_weights.reserve(config.window_size * config.window_size * h * w);

  for (std::ptrdiff_t oy = -half_window; oy <= half_window; ++oy) {
    for (std::ptrdiff_t ox = -half_window; ox <= half_window; ++ox) {
      // Channel-averaged squared difference between q and q + o.
      for (std::ptrdiff_t y = 0; y < dh; ++y) {
        for (std::ptrdiff_t x = 0; x < dw; ++x) {
          const std::ptrdiff_t qy = y - half_patch, qx = x - half_patch;
          double s = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = at(qy, qx, ch) - at(qy + oy, qx + ox, ch);
            s += d * d;
          }
          diff[static_cast<std::size_t>(y * dw + x)] = s / static_cast<double>(c);
        }
      }
      for (std::ptrdiff_t y = 0; y < dh; ++y) {
        for (std::ptrdiff_t x = 0; x < iw; ++x) {
          double s = 0.0;
          for (std::ptrdiff_t k = 0; k <= 2 * half_patch; ++k) {
            s += g1[static_cast<std::size_t>(k)] * diff[static_cast<std::size_t>(y * dw + x + k)];
          }
          rowpass[static_cast<std::size_t>(y * iw + x)] = s;
        }
      }
      for (std::ptrdiff_t y = 0; y < ih; ++y) {
        for (std::ptrdiff_t x = 0; x < iw; ++x) {
          double dist = 0.0;
          for (std::ptrdiff_t k = 0; k <= 2 * half_patch; ++k) {
            dist += g1[static_cast<std::size_t>(k)] * rowpass[static_cast<std::size_t>((y + k) * iw + x)];
          }
          const double weight = std::exp(-dist * inv_h2);
          const auto pix = static_cast<std::size_t>(y * iw + x);
          wsum[pix] += weight;
          if (diagnostics) raw_weights.push_back(weight);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = at(y + oy, x + ox, ch);
            acc[pix * c + ch] += weight * v;
            wmin[pix * c + ch] = std::min(wmin[pix * c + ch], v);
            wmax[pix * c + ch] = std::max(wmax[pix * c + ch], v);
          }
        }
      }
    }
  }

  tensor::Tensor out({h, w, c});
  for (std::size_t pix = 0; pix < h * w; ++pix) {
    for (std::size_t ch = 0; ch < c; ++ch) out[pix * c + ch] = acc[pix * c + ch] / wsum[pix];
  }
  if (diagnostics) {
    diagnostics->weight_sums.assign(h * w, 0.0);
    for (std::size_t k = 0; k < raw_weights.size(); ++k) {
      const std::size_t pix = k % (h * w);
      diagnostics->weight_sums[pix] += raw_weights[k] / wsum[pix];
    }
    diagnostics->unquantized = out;
    diagnostics->window_min = tensor::Tensor({h, w, c}, wmin);
    diagnostics->window_max = tensor::Tensor({h, w, c}, wmax);
  }
  return clip_quantize(out);
}

}  // namespace segadv::defenses
