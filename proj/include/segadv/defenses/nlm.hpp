#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "segadv/image.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv::defenses {

// h = kAutoFilteringFactor * sigma_hat(x) when no explicit h is configured.
inline constexpr double kAutoFilteringFactor = 2.15;

struct NlmConfig {
  std::size_t patch_size = 7;   // similarity patch, odd
  std::size_t window_size = 9;  // search window R, odd, larger than the patch
  double gaussian_a = 1.0;      // std of the Gaussian weighting the patch distance
  std::optional<double> filtering_h;

  void validate() const;
};

// Noise standard deviation from the median absolute 3x3 Laplacian response
// (1 -2 1 / -2 4 -2 / 1 -2 1), averaged over channels. Requires >= 3x3.
double estimate_sigma(const Image& image);
double estimate_sigma(const tensor::Tensor& image);

double resolve_filtering_h(const Image& image, const NlmConfig& config);

struct NlmDiagnostics {
  double filtering_h = 0.0;
  std::vector<double> weight_sums;  // per pixel, after normalisation
  tensor::Tensor unquantized;       // H x W x C
  tensor::Tensor window_min;        // per pixel and channel
  tensor::Tensor window_max;
};

// Non-local means over an R x R search window with Gaussian-weighted squared
// patch distances, mirror padding at the borders and clip-quantized output.
// A resolved h of 0 returns the input unchanged.
Image nlm_denoise(const Image& image, const NlmConfig& config, NlmDiagnostics* diagnostics = nullptr);

}  // namespace segadv::defenses
