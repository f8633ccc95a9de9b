#pragma once

#include <vector>

#include "polar/image.hpp"

namespace polar {

enum class Filter { gaussian, d_dx, d_dy };

/// One scale of the pyramid. The image is blurred with a Gaussian of
/// sigma = factor / 2, each filter of the bank is applied to the blurred
/// image and the responses are sum-pooled over factor x factor blocks.
struct PyramidLevel {
  int factor = 2;
  std::vector<Filter> bank = {Filter::gaussian, Filter::d_dx, Filter::d_dy};
};

/// Fixed multi-scale linear feature extractor used by the perceptual losses.
struct FeaturePyramidSpec {
  std::vector<PyramidLevel> levels;

  /// Three levels at factors 2, 4, 8 with {gaussian, d/dx, d/dy} each.
  static FeaturePyramidSpec standard();

  void validate() const;
  int min_size() const;
};

using FeatureLevel = std::vector<Image>;
using Features = std::vector<FeatureLevel>;

std::vector<double> gaussian_kernel(double sigma);

/// Linear in `img`: feature_pyramid(a X + b Y) == a F(X) + b F(Y).
Features feature_pyramid(const Image& img, const FeaturePyramidSpec& spec);

/// Transpose of feature_pyramid: maps per-feature gradients back to an
/// image gradient of size width x height.
Image feature_pyramid_adjoint(const Features& grads, int width, int height,
                              const FeaturePyramidSpec& spec);

}  // namespace polar
