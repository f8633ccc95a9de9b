#pragma once

#include <optional>
#include <span>
#include <vector>

#include "polar/image.hpp"
#include "polar/pyramid.hpp"

namespace polar {

inline constexpr double kNccEpsilon = 1e-8;

/// Loss value with gradients with respect to both arguments.
struct LossValueWithGrad {
  double value = 0.0;
  Image grad_a;
  Image grad_b;
};

/// (img - min) / (max - min); a constant image maps to zeros.
Image normalize01(const Image& img);

/// Zero-mean normalized cross-correlation,
///   sum((x - mx)(y - my)) / (N sx sy + eps), clamped to [-1, 1].
double ncc(std::span<const double> x, std::span<const double> y);
double ncc(const Image& x, const Image& y);

/// NCC with analytic gradients. When either input is constant the value is 0
/// and both gradients are zero.
LossValueWithGrad ncc_with_grad(const Image& x, const Image& y);

/// Sum over pyramid levels of the channel-averaged NCC between the features
/// of the two min-max normalized images.
double pncc_value(const Image& a, const Image& b,
                  const FeaturePyramidSpec& spec = FeaturePyramidSpec::standard());

/// As pncc_value, with gradients. The normalization bounds are treated as
/// constants when differentiating.
LossValueWithGrad pncc(const Image& a, const Image& b,
                       const FeaturePyramidSpec& spec =
                           FeaturePyramidSpec::standard());

/// 1 / (number of feature elements) per level for a width x height input.
std::vector<double> default_level_weights(int width, int height,
                                          const FeaturePyramidSpec& spec);

/// sum_l beta_l * |F_l(O * T) - F_l(O * T_hat)|_1. `grad_a` is the gradient
/// with respect to T and `grad_b` with respect to T_hat. L1 kinks use a zero
/// subgradient.
LossValueWithGrad masked_perceptual(
    const Image& t, const Image& t_hat, const Mask& mask,
    const FeaturePyramidSpec& spec = FeaturePyramidSpec::standard(),
    std::optional<std::vector<double>> beta = std::nullopt);

}  // namespace polar
