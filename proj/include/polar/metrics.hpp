#pragma once

#include "polar/image.hpp"

namespace polar {

double mse(const Image& a, const Image& b);

/// 10 log10(peak^2 / mse); +inf for identical images.
double psnr(const Image& estimate, const Image& truth, double peak);

}  // namespace polar
