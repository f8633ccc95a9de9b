#include "polar/pyramid.hpp"

#include <cmath>
#include <string>

namespace polar {

FeaturePyramidSpec FeaturePyramidSpec::standard() {
  FeaturePyramidSpec spec;
  for (int f : {2, 4, 8}) spec.levels.push_back(PyramidLevel{f});
  return spec;
}

void FeaturePyramidSpec::validate() const {
  if (levels.empty()) throw ParameterError("feature pyramid has no levels");
  int prev = 0;
  for (const auto& l : levels) {
    if (l.factor <= prev) {
      throw ParameterError(
          "pyramid downsample factors must be positive and strictly "
          "increasing");
    }
    if (l.bank.empty()) throw ParameterError("pyramid level has an empty bank");
    prev = l.factor;
  }
}

int FeaturePyramidSpec::min_size() const {
  return levels.empty() ? 1 : levels.back().factor;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

namespace {

int clampi(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

// Correlation along one axis with replicated borders.
Image blur_axis(const Image& in, const std::vector<double>& k, bool horizontal) {
  const int w = in.width();
  const int h = in.height();
  const int r = static_cast<int>(k.size() / 2);
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const double v = horizontal ? in(clampi(x + i, w - 1), y)
                                    : in(x, clampi(y + i, h - 1));
        acc += k[static_cast<std::size_t>(i + r)] * v;
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Image blur_axis_adjoint(const Image& g, const std::vector<double>& k,
                        bool horizontal) {
  const int w = g.width();
  const int h = g.height();
  const int r = static_cast<int>(k.size() / 2);
  Image out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gv = g(x, y);
      if (gv == 0.0) continue;
      for (int i = -r; i <= r; ++i) {
        const double c = k[static_cast<std::size_t>(i + r)] * gv;
        if (horizontal) {
          out(clampi(x + i, w - 1), y) += c;
        } else {
          out(x, clampi(y + i, h - 1)) += c;
        }
      }
    }
  }
  return out;
}

Image central_diff(const Image& in, bool horizontal) {
  const int w = in.width();
  const int h = in.height();
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = horizontal
                      ? 0.5 * (in(clampi(x + 1, w - 1), y) -
                               in(clampi(x - 1, w - 1), y))
                      : 0.5 * (in(x, clampi(y + 1, h - 1)) -
                               in(x, clampi(y - 1, h - 1)));
    }
  }
  return out;
}

void central_diff_adjoint_add(const Image& g, bool horizontal, Image& out) {
  const int w = g.width();
  const int h = g.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = 0.5 * g(x, y);
      if (horizontal) {
        out(clampi(x + 1, w - 1), y) += c;
        out(clampi(x - 1, w - 1), y) -= c;
      } else {
        out(x, clampi(y + 1, h - 1)) += c;
        out(x, clampi(y - 1, h - 1)) -= c;
      }
    }
  }
}

Image sum_pool(const Image& in, int f) {
  const int ow = in.width() / f;
  const int oh = in.height() / f;
  Image out(ow, oh, 0.0);
  for (int y = 0; y < oh * f; ++y) {
    for (int x = 0; x < ow * f; ++x) out(x / f, y / f) += in(x, y);
  }
  return out;
}

Image sum_pool_adjoint(const Image& g, int f, int width, int height) {
  Image out(width, height, 0.0);
  for (int y = 0; y < g.height() * f; ++y) {
    for (int x = 0; x < g.width() * f; ++x) out(x, y) = g(x / f, y / f);
  }
  return out;
}

void check_size(const Image& img, const FeaturePyramidSpec& spec) {
  const int need = spec.min_size();
  if (img.width() < need || img.height() < need) {
    throw DimensionError("feature pyramid needs images of at least " +
                         std::to_string(need) + "x" + std::to_string(need) +
                         ", got " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()));
  }
}

}  // namespace

Features feature_pyramid(const Image& img, const FeaturePyramidSpec& spec) {
  spec.validate();
  check_size(img, spec);
  Features out;
  out.reserve(spec.levels.size());
  for (const auto& level : spec.levels) {
    const auto k = gaussian_kernel(0.5 * level.factor);
    const Image blurred = blur_axis(blur_axis(img, k, true), k, false);
    FeatureLevel maps;
    maps.reserve(level.bank.size());
    for (Filter f : level.bank) {
      switch (f) {
        case Filter::gaussian:
          maps.push_back(sum_pool(blurred, level.factor));
          break;
        case Filter::d_dx:
          maps.push_back(sum_pool(central_diff(blurred, true), level.factor));
          break;
        case Filter::d_dy:
          maps.push_back(sum_pool(central_diff(blurred, false), level.factor));
          break;
      }
    }
    out.push_back(std::move(maps));
  }
  return out;
}

Image feature_pyramid_adjoint(const Features& grads, int width, int height,
                              const FeaturePyramidSpec& spec) {
  spec.validate();
  if (grads.size() != spec.levels.size()) {
    throw DimensionError("feature gradient level count does not match spec");
  }
  Image total(width, height, 0.0);
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    const auto& level = spec.levels[l];
    if (grads[l].size() != level.bank.size()) {
      throw DimensionError("feature gradient channel count does not match "
                           "spec");
    }
    Image g_blurred(width, height, 0.0);
    for (std::size_t c = 0; c < level.bank.size(); ++c) {
      const Image up = sum_pool_adjoint(grads[l][c], level.factor, width, height);
      switch (level.bank[c]) {
        case Filter::gaussian:
          for (std::size_t i = 0; i < up.size(); ++i) g_blurred[i] += up[i];
          break;
        case Filter::d_dx:
          central_diff_adjoint_add(up, true, g_blurred);
          break;
        case Filter::d_dy:
          central_diff_adjoint_add(up, false, g_blurred);
          break;
      }
    }
    const auto k = gaussian_kernel(0.5 * level.factor);
    const Image g =
        blur_axis_adjoint(blur_axis_adjoint(g_blurred, k, false), k, true);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
  }
  return total;
}

}  // namespace polar
