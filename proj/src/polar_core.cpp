#include "polar/polar_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace polar {

void MosaicPattern::validate() const {
  std::array<bool, 4> seen{};
  for (int p : position) {
    if (p < 0 || p > 3 || seen[static_cast<std::size_t>(p)]) {
      throw ParameterError(
          "mosaic pattern must assign each 2x2 position exactly once");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
}

void RawMosaic::validate() const {
  if (width() % 2 != 0 || height() % 2 != 0) {
    throw DimensionError("mosaic dimensions must be even, got " +
                         std::to_string(width()) + "x" +
                         std::to_string(height()));
  }
  if (bit_depth < 1 || bit_depth > 16) {
    throw ParameterError("bit depth must be in [1, 16]");
  }
  pattern.validate();
  const std::uint32_t top = ceiling();
  for (std::uint16_t v : data.pixels()) {
    if (v > top) {
      throw RangeError("mosaic sample " + std::to_string(v) +
                       " exceeds the " + std::to_string(bit_depth) +
                       "-bit ceiling");
    }
  }
}

PolarizedStack::PolarizedStack(int width, int height, double fill, Domain d)
    : domain(d) {
  for (auto& c : channels) c = Image(width, height, fill);
}

PolarizedStack::PolarizedStack(std::array<Image, 4> ch, Domain d)
    : channels(std::move(ch)), domain(d) {
  for (const auto& c : channels) {
    require_same_shape(channels[0], c, "PolarizedStack");
  }
}

Image PolarizedStack::intensity() const {
  Image out(width(), height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (channels[0][i] + channels[1][i] + channels[2][i] +
              channels[3][i]) /
             2.0;
  }
  return out;
}

double PolarizedStack::max_value() const {
  double m = -HUGE_VAL;
  for (const auto& c : channels) m = std::max(m, polar::max_value(c));
  return m;
}

RawMosaic make_mosaic(Image16 data, int bit_depth, MosaicPattern pattern) {
  RawMosaic m{std::move(data), bit_depth, pattern};
  m.validate();
  return m;
}

PolarizedStack demux_mosaic(const RawMosaic& m) {
  m.validate();
  const int w = m.width() / 2;
  const int h = m.height() / 2;
  PolarizedStack s(w, h);
  for (int k = 0; k < 4; ++k) {
    const int pos = m.pattern.position[static_cast<std::size_t>(k)];
    const int dy = pos / 2;
    const int dx = pos % 2;
    Image& ch = s[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        ch(x, y) = m.data(2 * x + dx, 2 * y + dy);
      }
    }
  }
  return s;
}

RawMosaic remux_mosaic(const PolarizedStack& s, const MosaicPattern& pattern,
                       int bit_depth, bool clamp) {
  if (s.domain != Domain::linear_raw) {
    throw DomainError("remux requires a linear_raw stack");
  }
  pattern.validate();
  if (bit_depth < 1 || bit_depth > 16) {
    throw ParameterError("bit depth must be in [1, 16]");
  }
  const double top = static_cast<double>((1u << bit_depth) - 1u);
  Image16 out(2 * s.width(), 2 * s.height());
  for (int k = 0; k < 4; ++k) {
    const int pos = pattern.position[static_cast<std::size_t>(k)];
    const int dy = pos / 2;
    const int dx = pos % 2;
    const Image& ch = s[k];
    for (int y = 0; y < s.height(); ++y) {
      for (int x = 0; x < s.width(); ++x) {
        double v = std::nearbyint(ch(x, y));
        if (!(v >= 0.0 && v <= top)) {
          if (!clamp || std::isnan(v)) {
            throw RangeError("channel " + std::to_string(k) + " value " +
                             std::to_string(ch(x, y)) + " at (" +
                             std::to_string(x) + ", " + std::to_string(y) +
                             ") outside [0, " + std::to_string(top) + "]");
          }
          v = std::clamp(v, 0.0, top);
        }
        out(2 * x + dx, 2 * y + dy) = static_cast<std::uint16_t>(v);
      }
    }
  }
  return RawMosaic{std::move(out), bit_depth, pattern};
}

double malus_render(const LightState& light, double theta) {
  return 0.5 * light.intensity *
         (1.0 + light.dop * std::cos(2.0 * (theta - light.aop)));
}

PolarizedStack render_stack(const LightImage& light) {
  require_same_shape(light.intensity, light.dop, "render_stack");
  require_same_shape(light.intensity, light.aop, "render_stack");
  PolarizedStack s(light.intensity.width(), light.intensity.height());
  for (std::size_t i = 0; i < light.intensity.size(); ++i) {
    const LightState ls{light.intensity[i], light.dop[i], light.aop[i]};
    for (int k = 0; k < 4; ++k) {
      s[k][i] = malus_render(ls, kChannelAngles[static_cast<std::size_t>(k)]);
    }
  }
  return s;
}

double wrap_half_pi(double angle) {
  double a = std::fmod(angle + kPi / 2, kPi);
  if (a < 0.0) a += kPi;
  a -= kPi / 2;
  // fmod can land exactly on the excluded upper edge after the shift back.
  if (a >= kPi / 2) a -= kPi;
  return a;
}

StokesMaps compute_stokes(const PolarizedStack& s, double delta,
                          double full_scale) {
  if (s.domain != Domain::linear_raw) {
    throw DomainError(
        "Stokes recovery is only valid on linear raw data, got a gamma stack");
  }
  StokesMaps out;
  out.mask = overexposure_mask(s, delta, full_scale);
  const int w = s.width();
  const int h = s.height();
  out.intensity = Image(w, h);
  out.dop = Image(w, h);
  out.aop = Image(w, h);
  for (std::size_t i = 0; i < out.intensity.size(); ++i) {
    const double i1 = s[0][i];
    const double i2 = s[1][i];
    const double i3 = s[2][i];
    const double i4 = s[3][i];
    const double total = (i1 + i3 + i2 + i4) / 2.0;
    const double s1 = i1 - i3;
    const double s2 = i2 - i4;
    out.intensity[i] = total;
    double rho = 0.0;
    if (total > 0.0) {
      rho = std::sqrt(s1 * s1 + s2 * s2) / total;
      if (rho > 1.0) {
        rho = 1.0;
        ++out.dop_clamped;
      }
    }
    out.dop[i] = rho;
    out.aop[i] = rho > 0.0 ? wrap_half_pi(0.5 * std::atan2(s2, s1)) : 0.0;
  }
  return out;
}

Mask overexposure_mask(const PolarizedStack& s, double delta,
                       double full_scale) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw ParameterError("overexposure threshold must lie in (0, 1], got " +
                         std::to_string(delta));
  }
  if (!(full_scale > 0.0)) {
    throw ParameterError("full scale must be positive");
  }
  Mask m(s.width(), s.height(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double peak =
        std::max({s[0][i], s[1][i], s[2][i], s[3][i]}) / full_scale;
    m[i] = peak > delta ? 0 : 1;
  }
  return m;
}

}  // namespace polar
