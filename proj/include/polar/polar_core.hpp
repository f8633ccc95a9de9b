#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "polar/image.hpp"

namespace polar {

inline constexpr double kPi = 3.14159265358979323846;

/// Polarizer orientations of the four sensor channels, in order I1..I4.
inline constexpr std::array<double, 4> kChannelAngles = {0.0, kPi / 4,
                                                         kPi / 2,
                                                         3 * kPi / 4};

inline constexpr double kDefaultOverexposureThreshold = 0.98;

/// Assignment of the four polarizer angles to positions inside a 2x2
/// super-pixel. `position[k]` is the sub-pixel index (row * 2 + col) holding
/// channel k (0, 45, 90, 135 degrees).
struct MosaicPattern {
  std::array<int, 4> position = {0, 1, 2, 3};

  /// Throws ParameterError unless `position` is a permutation of {0,1,2,3}.
  void validate() const;

  friend bool operator==(const MosaicPattern&, const MosaicPattern&) = default;
};

struct RawMosaic {
  Image16 data;
  int bit_depth = 12;
  MosaicPattern pattern;

  int width() const { return data.width(); }
  int height() const { return data.height(); }
  std::uint32_t ceiling() const { return (1u << bit_depth) - 1u; }

  /// Checks even dimensions, the bit range of every sample and the pattern.
  void validate() const;
};

enum class Domain { linear_raw, gamma };

/// Four co-registered angle channels I1..I4 (0, 45, 90, 135 degrees).
struct PolarizedStack {
  std::array<Image, 4> channels;
  Domain domain = Domain::linear_raw;

  PolarizedStack() = default;
  PolarizedStack(int width, int height, double fill = 0.0,
                 Domain d = Domain::linear_raw);
  explicit PolarizedStack(std::array<Image, 4> ch,
                          Domain d = Domain::linear_raw);

  int width() const { return channels[0].width(); }
  int height() const { return channels[0].height(); }
  Image& operator[](int k) { return channels[static_cast<std::size_t>(k)]; }
  const Image& operator[](int k) const {
    return channels[static_cast<std::size_t>(k)];
  }

  bool same_shape(const PolarizedStack& o) const {
    return channels[0].same_shape(o.channels[0]);
  }

  /// Per-pixel total intensity (I1 + I2 + I3 + I4) / 2.
  Image intensity() const;

  double max_value() const;
};

struct LightState {
  double intensity = 0.0;
  double dop = 0.0;
  double aop = 0.0;
};

/// Per-pixel light description used for forward rendering.
struct LightImage {
  Image intensity;
  Image dop;
  Image aop;
};

struct StokesMaps {
  Image intensity;
  Image dop;
  Image aop;
  Mask mask;
  /// Pixels whose degree of polarization exceeded 1 before clamping.
  std::size_t dop_clamped = 0;
};

RawMosaic make_mosaic(Image16 data, int bit_depth = 12,
                      MosaicPattern pattern = {});

/// Splits a sensor mosaic into its four angle channels at half resolution.
PolarizedStack demux_mosaic(const RawMosaic& m);

/// Packs a linear stack back into a sensor mosaic. Values are rounded to the
/// nearest integer; samples outside [0, 2^bit_depth - 1] raise RangeError
/// unless `clamp` is set.
RawMosaic remux_mosaic(const PolarizedStack& s, const MosaicPattern& pattern = {},
                       int bit_depth = 12, bool clamp = false);

/// Intensity passed by an ideal linear polarizer at angle `theta` for
/// partially polarized light: I/2 * (1 + rho * cos(2 (theta - phi))).
double malus_render(const LightState& light, double theta);

PolarizedStack render_stack(const LightImage& light);

/// Wraps an angle into [-pi/2, pi/2).
double wrap_half_pi(double angle);

/// Recovers (I, rho, phi) from four linear channels and computes the
/// overexposure mask. Channel values are divided by `full_scale` before the
/// mask threshold is applied.
StokesMaps compute_stokes(const PolarizedStack& s,
                          double delta = kDefaultOverexposureThreshold,
                          double full_scale = 1.0);

/// O(x) = 0 where any channel / full_scale is strictly above `delta`.
Mask overexposure_mask(const PolarizedStack& s,
                       double delta = kDefaultOverexposureThreshold,
                       double full_scale = 1.0);

}  // namespace polar
