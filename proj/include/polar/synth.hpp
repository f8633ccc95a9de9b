#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "polar/image.hpp"
#include "polar/polar_core.hpp"

namespace polar::synth {

struct SynthConfig {
  double a = 1.0;                     ///< reflection mix, (0, 1]
  double b = 1.0;                     ///< transmission mix, (0, 1]
  double n = 1.7;                     ///< refractive index of the glass
  double incidence = 0.0;             ///< radians
  std::optional<double> dop_r_override;
  std::optional<double> dop_t_override;
  double aop_r = 0.0;
  std::optional<double> aop_t;        ///< drawn from the seed when unset
  double noise_sigma = 0.0;           ///< LSB, additive Gaussian
  int bit_depth = 12;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint32_t ceiling() const { return (1u << bit_depth) - 1u; }
};

/// Builds a stack whose Stokes recovery is (base, rho, phi) at every pixel.
PolarizedStack polarize_layer(const Image& base, double rho, double phi);
PolarizedStack polarize_layer(const Image& base, const Image& rho, double phi);

/// M_k = a * R_k + b * T_k.
PolarizedStack compose_mixed(const PolarizedStack& r, const PolarizedStack& t,
                             double a, double b);

/// Adds seeded Gaussian noise of `sigma` LSB after multiplying by `scale`.
PolarizedStack add_noise(const PolarizedStack& s, double scale, double sigma,
                         std::uint64_t seed);

/// Clamps to [0, ceiling] and rounds to integers.
PolarizedStack quantize(const PolarizedStack& s, std::uint32_t ceiling);

/// add_noise + quantize with the stack interpreted in LSB units.
PolarizedStack degrade(const PolarizedStack& s, const SynthConfig& cfg,
                       double scale = 1.0);

enum class CleanVerdict { accept, reject_ratio, reject_zero_transmission };

std::string to_string(CleanVerdict v);

struct CleanResult {
  CleanVerdict verdict = CleanVerdict::accept;
  double ratio = 0.0;          ///< mean(R) / mean(T) after clamping
  std::size_t clamped = 0;     ///< negative samples set to zero, both layers
  PolarizedStack r;
  PolarizedStack t;
};

inline constexpr double kMinMeanRatio = 0.1;
inline constexpr double kMaxMeanRatio = 10.0;

/// Zeroes negative samples in both layers and accepts the pair iff the mean
/// intensity ratio lies in [0.1, 10].
CleanResult clean_pair(const PolarizedStack& r, const PolarizedStack& t);

struct TriplePair {
  PolarizedStack m;
  PolarizedStack r;
  PolarizedStack t;
  SynthConfig config;          ///< with aop_t resolved
  double dop_r = 0.0;
  double dop_t = 0.0;
  double scale = 1.0;          ///< LSB per base-image unit, shared by M, R, T
  CleanVerdict verdict = CleanVerdict::accept;
  double mean_ratio = 0.0;
  std::size_t clamped = 0;
};

/// Generates a quantized {M, R, T} triple from two base intensity images
/// given in normalized units (1.0 = sensor ceiling). If the mixture would
/// exceed the ceiling, all three layers share one downscale so that its
/// brightest sample lands on the ceiling.
TriplePair make_triple(const Image& base_r, const Image& base_t,
                       const SynthConfig& cfg);

/// Smooth random texture in [0.05, 0.95] built from blurred noise and Gaussian
/// blobs. Deterministic in `seed`.
Image procedural_base(int width, int height, std::uint64_t seed);

struct ResidualStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

struct LinearityReport {
  ResidualStats raw;     ///< |M - R - T|, LSB
  ResidualStats gamma;   ///< |g(M) - g(R) - g(T)|, LSB
  double gamma_exponent = 1.0 / 2.2;
};

/// Compares subtraction on linear data with subtraction after gamma
/// correction. Requires a = b = 1.
LinearityReport gamma_subtraction_demo(const TriplePair& triple);

}  // namespace polar::synth
