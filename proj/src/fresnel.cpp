#include "polar/fresnel.hpp"

#include <cmath>
#include <string>

#include "polar/errors.hpp"
#include "polar/polar_core.hpp"

namespace polar::fresnel {

void InterfaceSpec::validate() const {
  if (!(n >= 1.0)) {
    throw ParameterError("refractive index must be >= 1, got " +
                         std::to_string(n));
  }
  if (!(incidence >= 0.0 && incidence < kPi / 2)) {
    throw ParameterError("incidence angle must lie in [0, pi/2), got " +
                         std::to_string(incidence));
  }
}

PowerCoefficients power_coefficients(const InterfaceSpec& spec) {
  spec.validate();
  const double n = spec.n;
  const double cos_i = std::cos(spec.incidence);
  const double sin_i = std::sin(spec.incidence);
  const double sin_t = sin_i / n;
  const double cos_t = std::sqrt(1.0 - sin_t * sin_t);

  // Amplitude coefficients, air (index 1) into the dielectric.
  const double r_s = (cos_i - n * cos_t) / (cos_i + n * cos_t);
  const double r_p = (n * cos_i - cos_t) / (n * cos_i + cos_t);
  const double t_s = 2.0 * cos_i / (cos_i + n * cos_t);
  const double t_p = 2.0 * cos_i / (n * cos_i + cos_t);

  // Transmitted power carries the beam cross-section and impedance factor.
  const double beam = n * cos_t / cos_i;
  return PowerCoefficients{r_s * r_s, r_p * r_p, beam * t_s * t_s,
                           beam * t_p * t_p};
}

double brewster_angle(double n) {
  if (!(n > 0.0)) {
    throw ParameterError("refractive index must be positive, got " +
                         std::to_string(n));
  }
  return std::atan(n);
}

namespace {

double contrast(double a, double b) {
  const double sum = a + b;
  return sum > 0.0 ? std::abs(a - b) / sum : 0.0;
}

}  // namespace

double dop_reflected(const InterfaceSpec& spec) {
  const auto c = power_coefficients(spec);
  return contrast(c.rs, c.rp);
}

double dop_transmitted(const InterfaceSpec& spec) {
  const auto c = power_coefficients(spec);
  return contrast(c.ts, c.tp);
}

std::vector<DopSample> dop_curve(double n, int samples) {
  if (samples < 2) {
    throw ParameterError("dop_curve needs at least 2 samples");
  }
  if (!(n >= 1.0)) {
    throw ParameterError("refractive index must be >= 1");
  }
  std::vector<DopSample> rows;
  rows.reserve(static_cast<std::size_t>(samples));
  const double step = 90.0 / (samples - 1);
  for (int k = 0; k < samples; ++k) {
    const double deg = k == samples - 1 ? 90.0 : k * step;
    if (k == samples - 1) {
      // At grazing incidence Rs = Rp = 1, and Ts/Tp tends to 1/n^2.
      const double n2 = n * n;
      rows.push_back({deg, 0.0, (n2 - 1.0) / (n2 + 1.0)});
      continue;
    }
    const InterfaceSpec spec{n, deg * kPi / 180.0};
    rows.push_back({deg, dop_reflected(spec), dop_transmitted(spec)});
  }
  return rows;
}

}  // namespace polar::fresnel
