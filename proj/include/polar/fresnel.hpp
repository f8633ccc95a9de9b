#pragma once

#include <vector>

namespace polar::fresnel {

/// Air-to-dielectric interface seen from the air side.
struct InterfaceSpec {
  double n = 1.7;           ///< refractive index of the dielectric
  double incidence = 0.0;   ///< angle of incidence in radians, [0, pi/2)

  void validate() const;
};

/// Power reflectance / transmittance for s- and p-polarized light.
struct PowerCoefficients {
  double rs = 0.0;
  double rp = 0.0;
  double ts = 0.0;
  double tp = 0.0;
};

PowerCoefficients power_coefficients(const InterfaceSpec& spec);

/// arctan(n). Throws ParameterError for n <= 0.
double brewster_angle(double n);

/// Degree of polarization of the reflected beam for unpolarized incident
/// light, |Rs - Rp| / (Rs + Rp); 0 when both vanish.
double dop_reflected(const InterfaceSpec& spec);

/// Same for the transmitted beam, |Ts - Tp| / (Ts + Tp).
double dop_transmitted(const InterfaceSpec& spec);

struct DopSample {
  double theta_deg = 0.0;
  double rho_r = 0.0;
  double rho_t = 0.0;
};

/// Samples the two DoP curves on a uniform grid over [0, 90] degrees. The
/// 90 degree endpoint is reported as the grazing-incidence limit.
std::vector<DopSample> dop_curve(double n, int samples);

}  // namespace polar::fresnel
