#include "polar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polar/fresnel.hpp"

namespace polar::synth {

void SynthConfig::validate() const {
  if (!(a > 0.0 && a <= 1.0) || !(b > 0.0 && b <= 1.0)) {
    throw ParameterError("mix weights a and b must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ParameterError("noise sigma must be non-negative");
  }
  if (bit_depth < 1 || bit_depth > 16) {
    throw ParameterError("bit depth must be in [1, 16]");
  }
  for (const auto& rho : {dop_r_override, dop_t_override}) {
    if (rho && !(*rho >= 0.0 && *rho <= 1.0)) {
      throw ParameterError("degree of polarization override must be in [0, 1]");
    }
  }
  fresnel::InterfaceSpec{n, incidence}.validate();
}

namespace {

void require_linear(const PolarizedStack& s, const char* what) {
  if (s.domain != Domain::linear_raw) {
    throw DomainError(std::string(what) +
                      ": layers must be linear raw; composition after gamma "
                      "correction is not additive");
  }
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ResidualStats residual(const PolarizedStack& m, const PolarizedStack& r,
                       const PolarizedStack& t, auto&& map) {
  ResidualStats st;
  double sum = 0.0;
  std::size_t count = 0;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < m[k].size(); ++i) {
      const double d = std::abs(map(m[k][i]) - map(r[k][i]) - map(t[k][i]));
      st.max_abs = std::max(st.max_abs, d);
      sum += d;
      ++count;
    }
  }
  st.mean_abs = count ? sum / static_cast<double>(count) : 0.0;
  return st;
}

}  // namespace

PolarizedStack polarize_layer(const Image& base, double rho, double phi) {
  return polarize_layer(base, Image(base.width(), base.height(), rho), phi);
}

PolarizedStack polarize_layer(const Image& base, const Image& rho,
                              double phi) {
  require_same_shape(base, rho, "polarize_layer");
  for (double v : rho.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ParameterError("degree of polarization must be in [0, 1], got " +
                           std::to_string(v));
    }
  }
  for (double v : base.pixels()) {
    if (!(v >= 0.0)) {
      throw RangeError("base intensity must be non-negative");
    }
  }
  return render_stack(
      LightImage{base, rho, Image(base.width(), base.height(), phi)});
}

PolarizedStack compose_mixed(const PolarizedStack& r, const PolarizedStack& t,
                             double a, double b) {
  require_linear(r, "compose_mixed");
  require_linear(t, "compose_mixed");
  if (!r.same_shape(t)) {
    throw DimensionError("compose_mixed: reflection and transmission shapes "
                         "differ");
  }
  PolarizedStack m(r.width(), r.height());
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < m[k].size(); ++i) {
      m[k][i] = a * r[k][i] + b * t[k][i];
    }
  }
  return m;
}

PolarizedStack add_noise(const PolarizedStack& s, double scale, double sigma,
                         std::uint64_t seed) {
  PolarizedStack out = s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma > 0.0 ? sigma : 1.0);
  for (int k = 0; k < 4; ++k) {
    for (auto& v : out[k].pixels()) {
      v *= scale;
      if (sigma > 0.0) v += gauss(rng);
    }
  }
  return out;
}

PolarizedStack quantize(const PolarizedStack& s, std::uint32_t ceiling) {
  PolarizedStack out = s;
  const double top = static_cast<double>(ceiling);
  for (int k = 0; k < 4; ++k) {
    for (auto& v : out[k].pixels()) {
      v = std::nearbyint(std::clamp(v, 0.0, top));
    }
  }
  return out;
}

PolarizedStack degrade(const PolarizedStack& s, const SynthConfig& cfg,
                       double scale) {
  require_linear(s, "degrade");
  return quantize(add_noise(s, scale, cfg.noise_sigma, cfg.seed),
                  cfg.ceiling());
}

std::string to_string(CleanVerdict v) {
  switch (v) {
    case CleanVerdict::accept:
      return "accept";
    case CleanVerdict::reject_ratio:
      return "reject_ratio";
    case CleanVerdict::reject_zero_transmission:
      return "reject_zero_transmission";
  }
  return "unknown";
}

CleanResult clean_pair(const PolarizedStack& r, const PolarizedStack& t) {
  if (!r.same_shape(t)) {
    throw DimensionError("clean_pair: reflection and transmission shapes "
                         "differ");
  }
  CleanResult res;
  res.r = r;
  res.t = t;
  for (auto* layer : {&res.r, &res.t}) {
    for (int k = 0; k < 4; ++k) {
      for (auto& v : (*layer)[k].pixels()) {
        if (v < 0.0) {
          v = 0.0;
          ++res.clamped;
        }
      }
    }
  }
  const double mean_r = mean(res.r.intensity());
  const double mean_t = mean(res.t.intensity());
  if (!(mean_t > 0.0)) {
    res.verdict = CleanVerdict::reject_zero_transmission;
    res.ratio = HUGE_VAL;
    return res;
  }
  res.ratio = mean_r / mean_t;
  res.verdict = (res.ratio >= kMinMeanRatio && res.ratio <= kMaxMeanRatio)
                    ? CleanVerdict::accept
                    : CleanVerdict::reject_ratio;
  return res;
}

TriplePair make_triple(const Image& base_r, const Image& base_t,
                       const SynthConfig& cfg) {
  cfg.validate();
  require_same_shape(base_r, base_t, "make_triple");

  TriplePair out;
  out.config = cfg;
  std::uint64_t state = cfg.seed;
  std::mt19937_64 rng(splitmix(state));
  if (!out.config.aop_t) {
    std::uniform_real_distribution<double> angle(-kPi / 2, kPi / 2);
    out.config.aop_t = angle(rng);
  }
  const std::uint64_t seed_r = splitmix(state);
  const std::uint64_t seed_t = splitmix(state);

  const fresnel::InterfaceSpec glass{cfg.n, cfg.incidence};
  out.dop_r = cfg.dop_r_override.value_or(fresnel::dop_reflected(glass));
  out.dop_t = cfg.dop_t_override.value_or(fresnel::dop_transmitted(glass));

  const PolarizedStack r = polarize_layer(base_r, out.dop_r, cfg.aop_r);
  const PolarizedStack t = polarize_layer(base_t, out.dop_t, *out.config.aop_t);

  // One scale for all three layers keeps M - R == T through rounding.
  const double peak = compose_mixed(r, t, cfg.a, cfg.b).max_value();
  out.scale = static_cast<double>(cfg.ceiling()) / std::max(peak, 1.0);

  const PolarizedStack r_lsb = add_noise(r, out.scale, cfg.noise_sigma, seed_r);
  const PolarizedStack t_lsb = add_noise(t, out.scale, cfg.noise_sigma, seed_t);
  const PolarizedStack m_lsb = compose_mixed(r_lsb, t_lsb, cfg.a, cfg.b);

  out.m = quantize(m_lsb, cfg.ceiling());
  out.r = quantize(r_lsb, cfg.ceiling());
  out.t = quantize(t_lsb, cfg.ceiling());

  const CleanResult verdict = clean_pair(out.r, out.t);
  out.verdict = verdict.verdict;
  out.mean_ratio = verdict.ratio;
  out.clamped = verdict.clamped;
  return out;
}

Image procedural_base(int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) {
    throw DimensionError("procedural base needs a positive size");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(width, height, 0.0);

  // Value noise over a few octaves, bilinear between lattice points.
  double amplitude = 1.0;
  for (int cells = 3; cells <= 24; cells *= 2) {
    const int gw = cells + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gw);
    for (auto& v : lattice) v = unit(rng);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / height * cells;
      const int y0 = static_cast<int>(fy);
      const double ty = fy - y0;
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / width * cells;
        const int x0 = static_cast<int>(fx);
        const double tx = fx - x0;
        auto at = [&](int xi, int yi) {
          return lattice[static_cast<std::size_t>(yi) * gw + xi];
        };
        const double top = at(x0, y0) * (1 - tx) + at(x0 + 1, y0) * tx;
        const double bot = at(x0, y0 + 1) * (1 - tx) + at(x0 + 1, y0 + 1) * tx;
        img(x, y) += amplitude * (top * (1 - ty) + bot * ty);
      }
    }
    amplitude *= 0.5;
  }

  // A few hard-edged patches.
  for (int p = 0; p < 3; ++p) {
    const int x0 = static_cast<int>(unit(rng) * width);
    const int y0 = static_cast<int>(unit(rng) * height);
    const int x1 = std::min(width, x0 + 1 + static_cast<int>(unit(rng) * width / 2));
    const int y1 = std::min(height, y0 + 1 + static_cast<int>(unit(rng) * height / 2));
    const double level = unit(rng) - 0.5;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img(x, y) += level;
    }
  }

  const double lo = min_value(img);
  const double hi = max_value(img);
  const double span = hi > lo ? hi - lo : 1.0;
  for (auto& v : img.pixels()) v = 0.05 + 0.9 * (v - lo) / span;
  return img;
}

LinearityReport gamma_subtraction_demo(const TriplePair& triple) {
  if (triple.config.a != 1.0 || triple.config.b != 1.0) {
    throw ParameterError("linearity demo requires a = b = 1");
  }
  const double top = static_cast<double>(triple.config.ceiling());
  LinearityReport rep;
  rep.raw = residual(triple.m, triple.r, triple.t, [](double v) { return v; });
  const double g = rep.gamma_exponent;
  rep.gamma = residual(triple.m, triple.r, triple.t, [top, g](double v) {
    return top * std::pow(std::max(v, 0.0) / top, g);
  });
  return rep;
}

}  // namespace polar::synth
