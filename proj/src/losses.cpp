#include "polar/losses.hpp"

#include <algorithm>
#include <cmath>

namespace polar {

Image normalize01(const Image& img) {
  Image out(img.width(), img.height(), 0.0);
  if (img.empty()) return out;
  const double lo = min_value(img);
  const double hi = max_value(img);
  if (!(hi > lo)) return out;
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - lo) * inv;
  return out;
}

namespace {

struct Moments {
  double mx = 0.0;
  double my = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("ncc: shape mismatch");
  if (x.size() < 2) throw DimensionError("ncc needs at least 2 elements");
  const double n = static_cast<double>(x.size());
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mx += x[i];
    m.my += y[i];
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mx;
    const double dy = y[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

// N * sx * sy == sqrt(Sxx * Syy) for population deviations.
double ncc_from(const Moments& m) {
  const double v = m.sxy / (std::sqrt(m.sxx * m.syy) + kNccEpsilon);
  return std::clamp(v, -1.0, 1.0);
}

}  // namespace

double ncc(std::span<const double> x, std::span<const double> y) {
  return ncc_from(moments(x, y));
}

double ncc(const Image& x, const Image& y) {
  require_same_shape(x, y, "ncc");
  return ncc(x.pixels(), y.pixels());
}

LossValueWithGrad ncc_with_grad(const Image& x, const Image& y) {
  require_same_shape(x, y, "ncc");
  const Moments m = moments(x.pixels(), y.pixels());
  LossValueWithGrad out{ncc_from(m), Image(x.width(), x.height(), 0.0),
                        Image(y.width(), y.height(), 0.0)};
  const double root = std::sqrt(m.sxx * m.syy);
  if (!(root > 0.0)) return out;
  const double den = root + kNccEpsilon;
  // d/dx_i [Sxy / (sqrt(Sxx Syy) + eps)]
  const double cx = m.sxy * m.syy / (root * den * den);
  const double cy = m.sxy * m.sxx / (root * den * den);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mx;
    const double dy = y[i] - m.my;
    out.grad_a[i] = dy / den - cx * dx;
    out.grad_b[i] = dx / den - cy * dy;
  }
  return out;
}

double pncc_value(const Image& a, const Image& b,
                  const FeaturePyramidSpec& spec) {
  require_same_shape(a, b, "pncc");
  const Features fa = feature_pyramid(normalize01(a), spec);
  const Features fb = feature_pyramid(normalize01(b), spec);
  double total = 0.0;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const double share = 1.0 / static_cast<double>(fa[l].size());
    double level = 0.0;
    for (std::size_t c = 0; c < fa[l].size(); ++c) {
      level += ncc(fa[l][c], fb[l][c]);
    }
    total += level * share;
  }
  return total;
}

LossValueWithGrad pncc(const Image& a, const Image& b,
                       const FeaturePyramidSpec& spec) {
  require_same_shape(a, b, "pncc");
  const double range_a = max_value(a) - min_value(a);
  const double range_b = max_value(b) - min_value(b);
  const Features fa = feature_pyramid(normalize01(a), spec);
  const Features fb = feature_pyramid(normalize01(b), spec);

  Features ga(fa.size());
  Features gb(fb.size());
  double total = 0.0;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const double share = 1.0 / static_cast<double>(fa[l].size());
    double level = 0.0;
    for (std::size_t c = 0; c < fa[l].size(); ++c) {
      LossValueWithGrad r = ncc_with_grad(fa[l][c], fb[l][c]);
      level += r.value;
      for (auto& v : r.grad_a.pixels()) v *= share;
      for (auto& v : r.grad_b.pixels()) v *= share;
      ga[l].push_back(std::move(r.grad_a));
      gb[l].push_back(std::move(r.grad_b));
    }
    total += level * share;
  }

  LossValueWithGrad out{total, Image(a.width(), a.height(), 0.0),
                        Image(b.width(), b.height(), 0.0)};
  if (range_a > 0.0) {
    out.grad_a = feature_pyramid_adjoint(ga, a.width(), a.height(), spec);
    for (auto& v : out.grad_a.pixels()) v /= range_a;
  }
  if (range_b > 0.0) {
    out.grad_b = feature_pyramid_adjoint(gb, b.width(), b.height(), spec);
    for (auto& v : out.grad_b.pixels()) v /= range_b;
  }
  return out;
}

std::vector<double> default_level_weights(int width, int height,
                                          const FeaturePyramidSpec& spec) {
  std::vector<double> beta;
  for (const auto& level : spec.levels) {
    const double count = static_cast<double>(level.bank.size()) *
                         (width / level.factor) * (height / level.factor);
    beta.push_back(count > 0.0 ? 1.0 / count : 0.0);
  }
  return beta;
}

LossValueWithGrad masked_perceptual(const Image& t, const Image& t_hat,
                                    const Mask& mask,
                                    const FeaturePyramidSpec& spec,
                                    std::optional<std::vector<double>> beta) {
  require_same_shape(t, t_hat, "masked_perceptual");
  require_same_shape(t, mask, "masked_perceptual");
  const std::vector<double> weights =
      beta ? *beta : default_level_weights(t.width(), t.height(), spec);
  if (weights.size() != spec.levels.size()) {
    throw ParameterError("one perceptual weight per pyramid level required");
  }

  // The pyramid is linear, so F(O*T) - F(O*T_hat) == F(O*(T - T_hat)).
  Image diff(t.width(), t.height());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = mask[i] ? t[i] - t_hat[i] : 0.0;
  }
  const Features fd = feature_pyramid(diff, spec);

  Features sign(fd.size());
  double value = 0.0;
  for (std::size_t l = 0; l < fd.size(); ++l) {
    double level = 0.0;
    for (const Image& ch : fd[l]) {
      Image s(ch.width(), ch.height(), 0.0);
      for (std::size_t i = 0; i < ch.size(); ++i) {
        level += std::abs(ch[i]);
        s[i] = weights[l] * ((ch[i] > 0.0) - (ch[i] < 0.0));
      }
      sign[l].push_back(std::move(s));
    }
    value += weights[l] * level;
  }

  LossValueWithGrad out{value, feature_pyramid_adjoint(sign, t.width(),
                                                       t.height(), spec),
                        Image(t.width(), t.height(), 0.0)};
  for (std::size_t i = 0; i < out.grad_a.size(); ++i) {
    if (!mask[i]) out.grad_a[i] = 0.0;
    out.grad_b[i] = -out.grad_a[i];
  }
  return out;
}

}  // namespace polar
