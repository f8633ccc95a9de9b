#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "polar/polar_core.hpp"
#include "test_support.hpp"

namespace polar {
namespace {

Image16 mosaic_of(int w, int h, std::vector<std::uint16_t> v) {
  return Image16(w, h, std::move(v));
}

TEST(Demux, SinglePixelFollowsPattern) {
  const auto s = demux_mosaic(make_mosaic(mosaic_of(2, 2, {10, 20, 30, 40})));
  ASSERT_EQ(s.width(), 1);
  ASSERT_EQ(s.height(), 1);
  EXPECT_EQ(s[0](0, 0), 10);
  EXPECT_EQ(s[1](0, 0), 20);
  EXPECT_EQ(s[2](0, 0), 30);
  EXPECT_EQ(s[3](0, 0), 40);
  EXPECT_EQ(s.domain, Domain::linear_raw);
}

TEST(Demux, ConstantMosaicGivesConstantChannels) {
  const auto s = demux_mosaic(make_mosaic(Image16(4, 4, 777)));
  ASSERT_EQ(s.width(), 2);
  for (int k = 0; k < 4; ++k) {
    for (double v : s[k].pixels()) EXPECT_EQ(v, 777);
  }
}

TEST(Demux, CustomPatternPermutesChannels) {
  MosaicPattern p;
  p.position = {3, 2, 1, 0};
  const auto s =
      demux_mosaic(make_mosaic(mosaic_of(2, 2, {10, 20, 30, 40}), 12, p));
  EXPECT_EQ(s[0](0, 0), 40);
  EXPECT_EQ(s[3](0, 0), 10);
}

TEST(Demux, RejectsOddDimensions) {
  EXPECT_THROW(demux_mosaic(make_mosaic(Image16(3, 4, 0))), DimensionError);
  EXPECT_THROW(demux_mosaic(make_mosaic(Image16(4, 5, 0))), DimensionError);
}

TEST(Demux, RejectsSamplesAboveBitDepth) {
  EXPECT_THROW(demux_mosaic(make_mosaic(Image16(2, 2, 4096), 12)), RangeError);
}

TEST(Demux, RejectsInvalidPattern) {
  MosaicPattern p;
  p.position = {0, 0, 1, 2};
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Remux, SinglePixel) {
  PolarizedStack s(1, 1);
  for (int k = 0; k < 4; ++k) s[k](0, 0) = k + 1;
  const auto m = remux_mosaic(s);
  EXPECT_EQ(m.data, mosaic_of(2, 2, {1, 2, 3, 4}));
}

TEST(Remux, OutOfRangeRaisesUnlessClamped) {
  PolarizedStack s(1, 1, 4096.0);
  EXPECT_THROW(remux_mosaic(s, {}, 12), RangeError);
  s[0](0, 0) = -1.0;
  EXPECT_THROW(remux_mosaic(s, {}, 12), RangeError);
  const auto m = remux_mosaic(s, {}, 12, true);
  EXPECT_EQ(m.data(0, 0), 0);
  EXPECT_EQ(m.data(1, 0), 4095);
}

TEST(Remux, RejectsGammaStacks) {
  PolarizedStack s(1, 1, 1.0, Domain::gamma);
  EXPECT_THROW(remux_mosaic(s), DomainError);
}

TEST(Remux, RoundTripsWithDemux) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 4095);
  for (int trial = 0; trial < 50; ++trial) {
    Image16 raw(8, 8);
    for (auto& v : raw.pixels()) v = static_cast<std::uint16_t>(u(rng));
    MosaicPattern p;
    std::shuffle(p.position.begin(), p.position.end(), rng);
    const RawMosaic m = make_mosaic(raw, 12, p);
    EXPECT_EQ(remux_mosaic(demux_mosaic(m), p).data, raw);

    PolarizedStack s(4, 4);
    for (int k = 0; k < 4; ++k) {
      for (auto& v : s[k].pixels()) v = u(rng);
    }
    const auto back = demux_mosaic(remux_mosaic(s, p));
    for (int k = 0; k < 4; ++k) EXPECT_EQ(back[k], s[k]);
  }
}

TEST(Malus, ReferenceValues) {
  EXPECT_DOUBLE_EQ(malus_render({1.0, 1.0, 0.0}, 0.0), 1.0);
  EXPECT_NEAR(malus_render({1.0, 1.0, 0.0}, kPi / 2), 0.0, 1e-16);
  for (double theta : {0.0, 0.3, 1.2, 2.9}) {
    EXPECT_DOUBLE_EQ(malus_render({1.0, 0.0, 0.7}, theta), 0.5);
  }
}

TEST(Malus, FullyPolarizedMatchesCosineSquared) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const double phi = a(rng);
    const double theta = a(rng);
    const double c = std::cos(phi - theta);
    EXPECT_NEAR(malus_render({2.5, 1.0, phi}, theta), 2.5 * c * c, 1e-12);
  }
}

TEST(RenderStack, ReferenceValues) {
  LightImage unpol{Image(3, 2, 2.0), Image(3, 2, 0.0), Image(3, 2, 0.4)};
  const auto s = render_stack(unpol);
  for (int k = 0; k < 4; ++k) {
    for (double v : s[k].pixels()) EXPECT_DOUBLE_EQ(v, 1.0);
  }
  LightImage pol{Image(1, 1, 1.0), Image(1, 1, 1.0), Image(1, 1, 0.0)};
  const auto p = render_stack(pol);
  EXPECT_NEAR(p[0](0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p[1](0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p[2](0, 0), 0.0, 1e-15);
  EXPECT_NEAR(p[3](0, 0), 0.5, 1e-15);
}

LightImage random_light(int w, int h, std::uint64_t seed) {
  return {testing::random_image(w, h, seed, 0.0, 4.0),
          testing::random_image(w, h, seed + 1, 0.0, 1.0),
          testing::random_image(w, h, seed + 2, -kPi / 2, kPi / 2)};
}

TEST(RenderStack, ChannelIdentity) {
  const auto light = random_light(16, 16, 11);
  const auto s = render_stack(light);
  const Image total = s.intensity();
  for (std::size_t i = 0; i < total.size(); ++i) {
    EXPECT_NEAR(s[0][i] + s[2][i], s[1][i] + s[3][i], 1e-12);
    EXPECT_NEAR(s[0][i] + s[2][i], light.intensity[i], 1e-12);
    EXPECT_NEAR(total[i], light.intensity[i], 1e-12);
  }
}

TEST(Stokes, ReferenceValues) {
  PolarizedStack s(1, 1);
  s[0](0, 0) = 1.0;
  s[1](0, 0) = 0.5;
  s[2](0, 0) = 0.0;
  s[3](0, 0) = 0.5;
  auto st = compute_stokes(s);
  EXPECT_DOUBLE_EQ(st.intensity(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(st.dop(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(st.aop(0, 0), 0.0);

  st = compute_stokes(PolarizedStack(1, 1, 0.5));
  EXPECT_DOUBLE_EQ(st.intensity(0, 0), 1.0);
  EXPECT_EQ(st.dop(0, 0), 0.0);
  EXPECT_EQ(st.aop(0, 0), 0.0);
}

TEST(Stokes, ZeroIntensityHasZeroDop) {
  const auto st = compute_stokes(PolarizedStack(2, 2, 0.0));
  for (double v : st.dop.pixels()) EXPECT_EQ(v, 0.0);
  for (double v : st.aop.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Stokes, RoundTripRecoversLight) {
  const auto light = random_light(32, 32, 21);
  const auto st = compute_stokes(render_stack(light));
  for (std::size_t i = 0; i < st.intensity.size(); ++i) {
    EXPECT_NEAR(st.intensity[i], light.intensity[i], 1e-9);
    EXPECT_NEAR(st.dop[i], light.dop[i], 1e-9);
    EXPECT_NEAR(wrap_half_pi(st.aop[i] - light.aop[i]), 0.0, 1e-9);
    EXPECT_GE(st.aop[i], -kPi / 2);
    EXPECT_LT(st.aop[i], kPi / 2);
  }
}

TEST(Stokes, ClampsInconsistentDopAndCounts) {
  PolarizedStack s(2, 1, 0.25);
  s[0](0, 0) = 1.0;
  s[1](0, 0) = 0.0;
  s[2](0, 0) = 0.0;
  s[3](0, 0) = 0.0;
  const auto st = compute_stokes(s);
  EXPECT_EQ(st.dop(0, 0), 1.0);
  EXPECT_EQ(st.dop_clamped, 1u);
}

TEST(Stokes, RejectsGammaData) {
  EXPECT_THROW(compute_stokes(PolarizedStack(1, 1, 0.5, Domain::gamma)),
               DomainError);
}

TEST(Stokes, DopIsScaleInvariantAndAopShiftInvariant) {
  const auto s = render_stack(random_light(8, 8, 31));
  PolarizedStack scaled = s;
  PolarizedStack shifted = s;
  for (int k = 0; k < 4; ++k) {
    for (auto& v : scaled[k].pixels()) v *= 37.0;
    for (auto& v : shifted[k].pixels()) v += 0.8;
  }
  const auto a = compute_stokes(s);
  const auto b = compute_stokes(scaled);
  const auto c = compute_stokes(shifted);
  for (std::size_t i = 0; i < a.dop.size(); ++i) {
    EXPECT_NEAR(a.dop[i], b.dop[i], 1e-12);
    EXPECT_NEAR(wrap_half_pi(a.aop[i] - b.aop[i]), 0.0, 1e-12);
    EXPECT_NEAR(wrap_half_pi(a.aop[i] - c.aop[i]), 0.0, 1e-12);
  }
}

TEST(WrapHalfPi, Range) {
  EXPECT_DOUBLE_EQ(wrap_half_pi(kPi / 2), -kPi / 2);
  EXPECT_DOUBLE_EQ(wrap_half_pi(-kPi / 2), -kPi / 2);
  EXPECT_NEAR(wrap_half_pi(kPi + 0.1), 0.1, 1e-15);
  EXPECT_NEAR(wrap_half_pi(-0.1), -0.1, 1e-15);
}

TEST(Overexposure, StrictThreshold) {
  PolarizedStack s(3, 1, 0.1);
  s[2](0, 0) = 0.99;
  s[1](1, 0) = 0.5;
  s[3](2, 0) = 0.98;
  const Mask m = overexposure_mask(s, 0.98);
  EXPECT_EQ(m(0, 0), 0);
  EXPECT_EQ(m(1, 0), 1);
  EXPECT_EQ(m(2, 0), 1);
}

TEST(Overexposure, NormalizesByFullScale) {
  PolarizedStack s(2, 1, 100.0);
  s[0](0, 0) = 4095.0;
  const Mask m = overexposure_mask(s, 0.98, 4095.0);
  EXPECT_EQ(m(0, 0), 0);
  EXPECT_EQ(m(1, 0), 1);
  EXPECT_EQ(compute_stokes(s, 0.98, 4095.0).mask, m);
}

TEST(Overexposure, RejectsThresholdOutsideUnitInterval) {
  const PolarizedStack s(1, 1, 0.1);
  EXPECT_THROW(overexposure_mask(s, 0.0), ParameterError);
  EXPECT_THROW(overexposure_mask(s, 1.5), ParameterError);
  EXPECT_NO_THROW(overexposure_mask(s, 1.0));
}

}  // namespace
}  // namespace polar
