#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "polar/fresnel.hpp"
#include "polar/losses.hpp"
#include "polar/metrics.hpp"
#include "polar/separate.hpp"
#include "polar/synth.hpp"
#include "test_support.hpp"

namespace polar {
namespace {

using testing::flat;
using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_image;
using testing::random_stack;
using testing::unflat;

synth::TriplePair brewster_triple(int size, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.incidence = fresnel::brewster_angle(1.7);
  cfg.dop_t_override = 0.0;
  cfg.seed = seed;
  return synth::make_triple(synth::procedural_base(size, size, 2 * seed + 1),
                            synth::procedural_base(size, size, 2 * seed + 2),
                            cfg);
}

Image sub(const Image& a, const Image& b) {
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

TEST(SeparatorConfig, Validation) {
  SeparatorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda_tv = -1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.step_size = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(SmoothedTv, ConstantIsZeroAndGradientChecks) {
  Image g;
  EXPECT_EQ(smoothed_tv(Image(5, 5, 2.0), 1e-3, &g), 0.0);
  for (double v : g.pixels()) EXPECT_EQ(v, 0.0);

  const Image u = random_image(9, 7, 1);
  smoothed_tv(u, 1e-3, &g);
  const auto f = [&](const std::vector<double>& v) {
    return smoothed_tv(Image(9, 7, v), 1e-3, nullptr);
  };
  EXPECT_LT(max_relative_error(flat(g), numeric_gradient(f, flat(u), 1e-7)), 1e-4);
}

TEST(Stage1Objective, GradientMatchesFiniteDifferences) {
  const PolarizedStack m = random_stack(8, 8, 2, 0.5, 1.0);
  const PolarizedStack r = random_stack(8, 8, 3, 0.0, 0.5);
  SeparatorConfig cfg;
  cfg.lambda_tv = 0.05;
  const auto o = stage1_objective(m, r, cfg);
  const auto f = [&](const std::vector<double>& v) {
    return stage1_objective(m, unflat(v, 8, 8), cfg).value;
  };
  EXPECT_LT(max_relative_error(flat(o.grad), numeric_gradient(f, flat(r), 1e-6)), 1e-4);
}

TEST(Stage2Objective, GradientMatchesFiniteDifferences) {
  const Image m_bar = random_image(16, 16, 4, 1.0, 2.0);
  const Image r_bar = random_image(16, 16, 5, 0.0, 1.0);
  const Image delta = random_image(16, 16, 6, -0.1, 0.1);
  SeparatorConfig cfg;
  cfg.lambda_pncc = 0.5;
  cfg.lambda_tv = 0.01;
  const auto o = stage2_objective(m_bar, r_bar, delta, cfg);
  const auto f = [&](const std::vector<double>& v) {
    return stage2_objective(m_bar, r_bar, Image(16, 16, v), cfg).value;
  };
  EXPECT_LT(max_relative_error(flat(o.grad), numeric_gradient(f, flat(delta), 1e-5)), 1e-4);
}

TEST(InitReflection, UnpolarizedAndFullyPolarizedInputs) {
  const PolarizedStack unpol(4, 4, 0.7);
  const auto r0 = init_reflection(unpol, compute_stokes(unpol));
  for (int k = 0; k < 4; ++k) {
    for (double v : r0[k].pixels()) EXPECT_EQ(v, 0.0);
  }
  const auto pol = synth::polarize_layer(random_image(4, 4, 7, 0.1, 1.0), 1.0, 0.3);
  const auto r1 = init_reflection(pol, compute_stokes(pol));
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < pol[k].size(); ++i) {
      EXPECT_NEAR(r1[k][i], pol[k][i], 1e-12);
    }
  }
}

TEST(InitReflection, BeatsHalfTheMixtureAtBrewster) {
  const auto tr = brewster_triple(32, 1);
  const auto r0 = init_reflection(tr.m, compute_stokes(tr.m));
  double err_init = 0.0;
  double err_half = 0.0;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < tr.m[k].size(); ++i) {
      err_init += std::abs(r0[k][i] - tr.r[k][i]);
      err_half += std::abs(0.5 * tr.m[k][i] - tr.r[k][i]);
      EXPECT_GE(r0[k][i], 0.0);
      EXPECT_LE(r0[k][i], tr.m[k][i]);
    }
  }
  EXPECT_LT(err_init, err_half);
}

TEST(Stage1, ZeroWeightsReturnStartPoint) {
  const auto tr = brewster_triple(16, 2);
  const auto r0 = init_reflection(tr.m, compute_stokes(tr.m));
  SeparatorConfig cfg;
  cfg.lambda_pol = 0.0;
  cfg.lambda_tv = 0.0;
  const auto r = stage1_estimate_r(tr.m, r0, cfg);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(r[k], r0[k]);
}

TEST(Stage1, ReflectionOnlySceneStaysOptimal) {
  auto tr = brewster_triple(16, 3);
  const PolarizedStack m = tr.r;
  SeparatorConfig cfg;
  const auto r0 = init_reflection(m, compute_stokes(m));
  const auto r = stage1_estimate_r(m, r0, cfg);
  const double s = 1.0 / std::exp2(std::ceil(std::log2(m.max_value())));
  const auto e1 = [&](const PolarizedStack& x) {
    PolarizedStack mn = m;
    PolarizedStack xn = x;
    for (int k = 0; k < 4; ++k) {
      for (auto& v : mn[k].pixels()) v *= s;
      for (auto& v : xn[k].pixels()) v *= s;
    }
    return stage1_objective(mn, xn, cfg).value;
  };
  EXPECT_LE(e1(r), e1(r0));
}

TEST(Stage1, RemovesTransmissionPolarization) {
  // Starting from R = 0 the implied transmission is the full, partially
  // polarized mixture.
  const auto tr = brewster_triple(64, 4);
  const PolarizedStack zero(64, 64, 0.0);
  StageTrace trace;
  const auto r = stage1_estimate_r(tr.m, zero, SeparatorConfig{}, &trace);
  const double before = depolarization_residual(tr.m, zero);
  const double after = depolarization_residual(tr.m, r);
  EXPECT_GT(before, 0.0);
  EXPECT_LE(after * 100.0, before);
}

TEST(Stage1, TraceIsNonIncreasingAndIteratesStayInBox) {
  const auto tr = brewster_triple(16, 5);
  SeparatorConfig cfg;
  cfg.max_iters = 60;
  StageTrace trace;
  int calls = 0;
  const auto r0 = init_reflection(tr.m, compute_stokes(tr.m));
  stage1_estimate_r(tr.m, r0, cfg, &trace,
                    [&](int stage, int it, const PolarizedStack& r) {
                      EXPECT_EQ(stage, 1);
                      EXPECT_EQ(it, calls++);
                      for (int k = 0; k < 4; ++k) {
                        for (std::size_t i = 0; i < r[k].size(); ++i) {
                          ASSERT_GE(r[k][i], 0.0);
                          ASSERT_LE(r[k][i], tr.m[k][i]);
                        }
                      }
                    });
  ASSERT_EQ(trace.objective.size(), static_cast<std::size_t>(trace.iterations) + 1);
  EXPECT_EQ(calls, trace.iterations + 1);
  for (std::size_t i = 1; i < trace.objective.size(); ++i) {
    EXPECT_LE(trace.objective[i], trace.objective[i - 1]);
  }
}

TEST(Stage2, NoPnccWeightKeepsSubtraction) {
  const auto tr = brewster_triple(16, 6);
  SeparatorConfig cfg;
  cfg.lambda_pncc = 0.0;
  const auto s2 = stage2_refine_t(tr.m, tr.r, cfg);
  const Image expect = sub(tr.m.intensity(), tr.r.intensity());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_NEAR(s2.t_hat[i], expect[i], 1e-9);
    EXPECT_EQ(s2.correction[i], 0.0);
  }
}

TEST(Stage2, ExactReflectionNeedsLittleCorrection) {
  const auto tr = brewster_triple(64, 7);
  const auto s2 = stage2_refine_t(tr.m, tr.r, SeparatorConfig{});
  EXPECT_GE(psnr(s2.t_hat, tr.t.intensity(), 4095.0), 40.0);
}

TEST(Stage2, PnccDoesNotIncrease) {
  const auto tr = brewster_triple(32, 8);
  const auto r0 = init_reflection(tr.m, compute_stokes(tr.m));
  SeparatorConfig cfg;
  cfg.max_iters = 50;
  const auto s2 = stage2_refine_t(tr.m, r0, cfg);
  const Image m_bar = tr.m.intensity();
  const Image r_before = r0.intensity();
  const double before = pncc_value(r_before, sub(m_bar, r_before));
  const Image r_after = s2.r_hat.intensity();
  const double after = pncc_value(r_after, s2.t_hat);
  EXPECT_LE(after, before);
  for (std::size_t i = 1; i < s2.trace.objective.size(); ++i) {
    EXPECT_LE(s2.trace.objective[i], s2.trace.objective[i - 1]);
  }
}

TEST(Separate, TransmissionFreeScene) {
  const auto tr = brewster_triple(32, 9);
  const PolarizedStack m = tr.r;
  const auto res = separate(m);
  EXPECT_LT(mean(res.t_hat), 0.01 * mean(m.intensity()));
}

TEST(Separate, ReflectionFreeScene) {
  synth::SynthConfig cfg;
  cfg.incidence = testing::deg(55.0);
  cfg.dop_t_override = 0.0;
  const auto tr = synth::make_triple(Image(32, 32, 0.0),
                                     synth::procedural_base(32, 32, 10), cfg);
  const auto res = separate(tr.m);
  EXPECT_GE(psnr(res.t_hat, tr.m.intensity(), 4095.0), 50.0);
}

TEST(Separate, ConservationAndDeterminism) {
  const auto tr = brewster_triple(32, 11);
  SeparatorConfig cfg;
  cfg.max_iters = 80;
  const auto a = separate(tr.m, cfg);
  const auto b = separate(tr.m, cfg);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(a.r_hat[k], b.r_hat[k]);
  EXPECT_EQ(a.t_hat, b.t_hat);
  EXPECT_EQ(a.stage1.objective, b.stage1.objective);
  EXPECT_EQ(a.stage2.objective, b.stage2.objective);

  const Image t_from_r = sub(tr.m.intensity(), a.r_hat.intensity());
  for (std::size_t i = 0; i < t_from_r.size(); ++i) {
    EXPECT_NEAR(a.t_hat[i], t_from_r[i], 1e-9);
  }
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < tr.m[k].size(); ++i) {
      EXPECT_GE(a.r_hat[k][i], 0.0);
      EXPECT_LE(a.r_hat[k][i], tr.m[k][i]);
    }
  }
}

TEST(Separate, RejectsGammaStacks) {
  PolarizedStack m(16, 16, 1.0, Domain::gamma);
  EXPECT_THROW(separate(m), DomainError);
}

TEST(Separate, NonFiniteInputRaisesSolverError) {
  const auto tr = brewster_triple(16, 12);
  PolarizedStack m = tr.m;
  m[1](3, 4) = std::numeric_limits<double>::quiet_NaN();
  try {
    separate(m);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.stage(), 1);
    EXPECT_EQ(e.iteration(), 0);
    EXPECT_EQ(e.last_iterate().width(), 16);
  }
}

}  // namespace
}  // namespace polar
