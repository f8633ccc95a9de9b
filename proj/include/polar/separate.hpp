#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "polar/errors.hpp"
#include "polar/image.hpp"
#include "polar/polar_core.hpp"
#include "polar/pyramid.hpp"

namespace polar {

/// Hyperparameters of the two-stage reflection / transmission separator.
///
/// Stage 1 estimates the reflection stack R inside the box [0, M] by making
/// the implied transmission M - R unpolarized, with a smoothed total
/// variation prior on the reflection intensity. Stage 2 refines the
/// reflection intensity by an unpolarized correction that decorrelates the
/// two layers under PNCC.
struct SeparatorConfig {
  double lambda_pol = 1.0;
  double lambda_pncc = 1e-5;
  double lambda_tv = 3e-6;
  double step_size = 0.1;
  int max_iters = 500;           ///< per stage
  double tol = 1e-6;             ///< relative objective decrease
  double tv_epsilon = 1e-3;      ///< TV smoothing, in normalized units
  double armijo = 1e-4;
  std::uint64_t seed = 0;
  FeaturePyramidSpec pyramid = FeaturePyramidSpec::standard();

  void validate() const;
};

/// Called with the stage (1 or 2), the iteration index (0 = start point) and
/// the current reflection estimate in input units.
using IterateObserver =
    std::function<void(int stage, int iteration, const PolarizedStack& r)>;

struct StageTrace {
  std::vector<double> objective;  ///< normalized units, entry 0 = start
  bool converged = false;
  int iterations = 0;
};

struct SeparationResult {
  PolarizedStack r_hat;
  Image t_hat;                    ///< intensity of M - R_hat
  Image correction;               ///< stage-2 intensity correction
  StageTrace stage1;
  StageTrace stage2;
  bool converged = false;
  double scale = 1.0;             ///< input units per normalized unit
};

/// Raised when an objective turns non-finite; carries the last finite
/// reflection iterate.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int stage, int iteration,
              PolarizedStack last)
      : Error(what), stage_(stage), iteration_(iteration),
        last_(std::move(last)) {}
  int stage() const { return stage_; }
  int iteration() const { return iteration_; }
  const PolarizedStack& last_iterate() const { return last_; }

 private:
  int stage_;
  int iteration_;
  PolarizedStack last_;
};

/// Smoothed isotropic total variation sum(sqrt(dx^2 + dy^2 + eps^2) - eps)
/// with forward differences; writes the gradient when `grad` is non-null.
double smoothed_tv(const Image& u, double eps, Image* grad);

/// sum over pixels of (T1 - T3)^2 + (T2 - T4)^2 with T = M - R.
double depolarization_residual(const PolarizedStack& m,
                               const PolarizedStack& r);

struct StackObjective {
  double value = 0.0;
  PolarizedStack grad;
};

struct ImageObjective {
  double value = 0.0;
  Image grad;
};

/// The solvers evaluate both objectives on data divided by the smallest power
/// of two at or above the peak of M.
///
/// lambda_pol * depolarization_residual(M, R) + lambda_tv * TV(intensity(R)).
StackObjective stage1_objective(const PolarizedStack& m,
                                const PolarizedStack& r,
                                const SeparatorConfig& cfg);

/// lambda_pncc * PNCC(Rbar + d, Mbar - Rbar - d) + lambda_tv * TV(d).
ImageObjective stage2_objective(const Image& m_bar, const Image& r_bar,
                                const Image& delta,
                                const SeparatorConfig& cfg);

/// R0_k = clamp(M_k - (1 - rho) I / 2, 0, M_k): the polarized part of the
/// observation is attributed to reflection.
PolarizedStack init_reflection(const PolarizedStack& m,
                               const StokesMaps& stokes);

PolarizedStack stage1_estimate_r(const PolarizedStack& m,
                                 const PolarizedStack& r0,
                                 const SeparatorConfig& cfg,
                                 StageTrace* trace = nullptr,
                                 const IterateObserver& observer = {});

/// Starts from init_reflection(m, compute_stokes(m)).
PolarizedStack stage1_estimate_r(const PolarizedStack& m,
                                 const SeparatorConfig& cfg,
                                 StageTrace* trace = nullptr);

struct Stage2Result {
  Image t_hat;
  Image correction;
  PolarizedStack r_hat;           ///< r_hat_k = R_k + correction / 2
  StageTrace trace;
};

/// Refines the reflection intensity by an unpolarized correction bounded so
/// that every channel stays in [0, M_k].
Stage2Result stage2_refine_t(const PolarizedStack& m,
                             const PolarizedStack& r_hat,
                             const SeparatorConfig& cfg,
                             const IterateObserver& observer = {});

SeparationResult separate(const PolarizedStack& m,
                          const SeparatorConfig& cfg = {},
                          const IterateObserver& observer = {});

}  // namespace polar
