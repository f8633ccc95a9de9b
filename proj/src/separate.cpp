#include "polar/separate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polar/losses.hpp"

namespace polar {

void SeparatorConfig::validate() const {
  if (!(lambda_pol >= 0.0) || !(lambda_pncc >= 0.0) || !(lambda_tv >= 0.0)) {
    throw ParameterError("separator weights must be non-negative");
  }
  if (!(step_size > 0.0)) throw ParameterError("step size must be positive");
  if (max_iters < 1) throw ParameterError("max_iters must be at least 1");
  if (!(tol >= 0.0)) throw ParameterError("tolerance must be non-negative");
  if (!(tv_epsilon > 0.0)) throw ParameterError("tv_epsilon must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) {
    throw ParameterError("Armijo constant must lie in (0, 1)");
  }
  pyramid.validate();
}

double smoothed_tv(const Image& u, double eps, Image* grad) {
  const int w = u.width();
  const int h = u.height();
  if (grad) *grad = Image(w, h, 0.0);
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 1 < w ? u(x + 1, y) - u(x, y) : 0.0;
      const double dy = y + 1 < h ? u(x, y + 1) - u(x, y) : 0.0;
      const double mag = std::sqrt(dx * dx + dy * dy + eps * eps);
      total += mag - eps;
      if (grad) {
        const double gx = dx / mag;
        const double gy = dy / mag;
        (*grad)(x, y) -= gx + gy;
        if (x + 1 < w) (*grad)(x + 1, y) += gx;
        if (y + 1 < h) (*grad)(x, y + 1) += gy;
      }
    }
  }
  return total;
}

double depolarization_residual(const PolarizedStack& m,
                               const PolarizedStack& r) {
  if (!m.same_shape(r)) throw DimensionError("depolarization residual: shape");
  double s = 0.0;
  for (std::size_t i = 0; i < m[0].size(); ++i) {
    const double a = (m[0][i] - r[0][i]) - (m[2][i] - r[2][i]);
    const double b = (m[1][i] - r[1][i]) - (m[3][i] - r[3][i]);
    s += a * a + b * b;
  }
  return s;
}

namespace {

// Shared by the public objectives and the value-only line-search trials.
double stage1_eval(const PolarizedStack& m, const PolarizedStack& r,
                   const SeparatorConfig& cfg, PolarizedStack* grad) {
  if (!m.same_shape(r)) throw DimensionError("stage 1: shape mismatch");
  if (grad) *grad = PolarizedStack(m.width(), m.height());
  double value = 0.0;
  if (cfg.lambda_pol > 0.0) {
    for (std::size_t i = 0; i < m[0].size(); ++i) {
      const double a = (m[0][i] - r[0][i]) - (m[2][i] - r[2][i]);
      const double b = (m[1][i] - r[1][i]) - (m[3][i] - r[3][i]);
      value += cfg.lambda_pol * (a * a + b * b);
      if (grad) {
        (*grad)[0][i] = -2.0 * cfg.lambda_pol * a;
        (*grad)[2][i] = 2.0 * cfg.lambda_pol * a;
        (*grad)[1][i] = -2.0 * cfg.lambda_pol * b;
        (*grad)[3][i] = 2.0 * cfg.lambda_pol * b;
      }
    }
  }
  if (cfg.lambda_tv > 0.0) {
    Image g;
    value += cfg.lambda_tv *
             smoothed_tv(r.intensity(), cfg.tv_epsilon, grad ? &g : nullptr);
    if (grad) {
      for (int k = 0; k < 4; ++k) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*grad)[k][i] += 0.5 * cfg.lambda_tv * g[i];
        }
      }
    }
  }
  return value;
}

double stage2_eval(const Image& m_bar, const Image& r_bar, const Image& delta,
                   const SeparatorConfig& cfg, Image* grad) {
  require_same_shape(m_bar, r_bar, "stage 2");
  require_same_shape(m_bar, delta, "stage 2");
  if (grad) *grad = Image(delta.width(), delta.height(), 0.0);
  double value = 0.0;
  if (cfg.lambda_pncc > 0.0) {
    Image refl(delta.width(), delta.height());
    Image trans(delta.width(), delta.height());
    for (std::size_t i = 0; i < delta.size(); ++i) {
      refl[i] = r_bar[i] + delta[i];
      trans[i] = m_bar[i] - refl[i];
    }
    if (grad) {
      const LossValueWithGrad p = pncc(refl, trans, cfg.pyramid);
      value += cfg.lambda_pncc * p.value;
      for (std::size_t i = 0; i < delta.size(); ++i) {
        (*grad)[i] = cfg.lambda_pncc * (p.grad_a[i] - p.grad_b[i]);
      }
    } else {
      value += cfg.lambda_pncc * pncc_value(refl, trans, cfg.pyramid);
    }
  }
  if (cfg.lambda_tv > 0.0) {
    Image g;
    value += cfg.lambda_tv *
             smoothed_tv(delta, cfg.tv_epsilon, grad ? &g : nullptr);
    if (grad) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*grad)[i] += cfg.lambda_tv * g[i];
      }
    }
  }
  return value;
}

}  // namespace

StackObjective stage1_objective(const PolarizedStack& m,
                                const PolarizedStack& r,
                                const SeparatorConfig& cfg) {
  StackObjective out;
  out.value = stage1_eval(m, r, cfg, &out.grad);
  return out;
}

ImageObjective stage2_objective(const Image& m_bar, const Image& r_bar,
                                const Image& delta,
                                const SeparatorConfig& cfg) {
  ImageObjective out;
  out.value = stage2_eval(m_bar, r_bar, delta, cfg, &out.grad);
  return out;
}

PolarizedStack init_reflection(const PolarizedStack& m,
                               const StokesMaps& stokes) {
  require_same_shape(m[0], stokes.intensity, "init_reflection");
  PolarizedStack r0(m.width(), m.height());
  for (std::size_t i = 0; i < m[0].size(); ++i) {
    const double unpolarized = 0.5 * (1.0 - stokes.dop[i]) * stokes.intensity[i];
    for (int k = 0; k < 4; ++k) {
      r0[k][i] = std::clamp(m[k][i] - unpolarized, 0.0, std::max(m[k][i], 0.0));
    }
  }
  return r0;
}

namespace {

// Power of two at or above the data peak, so rescaling is exact.
double exact_scale(const PolarizedStack& m) {
  const double peak = m.max_value();
  if (!(peak > 0.0) || !std::isfinite(peak)) return 1.0;
  return std::exp2(std::ceil(std::log2(peak)));
}

PolarizedStack scaled(const PolarizedStack& s, double factor) {
  PolarizedStack out = s;
  for (int k = 0; k < 4; ++k) {
    for (auto& v : out[k].pixels()) v *= factor;
  }
  return out;
}

void require_linear(const PolarizedStack& m) {
  if (m.domain != Domain::linear_raw) {
    throw DomainError("separation requires a linear_raw stack");
  }
}

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

using Objective = std::function<double(const std::vector<double>&,
                                       std::vector<double>*)>;
using Visit = std::function<void(int, const std::vector<double>&)>;

// Projected gradient descent with backtracking (halving, Armijo). Every
// accepted step is a strict decrease, so the trace is non-increasing.
std::vector<double> projected_descent(std::vector<double> x, const Box& box,
                                      const Objective& f,
                                      const SeparatorConfig& cfg,
                                      StageTrace& trace, const Visit& visit,
                                      const std::function<void(int,
                                          const std::vector<double>&)>& fail) {
  const std::size_t n = x.size();
  std::vector<double> g(n);
  std::vector<double> cand(n);
  double fx = f(x, &g);
  if (!std::isfinite(fx)) fail(0, x);
  trace.objective.assign(1, fx);
  trace.converged = false;
  trace.iterations = 0;
  if (visit) visit(0, x);

  double step = cfg.step_size;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    bool accepted = false;
    double f_cand = fx;
    for (int halvings = 0; halvings < 64; ++halvings) {
      double slope = 0.0;
      bool moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        cand[i] = std::clamp(x[i] - step * g[i], box.lower[i], box.upper[i]);
        slope += g[i] * (cand[i] - x[i]);
        moved = moved || cand[i] != x[i];
      }
      if (!moved) break;
      f_cand = f(cand, nullptr);
      if (std::isfinite(f_cand) && f_cand < fx &&
          f_cand <= fx + cfg.armijo * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      trace.converged = true;
      break;
    }
    const double decrease = fx - f_cand;
    x.swap(cand);
    f(x, &g);
    const double previous = fx;
    fx = f_cand;
    trace.objective.push_back(fx);
    trace.iterations = it;
    if (visit) visit(it, x);
    if (decrease <= cfg.tol * std::abs(previous)) {
      trace.converged = true;
      break;
    }
    step *= 2.0;
  }
  return x;
}

std::vector<double> flatten(const PolarizedStack& s) {
  std::vector<double> v;
  v.reserve(4 * s[0].size());
  for (int k = 0; k < 4; ++k) {
    v.insert(v.end(), s[k].pixels().begin(), s[k].pixels().end());
  }
  return v;
}

PolarizedStack unflatten(const std::vector<double>& v, int w, int h) {
  PolarizedStack s(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (int k = 0; k < 4; ++k) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(k * n), n,
                s[k].pixels().begin());
  }
  return s;
}

}  // namespace

PolarizedStack stage1_estimate_r(const PolarizedStack& m,
                                 const PolarizedStack& r0,
                                 const SeparatorConfig& cfg,
                                 StageTrace* trace,
                                 const IterateObserver& observer) {
  cfg.validate();
  require_linear(m);
  if (!m.same_shape(r0)) throw DimensionError("stage 1: R0 shape mismatch");
  const double scale = exact_scale(m);
  const PolarizedStack mn = scaled(m, 1.0 / scale);
  const int w = m.width();
  const int h = m.height();

  Box box{std::vector<double>(4 * mn[0].size(), 0.0), flatten(mn)};
  for (auto& u : box.upper) u = std::max(u, 0.0);
  std::vector<double> x = flatten(scaled(r0, 1.0 / scale));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i], box.lower[i], box.upper[i]);
  }

  const Objective f = [&](const std::vector<double>& v,
                          std::vector<double>* grad) {
    if (!grad) return stage1_eval(mn, unflatten(v, w, h), cfg, nullptr);
    PolarizedStack g;
    const double value = stage1_eval(mn, unflatten(v, w, h), cfg, &g);
    *grad = flatten(g);
    return value;
  };
  Visit visit;
  if (observer) {
    visit = [&](int it, const std::vector<double>& v) {
      observer(1, it, scaled(unflatten(v, w, h), scale));
    };
  }
  const auto fail = [&](int it, const std::vector<double>& v) {
    throw SolverError("stage 1 objective is not finite", 1, it,
                      scaled(unflatten(v, w, h), scale));
  };

  StageTrace local;
  x = projected_descent(std::move(x), box, f, cfg, local, visit, fail);
  if (trace) *trace = std::move(local);
  return scaled(unflatten(x, w, h), scale);
}

PolarizedStack stage1_estimate_r(const PolarizedStack& m,
                                 const SeparatorConfig& cfg,
                                 StageTrace* trace) {
  require_linear(m);
  return stage1_estimate_r(m, init_reflection(m, compute_stokes(m)), cfg,
                           trace);
}

Stage2Result stage2_refine_t(const PolarizedStack& m,
                             const PolarizedStack& r_hat,
                             const SeparatorConfig& cfg,
                             const IterateObserver& observer) {
  cfg.validate();
  require_linear(m);
  if (!m.same_shape(r_hat)) throw DimensionError("stage 2: R shape mismatch");
  const double scale = exact_scale(m);
  const PolarizedStack mn = scaled(m, 1.0 / scale);
  const PolarizedStack rn = scaled(r_hat, 1.0 / scale);
  const Image m_bar = mn.intensity();
  const Image r_bar = rn.intensity();
  const int w = m.width();
  const int h = m.height();
  const std::size_t n = m_bar.size();

  // d / 2 is added to every channel, so d is bounded by the tightest channel.
  Box box{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double lo = HUGE_VAL;
    double hi = HUGE_VAL;
    for (int k = 0; k < 4; ++k) {
      lo = std::min(lo, rn[k][i]);
      hi = std::min(hi, mn[k][i] - rn[k][i]);
    }
    box.lower[i] = std::min(0.0, -2.0 * lo);
    box.upper[i] = std::max(0.0, 2.0 * hi);
  }

  const auto apply = [&](const std::vector<double>& d, double factor) {
    PolarizedStack r(w, h);
    for (int k = 0; k < 4; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        r[k][i] = std::clamp(rn[k][i] + 0.5 * d[i], 0.0,
                             std::max(mn[k][i], 0.0)) *
                  factor;
      }
    }
    return r;
  };

  const Objective f = [&](const std::vector<double>& v,
                          std::vector<double>* grad) {
    if (!grad) return stage2_eval(m_bar, r_bar, Image(w, h, v), cfg, nullptr);
    Image g;
    const double value = stage2_eval(m_bar, r_bar, Image(w, h, v), cfg, &g);
    grad->assign(g.pixels().begin(), g.pixels().end());
    return value;
  };
  Visit visit;
  if (observer) {
    visit = [&](int it, const std::vector<double>& v) {
      observer(2, it, apply(v, scale));
    };
  }
  const auto fail = [&](int it, const std::vector<double>& v) {
    throw SolverError("stage 2 objective is not finite", 2, it,
                      apply(v, scale));
  };

  Stage2Result out;
  const std::vector<double> d = projected_descent(
      std::vector<double>(n, 0.0), box, f, cfg, out.trace, visit, fail);

  out.r_hat = apply(d, 1.0);
  out.correction = Image(w, h, d);
  out.t_hat = Image(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += mn[k][i] - out.r_hat[k][i];
    out.t_hat[i] = 0.5 * s * scale;
    out.correction[i] *= scale;
  }
  out.r_hat = scaled(out.r_hat, scale);
  return out;
}

SeparationResult separate(const PolarizedStack& m, const SeparatorConfig& cfg,
                          const IterateObserver& observer) {
  cfg.validate();
  require_linear(m);
  const StokesMaps stokes = compute_stokes(m);
  const PolarizedStack r0 = init_reflection(m, stokes);

  SeparationResult res;
  res.scale = exact_scale(m);
  const PolarizedStack r1 = stage1_estimate_r(m, r0, cfg, &res.stage1, observer);
  Stage2Result s2 = stage2_refine_t(m, r1, cfg, observer);
  res.r_hat = std::move(s2.r_hat);
  res.t_hat = std::move(s2.t_hat);
  res.correction = std::move(s2.correction);
  res.stage2 = std::move(s2.trace);
  res.converged = res.stage1.converged && res.stage2.converged;
  return res;
}

}  // namespace polar
