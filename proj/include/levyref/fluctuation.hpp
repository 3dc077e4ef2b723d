#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "levyref/errors.hpp"
#include "levyref/exp_sum.hpp"
#include "levyref/grid_fn.hpp"
#include "levyref/levy_model.hpp"
#include "levyref/rate_profile.hpp"
#include "levyref/refracted.hpp"
#include "levyref/volterra.hpp"

namespace levyref {

// Precomputed scale grids sharing one driver, rate profile, discount q and
// lower level d. Step profiles are built by the barrier recursion, smooth
// profiles by the marching solver. z and u start at 0; below their origins
// the rate vanishes, so the accessors continue them analytically with z = 1
// and u = e^{Phi(q) x}.
struct ScaleSet {
  LevyModel model;
  RateProfile profile;
  double q = 0.0;
  double d = 0.0;
  double h = 0.0;
  double x_max = 0.0;
  double phi_q = 0.0;
  GridFn w;  // w(. ; d)
  GridFn z;
  GridFn u;

  double w_at(double x) const { return x < w.origin ? 0.0 : w.value_at(x); }
  double z_at(double x) const { return x < z.origin ? 1.0 : z.value_at(x); }
  double u_at(double x) const { return x < u.origin ? std::exp(phi_q * x) : u.value_at(x); }
};

inline ScaleSet make_scale_set(const LevyModel& model, const RateProfile& profile, double q,
                               double d, double h, double x_max) {
  double phi_q = right_inverse(model, DriftShift::none(), q);
  if (profile.is_step())
    return ScaleSet{model,
                    profile,
                    q,
                    d,
                    h,
                    x_max,
                    phi_q,
                    build_w(model, profile, q, d, h, x_max),
                    build_z(model, profile, q, 0.0, h, x_max),
                    build_u(model, profile, q, std::min(d, 0.0), h, x_max)};
  return ScaleSet{model,
                  profile,
                  q,
                  d,
                  h,
                  x_max,
                  phi_q,
                  march_w(model, profile, q, d, h, x_max),
                  march_z(model, profile, q, h, x_max),
                  march_u(model, profile, q, h, x_max)};
}

// Start level and barriers for one exit computation. The discount and the
// lower barrier must agree with the scale set the query is evaluated against;
// fields a particular functional does not use are ignored.
struct ExitQuery {
  double x = 0.0;
  double d = 0.0;
  double a = 0.0;
  double q = 0.0;
};

namespace detail {

inline void check_query(const ExitQuery& qr, const ScaleSet& s) {
  require(qr.q == s.q, ErrorKind::DomainError, "query discount differs from the scale set");
}

inline double xi_strict(const ScaleSet& s, double y) {
  return xi(s.profile, initial_value(s.model, DriftShift::none()), y);
}

// int_{b_k}^inf e^{-phi_k(q) z} f'(z) dz for the scale function f of the
// process with the top level removed (f selected by the seed kind). The k = 1
// tails are exact exponential sums; higher levels use the certified block
// extension over recursion grids.
inline double prefix_tail(const LevyModel& model, const RateProfile& profile, double q,
                          SeedKind kind, double h) {
  const auto& bars = profile.barriers();
  const auto& dels = profile.deltas();
  std::size_t k = bars.size();
  require(k >= 1 && bars.front() > 0.0, ErrorKind::DomainError,
          "the tail functionals need at least one positive barrier");
  double b_k = bars.back();
  double full_shift = 0.0;
  for (double dd : dels) full_shift += dd;
  double phi_k = right_inverse(model, DriftShift{full_shift, static_cast<int>(k)}, q);
  if (k == 1) {
    ExpSumScale W(model, DriftShift::none(), q);
    double phi0 = right_inverse(model, DriftShift::none(), q);
    if (kind == SeedKind::FirstKind) return W.tail_deriv_integral(phi_k, b_k);
    if (kind == SeedKind::SecondKind) return q * W.tail_value_integral(phi_k, b_k);
    return phi0 == 0.0 ? 0.0 : phi0 * std::exp((phi0 - phi_k) * b_k) / (phi_k - phi0);
  }
  RateProfile lower = RateProfile::step(std::vector<double>(bars.begin(), bars.end() - 1),
                                        std::vector<double>(dels.begin(), dels.end() - 1));
  auto eval_on = [&](double z_end, double spacing) {
    GridFn f = kind == SeedKind::FirstKind    ? build_w(model, lower, q, 0.0, spacing, z_end)
               : kind == SeedKind::SecondKind ? build_z(model, lower, q, 0.0, spacing, z_end)
                                              : build_u(model, lower, q, 0.0, spacing, z_end);
    return weighted_tail_on_grid(f, phi_k, b_k);
  };
  return certified_weighted_tail(eval_on, 0.0, b_k, h);
}

// lim_{a -> inf} z(a) / w(a), the coefficient of the one-sided down exit.
inline double down_coefficient(const ScaleSet& s) {
  if (s.profile.is_step() && s.profile.levels() == 0) return s.q / s.phi_q;
  if (s.profile.is_step())
    return prefix_tail(s.model, s.profile, s.q, SeedKind::SecondKind, s.h) /
           prefix_tail(s.model, s.profile, s.q, SeedKind::FirstKind, s.h);
  return limit_ratio(s.model, s.profile, s.q, SeedKind::SecondKind, 0.0, SeedKind::FirstKind,
                     0.0, s.h);
}

// w(. ; y) evaluated at pts (0 below the origin y). Step profiles go through
// the barrier-anchored recursion, which accepts any origin; smooth ones run
// one marched grid that serves every requested point.
inline std::vector<double> shifted_w_values(const ScaleSet& s, double y,
                                            const std::vector<double>& pts) {
  std::vector<double> out(pts.size(), 0.0);
  double top = y;
  for (double p : pts) top = std::max(top, p);
  if (s.profile.is_step()) {
    ShiftedW f = w_shifted_any(s.model, s.profile, s.q, y, s.h, top);
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = f.value_at(pts[i]);
    return out;
  }
  if (top <= y) {
    double w0 = initial_value(s.model, DriftShift::none());
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (pts[i] >= y) out[i] = w0;
    return out;
  }
  auto n = static_cast<std::size_t>(std::ceil((top - y) / s.h - 1e-9));
  n = std::max<std::size_t>(n, 1);
  GridFn g = march_w(s.model, s.profile, s.q, y, s.h, y + double(n) * s.h);
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i] >= y) out[i] = g.value_at(pts[i]);
  return out;
}

}  // namespace detail

// Discounted arrival at a before passing below d: w(x; d) / w(a; d).
inline double two_sided_up(const ExitQuery& qr, const ScaleSet& s) {
  detail::check_query(qr, s);
  require(qr.d == s.d, ErrorKind::DomainError, "query lower level differs from the scale set");
  require(qr.d <= qr.x && qr.x <= qr.a, ErrorKind::DomainError,
          "two-sided exit needs d <= x <= a");
  return s.w_at(qr.x) / s.w_at(qr.a);
}

// Discounted passage below 0 before reaching a: z(x) - (z(a) / w(a)) w(x).
// The identity is stated from lower level 0, so the scale set must be built
// with d = 0.
inline double two_sided_down(const ExitQuery& qr, const ScaleSet& s) {
  detail::check_query(qr, s);
  require(s.d == 0.0, ErrorKind::DomainError, "down-exit grids must be built from level 0");
  require(0.0 <= qr.x && qr.x <= qr.a, ErrorKind::DomainError,
          "two-sided exit needs 0 <= x <= a");
  return s.z_at(qr.x) - s.z_at(qr.a) / s.w_at(qr.a) * s.w_at(qr.x);
}

// Discounted passage below 0 with no upper constraint:
//   z(x) - lim_{a -> inf} (z(a) / w(a)) w(x),
// the limit evaluated by weighted level-(k-1) tails for step profiles and by
// the matched growth-functional ratio for smooth ones.
inline double one_sided_down(const ExitQuery& qr, const ScaleSet& s) {
  detail::check_query(qr, s);
  require(s.q > 0.0, ErrorKind::DomainError, "the undiscounted limit lives in ruin_probability");
  require(s.d == 0.0, ErrorKind::DomainError, "down-exit grids must be built from level 0");
  require(qr.x >= 0.0, ErrorKind::DomainError, "one-sided down exit starts at or above 0");
  if (s.profile.is_step() && s.profile.levels() > 0)
    require(s.profile.barriers().front() > 0.0, ErrorKind::DomainError,
            "the first barrier must be positive");
  return s.z_at(qr.x) - detail::down_coefficient(s) * s.w_at(qr.x);
}

// Discounted first passage to a (upward motion creeps, so there is no
// overshoot): u(x) / u(a). For step profiles the target must lie strictly
// above the top barrier.
inline double one_sided_up(const ExitQuery& qr, const ScaleSet& s) {
  detail::check_query(qr, s);
  require(qr.x <= qr.a, ErrorKind::DomainError, "one-sided up exit needs x <= a");
  if (s.profile.is_step() && s.profile.levels() > 0)
    require(s.profile.barriers().back() < qr.a, ErrorKind::DomainError,
            "upper target must lie strictly above the top rate barrier");
  return s.u_at(qr.x) / s.u_at(qr.a);
}

// Stopping regime of an occupation density: killed at both barriers, killed
// below 0, killed at the upper barrier, or never killed.
enum class ResolventVariant { TwoBarrier, LowerOnly, UpperOnly, Free };

// Discounted occupation density at the requested levels (left limits at the
// jump levels), with its integral over that grid; the quadrature splits
// panels at the known jump levels so the mass stays second order.
struct ResolventDensity {
  ResolventVariant variant = ResolventVariant::Free;
  std::vector<double> y;
  std::vector<double> density;
  double mass = 0.0;
};

inline ResolventDensity resolvent(const ExitQuery& qr, ResolventVariant variant,
                                  const ScaleSet& s, const std::vector<double>& y_grid) {
  detail::check_query(qr, s);
  require(!y_grid.empty(), ErrorKind::DomainError, "resolvent needs at least one level");
  for (std::size_t i = 0; i + 1 < y_grid.size(); ++i)
    require(y_grid[i] < y_grid[i + 1], ErrorKind::DomainError,
            "resolvent levels must be strictly increasing");

  bool step = s.profile.is_step();
  bool has_levels = s.profile.levels() > 0;

  double lead = 0.0;
  switch (variant) {
    case ResolventVariant::TwoBarrier:
      require(qr.d == s.d, ErrorKind::DomainError,
              "query lower level differs from the scale set");
      require(qr.d <= qr.x && qr.x <= qr.a, ErrorKind::DomainError, "need d <= x <= a");
      lead = s.w_at(qr.x) / s.w_at(qr.a);
      break;
    case ResolventVariant::LowerOnly:
      require(s.q > 0.0, ErrorKind::DomainError, "the killed-below-0 density needs q > 0");
      require(s.d == 0.0, ErrorKind::DomainError, "down-exit grids must be built from level 0");
      require(qr.x >= 0.0, ErrorKind::DomainError, "need x >= 0");
      if (step && has_levels)
        require(s.profile.barriers().front() > 0.0, ErrorKind::DomainError,
                "the first barrier must be positive");
      lead = s.w_at(qr.x);
      break;
    case ResolventVariant::UpperOnly:
      require(qr.x <= qr.a, ErrorKind::DomainError, "need x <= a");
      if (step && has_levels)
        require(s.profile.barriers().back() < qr.a, ErrorKind::DomainError,
                "upper target must lie strictly above the top rate barrier");
      lead = s.u_at(qr.x) / s.u_at(qr.a);
      break;
    case ResolventVariant::Free:
      require(s.q > 0.0, ErrorKind::DomainError, "the everywhere density needs q > 0");
      lead = s.u_at(qr.x);
      break;
  }

  double v0 = 0.0, tail_u = 0.0;
  if (variant == ResolventVariant::LowerOnly && step && has_levels)
    v0 = v_k(s.model, s.profile, s.q, 0.0, s.h);
  if (variant == ResolventVariant::Free && step && has_levels)
    tail_u = detail::prefix_tail(s.model, s.profile, s.q, SeedKind::Exponential, s.h);

  // ratio of the divergent upper-limit functionals that multiplies lead in
  // the variants whose upper barrier was sent to infinity
  auto companion = [&](double y) -> double {
    if (variant == ResolventVariant::LowerOnly) {
      if (step && !has_levels) return std::exp(-s.phi_q * y);
      if (step) return v_k(s.model, s.profile, s.q, y, s.h) / v0;
      return limit_ratio(s.model, s.profile, s.q, SeedKind::FirstKind, y, SeedKind::FirstKind,
                         0.0, s.h);
    }
    if (step && !has_levels) return std::exp(-s.phi_q * y) / s.model.psi_prime(s.phi_q);
    if (step)
      return v_k(s.model, s.profile, s.q, y, s.h) / s.profile.deltas().back() / tail_u;
    return limit_ratio(s.model, s.profile, s.q, SeedKind::FirstKind, y, SeedKind::Exponential,
                       0.0, s.h);
  };

  ResolventDensity out;
  out.variant = variant;
  out.y = y_grid;
  out.density.assign(y_grid.size(), 0.0);

  // One-sided density value. The reported vector carries left limits; right
  // limits differ where the density genuinely jumps: at y = x (a scale
  // function of bounded variation starts at W_i(0) > 0), at rate barriers
  // (Xi changes), and at the upper kill barrier.
  auto dens_side = [&](double y, bool from_right) -> double {
    bool supported = true;
    if (variant == ResolventVariant::TwoBarrier)
      supported = from_right ? (y >= qr.d && y < qr.a) : (y > qr.d && y <= qr.a);
    if (variant == ResolventVariant::LowerOnly) supported = from_right ? y >= 0.0 : y > 0.0;
    if (variant == ResolventVariant::UpperOnly) supported = from_right ? y < qr.a : y <= qr.a;
    if (!supported) return 0.0;

    double num;
    if (variant == ResolventVariant::TwoBarrier || variant == ResolventVariant::UpperOnly) {
      std::vector<double> pair = detail::shifted_w_values(s, y, {qr.x, qr.a});
      if (from_right && qr.x == y) pair[0] = 0.0;
      if (from_right && qr.a == y) pair[1] = 0.0;
      num = lead * pair[1] - pair[0];
    } else {
      double wxy = from_right && qr.x == y ? 0.0 : detail::shifted_w_values(s, y, {qr.x})[0];
      num = lead * companion(y) - wxy;
    }
    double w0 = initial_value(s.model, DriftShift::none());
    double dens = num / (from_right ? xi_right(s.profile, w0, y) : detail::xi_strict(s, y));
    if (dens < 0.0 && dens >= -1e-10) dens = 0.0;
    return dens;
  };

  for (std::size_t i = 0; i < y_grid.size(); ++i) out.density[i] = dens_side(y_grid[i], false);

  // Trapezoid mass with the jump levels split out of their panels, so the
  // integral keeps second order in the node spacing across discontinuities.
  std::vector<double> jumps;
  jumps.push_back(qr.x);
  if (step)
    for (double b : s.profile.barriers()) jumps.push_back(b);
  if (variant == ResolventVariant::TwoBarrier || variant == ResolventVariant::UpperOnly)
    jumps.push_back(qr.a);
  std::sort(jumps.begin(), jumps.end());
  jumps.erase(std::unique(jumps.begin(), jumps.end(),
                          [](double u, double v) { return std::abs(u - v) < 1e-12; }),
              jumps.end());

  std::size_t pj = 0;
  for (std::size_t i = 0; i + 1 < y_grid.size(); ++i) {
    double u = y_grid[i], v = y_grid[i + 1];
    while (pj < jumps.size() && jumps[pj] < u) ++pj;
    double pos = u;
    double val = out.density[i];
    std::size_t pk = pj;
    if (pk < jumps.size() && jumps[pk] == u) {
      val = dens_side(u, true);
      ++pk;
    }
    for (; pk < jumps.size() && jumps[pk] < v; ++pk) {
      double p = jumps[pk];
      out.mass += 0.5 * (p - pos) * (val + dens_side(p, false));
      pos = p;
      val = dens_side(p, true);
    }
    out.mass += 0.5 * (v - pos) * (val + out.density[i + 1]);
  }
  return out;
}

// Probability of ever passing below 0 for the undiscounted process.
// divergent_a reports that 1 was returned because the normalizing constant of
// the q = 0 identity is infinite (driver mean at or below the full drain
// rate, or a rate-weighted tail that failed to stabilize).
struct RuinResult {
  double value = 1.0;
  bool divergent_a = false;
};

inline RuinResult ruin_probability(const LevyModel& model, const RateProfile& profile, double x,
                                   double h = 1.0 / 1024.0) {
  require(x >= 0.0, ErrorKind::DomainError, "ruin is evaluated from a level at or above 0");
  double mean = model.mean();
  if (mean <= 0.0) return {1.0, true};
  if (mean - profile.sup_value() <= 0.0) return {1.0, true};

  if (profile.is_step()) {
    const auto& dels = profile.deltas();
    double top = profile.levels() > 0 ? profile.barriers().back() : 0.0;
    double x_max = std::ceil(std::max(x, top)) + 1.0;
    // the two-spacing pass removes the leading quadrature error of the grids
    auto eval = [&](double spacing) {
      std::vector<double> w_prev;
      GridFn w = build_w(model, profile, 0.0, 0.0, spacing, x_max, &w_prev);
      double denom = 1.0;
      double shed = 0.0;
      for (std::size_t j = 0; j < dels.size(); ++j) {
        denom -= dels[j] * w_prev[j];
        shed += dels[j];
      }
      return 1.0 - (mean - shed) / denom * w.value_at(x);
    };
    double coarse = eval(h);
    double fine = eval(h / 2.0);
    return {(4.0 * fine - coarse) / 3.0, false};
  }

  // Psi = 1 - w(x) / A with A = (1 + int_0^inf phi w') / mean at q = 0; the
  // integral is truncated once its block increments stop moving.
  double T = std::max(16.0, std::ceil(x) + 8.0);
  double prev_acc = -1.0;
  int stable = 0;
  for (;;) {
    GridFn w = march_w(model, profile, 0.0, 0.0, h, T);
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < w.n_nodes(); ++m) {
      double za = w.x_at(m), zb = w.x_at(m + 1);
      acc += 0.5 * w.h *
             (profile.value_right(za) * w.right_derivs[m] +
              profile.value(zb) * w.left_deriv(m + 1));
    }
    if (prev_acc >= 0.0 && std::abs(acc - prev_acc) <= 1e-10 * (1.0 + std::abs(acc))) {
      if (++stable >= 2) {
        double a_const = (1.0 + acc) / mean;
        return {1.0 - w.value_at(x) / a_const, false};
      }
    } else {
      stable = 0;
    }
    prev_acc = acc;
    T += 16.0;
    if (T > 4000.0) return {1.0, true};
  }
}

} // namespace levyref
