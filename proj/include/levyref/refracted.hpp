#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "levyref/exp_conv.hpp"
#include "levyref/exp_sum.hpp"
#include "levyref/grid_fn.hpp"
#include "levyref/levy_model.hpp"
#include "levyref/rate_profile.hpp"

namespace levyref {

// Xi(y) = 1 - W(0) phi(y) with the strict rate convention. Equals the product
// prod_{j<=i} (1 - delta_j W_{j-1}(0)) across active levels, and 1 for
// unbounded variation. Strictly positive whenever the drain stays below the
// drift.
inline double xi(const RateProfile& profile, double w0, double y) {
  double v = 1.0 - w0 * profile.value(y);
  require(v > 1e-14, ErrorKind::NonPositiveXi,
          "rate profile at " + std::to_string(y) + " reaches the drift");
  return v;
}

inline double xi_right(const RateProfile& profile, double w0, double y) {
  double v = 1.0 - w0 * profile.value_right(y);
  require(v > 1e-14, ErrorKind::NonPositiveXi,
          "rate profile just above " + std::to_string(y) + " reaches the drift");
  return v;
}

namespace detail {

// In-place refraction step:
//   f := f + delta * int_b^x W_level(x - s) f'(s) ds.
// Values gain the convolution, derivatives gain
//   delta * (W_level(0) f'(x) + int_b^x W_level'(x - s) f'(s) ds),
// which realizes the one-sided derivative jump factor (1 + delta W_level(0))
// at the barrier node itself. The left derivative at b stays untouched.
inline void refract_level(GridFn& f, const ExpSumScale& W_level, double delta, double b) {
  std::size_t mb = f.node_of(b);
  std::size_t n = f.n_nodes();
  std::vector<double> g_right = f.right_derivs;
  std::vector<double> g_left(n);
  for (std::size_t m = 0; m < n; ++m) g_left[m] = f.left_deriv(m);

  ConvOut conv = conv_against(W_level, g_right, g_left, mb, f.h);
  double w0 = W_level.value0();

  double old_left_at_b = g_left[mb];
  for (std::size_t m = mb; m < n; ++m) {
    f.values[m] += delta * conv.value[m];
    f.right_derivs[m] = g_right[m] + delta * (w0 * g_right[m] + conv.dvalue[m]);
    if (m > mb) {
      double nl = g_left[m] + delta * (w0 * g_left[m] + conv.dvalue[m]);
      auto it = f.left_derivs.find(m);
      if (it != f.left_derivs.end() || nl != f.right_derivs[m]) f.left_derivs[m] = nl;
    }
  }
  f.left_derivs[mb] = old_left_at_b;
  f.mark_breakpoint(b);
}

// Barriers of the step profile that lie on [origin, x_end), with increments;
// barriers at or beyond x_end cannot influence values there (their integrals
// are empty) and are dropped.
struct ActiveLevels {
  std::vector<double> barriers;
  std::vector<double> deltas;
  std::vector<double> shifts;  // cumulative delta AFTER each kept level
};

inline ActiveLevels active_levels(const RateProfile& profile, double origin, double x_end) {
  ActiveLevels a;
  double cum = 0.0;
  for (std::size_t j = 0; j < profile.levels(); ++j) {
    double b = profile.barriers()[j];
    double d = profile.deltas()[j];
    cum += d;
    if (b < origin || b >= x_end) continue;
    a.barriers.push_back(b);
    a.deltas.push_back(d);
    a.shifts.push_back(cum);
  }
  return a;
}

} // namespace detail

// w_k(.;d): seed W(x - d), then one refraction step per barrier in increasing
// order. Values in GridFn.values, right derivatives in right_derivs, left
// derivatives at barrier nodes recorded separately.
inline GridFn build_w(const LevyModel& model, const RateProfile& profile, double q, double d,
                      double h, double x_max, std::vector<double>* w_prev_at_barrier = nullptr) {
  require(profile.is_step(), ErrorKind::DomainError, "barrier recursion needs a step profile");
  if (profile.levels() > 0)
    require(d < profile.barriers().front(), ErrorKind::DomainError,
            "origin must lie below the first barrier");
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - d) / h));
  require(n_panels >= 1 && std::abs(d + h * double(n_panels) - x_max) < 1e-9,
          ErrorKind::BreakpointMisaligned, "x_max must be origin plus a whole number of panels");

  ExpSumScale W0(model, DriftShift::none(), q);
  GridFn f = make_grid(d, h, n_panels + 1);
  for (std::size_t m = 0; m < f.n_nodes(); ++m) {
    double x = f.x_at(m);
    f.values[m] = W0.value(x - d);
    f.right_derivs[m] = W0.deriv(x - d);
  }
  // origin node: the function vanishes below d
  f.left_derivs[0] = 0.0;

  auto lv = detail::active_levels(profile, d, x_max);
  if (w_prev_at_barrier) w_prev_at_barrier->clear();
  for (std::size_t j = 0; j < lv.barriers.size(); ++j) {
    if (w_prev_at_barrier)
      w_prev_at_barrier->push_back(f.values[f.node_of(lv.barriers[j])]);
    ExpSumScale Wj(model, DriftShift{lv.shifts[j], static_cast<int>(j) + 1}, q);
    detail::refract_level(f, Wj, lv.deltas[j], lv.barriers[j]);
  }
  return f;
}

// z_k: seed Z(x) (1 at and below 0) with derivative q W(x), same level loop.
inline GridFn build_z(const LevyModel& model, const RateProfile& profile, double q, double origin,
                      double h, double x_max) {
  require(profile.is_step(), ErrorKind::DomainError, "barrier recursion needs a step profile");
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - origin) / h));
  require(n_panels >= 1 && std::abs(origin + h * double(n_panels) - x_max) < 1e-9,
          ErrorKind::BreakpointMisaligned, "x_max must be origin plus a whole number of panels");

  ExpSumScale W0(model, DriftShift::none(), q);
  GridFn f = make_grid(origin, h, n_panels + 1);
  for (std::size_t m = 0; m < f.n_nodes(); ++m) {
    double x = f.x_at(m);
    f.values[m] = W0.z_value(x);
    f.right_derivs[m] = x < 0.0 ? 0.0 : W0.z_deriv(x);
  }
  if (origin < 0.0) {
    std::size_t m0 = f.node_of(0.0);
    f.left_derivs[m0] = 0.0;
    f.mark_breakpoint(0.0);
  }
  auto lv = detail::active_levels(profile, origin, x_max);
  for (std::size_t j = 0; j < lv.barriers.size(); ++j) {
    ExpSumScale Wj(model, DriftShift{lv.shifts[j], static_cast<int>(j) + 1}, q);
    detail::refract_level(f, Wj, lv.deltas[j], lv.barriers[j]);
  }
  return f;
}

// u_k: seed e^{Phi(q) x} on the whole grid, same level loop.
inline GridFn build_u(const LevyModel& model, const RateProfile& profile, double q, double origin,
                      double h, double x_max) {
  require(profile.is_step(), ErrorKind::DomainError, "barrier recursion needs a step profile");
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - origin) / h));
  require(n_panels >= 1 && std::abs(origin + h * double(n_panels) - x_max) < 1e-9,
          ErrorKind::BreakpointMisaligned, "x_max must be origin plus a whole number of panels");

  double phi = right_inverse(model, DriftShift::none(), q);
  GridFn f = make_grid(origin, h, n_panels + 1);
  for (std::size_t m = 0; m < f.n_nodes(); ++m) {
    double x = f.x_at(m);
    f.values[m] = std::exp(phi * x);
    f.right_derivs[m] = phi * std::exp(phi * x);
  }
  auto lv = detail::active_levels(profile, origin, x_max);
  for (std::size_t j = 0; j < lv.barriers.size(); ++j) {
    ExpSumScale Wj(model, DriftShift{lv.shifts[j], static_cast<int>(j) + 1}, q);
    detail::refract_level(f, Wj, lv.deltas[j], lv.barriers[j]);
  }
  return f;
}

// w_k(.;y) for arbitrary origin y: barriers at or below y drop out and the
// seed is Xi(y) W_i(. - y) at the active shift; above b_k this is the whole
// answer in closed form.
inline GridFn w_shifted(const LevyModel& model, const RateProfile& profile, double q, double y,
                        double h, double x_max) {
  require(profile.is_step(), ErrorKind::DomainError, "barrier recursion needs a step profile");
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - y) / h));
  require(n_panels >= 1 && std::abs(y + h * double(n_panels) - x_max) < 1e-9,
          ErrorKind::BreakpointMisaligned, "x_max must be origin plus a whole number of panels");

  const auto& bars = profile.barriers();
  std::size_t i = 0;
  double shift_i = 0.0;
  for (std::size_t j = 0; j < bars.size(); ++j)
    if (bars[j] < y) {
      ++i;
      shift_i += profile.deltas()[j];
    }
  double xi_y = xi(profile, initial_value(model, DriftShift::none()), y);

  ExpSumScale Wi(model, DriftShift{shift_i, static_cast<int>(i)}, q);
  GridFn f = make_grid(y, h, n_panels + 1);
  for (std::size_t m = 0; m < f.n_nodes(); ++m) {
    double x = f.x_at(m);
    f.values[m] = xi_y * Wi.value(x - y);
    f.right_derivs[m] = xi_y * Wi.deriv(x - y);
  }
  f.left_derivs[0] = 0.0;

  double cum = shift_i;
  for (std::size_t j = i; j < bars.size(); ++j) {
    double b = bars[j];
    double delta = profile.deltas()[j];
    cum += delta;
    if (b >= x_max) continue;
    ExpSumScale Wj(model, DriftShift{cum, static_cast<int>(j) + 1}, q);
    detail::refract_level(f, Wj, delta, b);
  }
  return f;
}

// w_k(.;y) for an origin that need not sit on the barrier lattice. Up to the
// first barrier at or above y no new refraction is active, so values follow
// xi(y) W_i(. - y) exactly; from that barrier on they live on panels aligned
// with the remaining barriers, which removes any alignment constraint on y
// itself.
struct ShiftedW {
  double y;
  double xi_y;
  ExpSumScale seed;  // active level at the origin
  GridFn grid;       // anchored at the first reachable barrier; may be empty

  double value_at(double x) const {
    if (x < y) return 0.0;
    if (grid.n_nodes() == 0 || x < grid.origin) return xi_y * seed.value(x - y);
    return grid.value_at(x);
  }
};

inline ShiftedW w_shifted_any(const LevyModel& model, const RateProfile& profile, double q,
                              double y, double h, double x_max) {
  require(profile.is_step(), ErrorKind::DomainError, "barrier recursion needs a step profile");
  const auto& bars = profile.barriers();
  const auto& dels = profile.deltas();
  std::size_t i = 0;
  double shift_i = 0.0;
  for (std::size_t j = 0; j < bars.size(); ++j)
    if (bars[j] < y) {
      ++i;
      shift_i += dels[j];
    }
  double xi_y = xi(profile, initial_value(model, DriftShift::none()), y);
  ShiftedW out{y, xi_y, ExpSumScale(model, DriftShift{shift_i, static_cast<int>(i)}, q),
               GridFn{}};
  if (i >= bars.size() || bars[i] >= x_max) return out;

  double anchor = bars[i];
  auto n_panels = static_cast<std::size_t>(std::ceil((x_max - anchor) / h - 1e-9));
  n_panels = std::max<std::size_t>(n_panels, 1);
  GridFn f = make_grid(anchor, h, n_panels + 1);
  for (std::size_t m = 0; m < f.n_nodes(); ++m) {
    double x = f.x_at(m);
    f.values[m] = xi_y * out.seed.value(x - y);
    f.right_derivs[m] = xi_y * out.seed.deriv(x - y);
  }
  f.left_derivs[0] = anchor == y ? 0.0 : xi_y * out.seed.deriv(anchor - y);

  double top = f.x_max();
  double cum = shift_i;
  for (std::size_t j = i; j < bars.size(); ++j) {
    double b = bars[j];
    cum += dels[j];
    if (b >= top) continue;
    double off = (b - anchor) / h;
    require(std::abs(off - std::llround(off)) <= 1e-9 * std::max(1.0, off),
            ErrorKind::BreakpointMisaligned,
            "rate barriers must be mutually aligned with the grid spacing");
    ExpSumScale Wj(model, DriftShift{cum, static_cast<int>(j) + 1}, q);
    detail::refract_level(f, Wj, dels[j], b);
  }
  out.grid = std::move(f);
  return out;
}

namespace detail {

// int_{from}^{grid end} e^{-s z} f'(z) dz by breakpoint-aware trapezoid.
inline double weighted_tail_on_grid(const GridFn& f, double s, double from) {
  std::size_t m0 = f.node_of(from);
  double acc = 0.0;
  for (std::size_t m = m0; m + 1 < f.n_nodes(); ++m) {
    double za = f.x_at(m), zb = f.x_at(m + 1);
    double fa = std::exp(-s * za) * f.right_derivs[m];
    double fb = std::exp(-s * zb) * f.left_deriv(m + 1);
    acc += 0.5 * f.h * (fa + fb);
  }
  return acc;
}

// Adaptive horizon for a weighted tail integral. eval_on(z_end, spacing) must
// return the integral over [from, z_end]; fixed-width blocks are appended
// until two consecutive block sums certify a geometric tail below 1e-9 of the
// running total (a single block gives no decay information), then a Richardson
// pass at half the spacing removes the leading quadrature error.
template <typename EvalOn>
inline double certified_weighted_tail(const EvalOn& eval_on, double origin, double from,
                                      double h) {
  const double block_w = 4.0;
  double z_end = origin + std::ceil(from - origin) + block_w;
  double prev_total = eval_on(z_end, h);
  double prev_block = 0.0;
  bool have_block = false;
  int non_decreasing = 0;
  for (;;) {
    double total = eval_on(z_end + block_w, h);
    double block = total - prev_total;
    z_end += block_w;
    prev_total = total;
    if (have_block) {
      if (std::abs(block) >= std::abs(prev_block) && std::abs(block) > 0.0) {
        require(++non_decreasing < 50, ErrorKind::TailNotDecaying,
                "tail blocks of the weighted integral stopped decreasing");
      } else {
        non_decreasing = 0;
      }
      double r = std::abs(prev_block) > 0.0 ? std::abs(block) / std::abs(prev_block) : 0.0;
      if (r < 1.0) {
        double tail_est = std::abs(block) * r / (1.0 - r);
        if (tail_est <= 1e-9 * std::max(1e-300, std::abs(total))) break;
      }
    }
    prev_block = block;
    have_block = true;
    require(z_end < from + 2000.0, ErrorKind::TailNotDecaying,
            "weighted tail integral did not stabilize");
  }
  double coarse = prev_total;
  double fine = eval_on(z_end, h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

} // namespace detail

// v_k(y) = delta_k int_{b_k}^inf e^{-phi_k(q) z} w_{k-1}'(z;y) dz with
// adaptive truncation: fixed-width blocks are appended until the geometric
// tail estimate drops below 1e-9 of the running integral. A Richardson pass
// at half the spacing removes the leading quadrature error.
inline double v_k(const LevyModel& model, const RateProfile& profile, double q, double y,
                  double h = 1.0 / 1024.0, bool force_quadrature = false) {
  require(profile.is_step() && profile.levels() >= 1, ErrorKind::DomainError,
          "v_k needs a step profile with at least one barrier");
  require(q > 0.0, ErrorKind::DomainError, "v_k needs q > 0");

  const auto& bars = profile.barriers();
  const auto& dels = profile.deltas();
  std::size_t k = bars.size();
  double b_k = bars[k - 1];
  double delta_k = dels[k - 1];
  double full_shift = 0.0;
  for (double d : dels) full_shift += d;
  double phi_k = right_inverse(model, DriftShift{full_shift, static_cast<int>(k)}, q);

  RateProfile lower =
      k == 1 ? RateProfile::zero()
             : RateProfile::step(std::vector<double>(bars.begin(), bars.end() - 1),
                                 std::vector<double>(dels.begin(), dels.end() - 1));

  // Above every lower barrier the integrand is an exact exponential sum, so
  // the tail integral has a closed form. force_quadrature keeps the grid
  // route reachable for cross-checks.
  if (!force_quadrature && (k == 1 || y > bars[k - 2])) {
    double xi_y = xi(lower, initial_value(model, DriftShift::none()), y);
    ExpSumScale Wl(model, DriftShift{full_shift - delta_k, static_cast<int>(k) - 1}, q);
    return delta_k * xi_y * std::exp(-phi_k * y) *
           Wl.tail_deriv_integral(phi_k, std::max(b_k - y, 0.0));
  }

  double from = std::max(b_k, y);
  auto eval_on = [&](double z_end, double spacing) {
    ShiftedW f = w_shifted_any(model, lower, q, y, spacing, z_end);
    if (f.grid.n_nodes() > 0) return detail::weighted_tail_on_grid(f.grid, phi_k, from);
    // No refraction point at or above the origin: the integrand is one smooth
    // exponential sum, so sample it on a plain grid for the quadrature route.
    auto n = static_cast<std::size_t>(std::ceil((z_end - from) / spacing - 1e-9));
    GridFn g = make_grid(from, spacing, std::max<std::size_t>(n, 1) + 1);
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      double z = g.x_at(i);
      g.values[i] = f.value_at(z);
      g.right_derivs[i] = f.xi_y * f.seed.deriv(z - f.y);
    }
    return detail::weighted_tail_on_grid(g, phi_k, from);
  };
  return delta_k * detail::certified_weighted_tail(eval_on, y, from, h);
}

} // namespace levyref
