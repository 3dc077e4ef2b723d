#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "levyref/exp_conv.hpp"
#include "levyref/exp_sum.hpp"
#include "levyref/grid_fn.hpp"
#include "levyref/levy_model.hpp"
#include "levyref/rate_profile.hpp"
#include "levyref/refracted.hpp"

namespace levyref {

// Which integral equation is being marched: the shifted scale solution
// (seed W(x - d)), the killing-compensated solution (seed Z(x)), or the
// exponentially growing solution (seed e^{Phi(q) x}).
enum class SeedKind { FirstKind, SecondKind, Exponential };

namespace detail {

inline void check_grid_alignment(const RateProfile& profile, double origin, double h,
                                 double x_max) {
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - origin) / h));
  require(n_panels >= 1 && std::abs(origin + h * double(n_panels) - x_max) < 1e-9,
          ErrorKind::BreakpointMisaligned, "x_max must be origin plus a whole number of panels");
  if (!profile.is_step()) return;
  for (double b : profile.barriers()) {
    if (b <= origin || b >= x_max) continue;
    auto k = std::llround((b - origin) / h);
    require(std::abs(origin + h * double(k) - b) <= 1e-9 * std::max(1.0, std::abs(b)),
            ErrorKind::BreakpointMisaligned, "rate steps must sit on grid nodes");
  }
}

struct MarchSeed {
  SeedKind kind;
  double origin;
  double q;
  double phi_q;  // only used by the exponential seed
};

inline double seed_value(const MarchSeed& s, const ExpSumScale& W, double x) {
  switch (s.kind) {
    case SeedKind::FirstKind: return W.value(x - s.origin);
    case SeedKind::SecondKind: return W.z_value(x);
    default: return std::exp(s.phi_q * x);
  }
}

inline double seed_forcing(const MarchSeed& s, const ExpSumScale& W, double x) {
  switch (s.kind) {
    case SeedKind::FirstKind: return W.deriv(x - s.origin);
    case SeedKind::SecondKind: return s.q * W.value(x);
    default: return s.phi_q * std::exp(s.phi_q * x);
  }
}

// One marching pass over the grid. At each node the bracket
//   B(x) = forcing(x) + int_origin^x phi(y) W'(x - y) f'(y) dy
// is continuous, and f'(x+-) = B(x) / Xi(x+-). The final half-panel of the
// running convolution involves the still unknown left limit at the current
// node, which enters linearly and is solved for in closed form.
inline GridFn march_once(const RateProfile& profile, const ExpSumScale& W,
                         const MarchSeed& seed, double origin, double h, double x_max) {
  check_grid_alignment(profile, origin, h, x_max);
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - origin) / h));
  std::size_t n = n_panels + 1;
  std::size_t T = W.n_terms();
  double w0 = W.value0();

  std::vector<PanelWeights> pw(T);
  double S1 = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    pw[t] = panel_weights(W.exponent(t), h);
    S1 += (W.coefficient(t) * W.exponent(t) * pw[t].m1).real();
  }

  GridFn f = make_grid(origin, h, n);
  std::vector<std::complex<double>> J(T, {0.0, 0.0});

  double phi_r0 = profile.value_right(origin);
  double xi_r0 = xi_right(profile, w0, origin);
  f.values[0] = seed_value(seed, W, origin);
  f.right_derivs[0] = seed_forcing(seed, W, origin) / xi_r0;
  if (seed.kind != SeedKind::Exponential) f.left_derivs[0] = 0.0;
  double f_r_prev = phi_r0 * f.right_derivs[0];

  for (std::size_t m = 1; m < n; ++m) {
    double x = f.x_at(m);
    double carry_sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      J[t] = pw[t].E * J[t] + pw[t].m0 * f_r_prev;
      carry_sum += (W.coefficient(t) * W.exponent(t) * J[t]).real();
    }
    double known = seed_forcing(seed, W, x) + carry_sum;
    double phi_l = profile.value(x);
    double xi_l = xi(profile, w0, x);
    double diag = S1 * phi_l / xi_l;
    require(diag < 0.9, ErrorKind::DiagonalBlowup,
            "implicit half-panel weight too large for this spacing");
    double bracket = known / (1.0 - diag);
    require(std::isfinite(bracket), ErrorKind::NonConvergence,
            "marched solution left the representable range");
    double d_left = bracket / xi_l;
    double phi_r = profile.value_right(x);
    double xi_r = xi_right(profile, w0, x);
    double d_right = bracket / xi_r;

    double f_l = phi_l * d_left;
    double value_sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      J[t] += pw[t].m1 * f_l;
      value_sum += (W.coefficient(t) * J[t]).real();
    }
    f.values[m] = seed_value(seed, W, x) + value_sum;
    f.right_derivs[m] = d_right;
    if (phi_l != phi_r) f.left_derivs[m] = d_left;
    f_r_prev = phi_r * d_right;
  }

  if (profile.is_step())
    for (double b : profile.barriers())
      if (b > origin && b < x_max) f.mark_breakpoint(b);
  return f;
}

template <typename Run>
GridFn with_spacing_retry(double h, Run&& run) {
  for (int attempt = 0;; ++attempt) {
    try {
      return run(h);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DiagonalBlowup || attempt >= 6) throw;
      h /= 2.0;
    }
  }
}

} // namespace detail

// Marching solutions of the three integral equations for a general admissible
// rate profile. Spacing is halved (up to six times) if the implicit node
// weight comes too close to one.
inline GridFn march_w(const LevyModel& model, const RateProfile& profile, double q, double d,
                      double h, double x_max) {
  ExpSumScale W(model, DriftShift::none(), q);
  detail::MarchSeed seed{SeedKind::FirstKind, d, q, 0.0};
  return detail::with_spacing_retry(h, [&](double hh) {
    return detail::march_once(profile, W, seed, d, hh, x_max);
  });
}

inline GridFn march_z(const LevyModel& model, const RateProfile& profile, double q, double h,
                      double x_max) {
  ExpSumScale W(model, DriftShift::none(), q);
  detail::MarchSeed seed{SeedKind::SecondKind, 0.0, q, 0.0};
  return detail::with_spacing_retry(h, [&](double hh) {
    return detail::march_once(profile, W, seed, 0.0, hh, x_max);
  });
}

inline GridFn march_u(const LevyModel& model, const RateProfile& profile, double q, double h,
                      double x_max) {
  ExpSumScale W(model, DriftShift::none(), q);
  double phi = right_inverse(model, DriftShift::none(), q);
  detail::MarchSeed seed{SeedKind::Exponential, 0.0, q, phi};
  return detail::with_spacing_retry(h, [&](double hh) {
    return detail::march_once(profile, W, seed, 0.0, hh, x_max);
  });
}

// Successive-substitution solution of the same equation together with a
// certified bound on the dropped tail of the series. The bound rests on an
// exponential envelope e^{s x} chosen so that the per-application contraction
// rho = a_T int_0^inf e^{-s t} W'(t) dt stays below one half, where a_T
// dominates the kernel prefactor on the whole grid.
struct NeumannSolution {
  GridFn w;                         // values and one-sided derivatives
  std::vector<double> deriv_bound;  // per node, series truncation only
  std::vector<double> value_bound;  // per node, truncation plus quadrature estimate
  int terms = 0;
  double contraction = 0.0;
  double envelope_rate = 0.0;
};

namespace detail {

struct NeumannPass {
  GridFn w;
  std::vector<double> trunc_deriv;
  std::vector<double> trunc_value;
  int terms;
  double rho;
  double s;
};

inline NeumannPass neumann_pass(const LevyModel& model, const RateProfile& profile, double q,
                                double d, double h, double x_max, double tol, int l_max) {
  check_grid_alignment(profile, d, h, x_max);
  ExpSumScale W(model, DriftShift::none(), q);
  auto n_panels = static_cast<std::size_t>(std::llround((x_max - d) / h));
  std::size_t n = n_panels + 1;
  double w0 = W.value0();

  std::vector<double> phir(n), phil(n), xir(n), xil(n), wd(n), wv(n);
  for (std::size_t m = 0; m < n; ++m) {
    double xm = d + h * double(m);
    phir[m] = profile.value_right(xm);
    phil[m] = profile.value(xm);
    xir[m] = xi_right(profile, w0, xm);
    xil[m] = xi(profile, w0, xm);
    wd[m] = W.deriv(h * double(m));
    wv[m] = W.value(h * double(m));
  }

  // contraction certificate: find an envelope rate s with rho < 1/2
  double a_T = phir[n - 1] / xir[n - 1];
  double s = std::max(1.0, W.phi_q() + 1.0);
  double rho1 = 0.0, rho = 1.0;
  for (;; s *= 2.0) {
    require(s <= 1e6, ErrorKind::MajorantDiverged,
            "no exponential envelope certified the series tail");
    rho1 = W.tail_deriv_integral(s, 0.0);
    rho = a_T * rho1;
    if (rho < 0.5) break;
  }
  double m_inf = 0.0;
  for (std::size_t m = 0; m < n; ++m)
    m_inf = std::max(m_inf, wd[m] * std::exp(-s * h * double(m)));

  // zeroth term of the series
  std::vector<double> tr(n), tl(n), sr(n), sl(n);
  for (std::size_t m = 0; m < n; ++m) {
    double seed = W.deriv(h * double(m));
    tr[m] = seed / xir[m];
    tl[m] = (m == 0 ? 0.0 : seed / xil[m]);
  }
  sr = tr;
  sl = tl;

  double g_weight = 0.0;  // int e^{-s z} |g(z)| dz
  for (std::size_t m = 0; m + 1 < n; ++m) {
    double za = d + h * double(m), zb = za + h;
    g_weight += 0.5 * h * (std::exp(-s * za) * std::abs(tr[m]) + std::exp(-s * zb) * std::abs(tl[m + 1]));
  }
  double c_env = m_inf * g_weight / std::max(rho1, 1e-300);

  double scale = 1.0;
  for (std::size_t m = 0; m < n; ++m) scale = std::max(scale, std::abs(sr[m]));
  int terms = 0;
  auto tail_at_end = [&](int L) {
    return c_env * std::exp(s * (x_max - 0.0)) * std::pow(rho, double(L + 1)) / (1.0 - rho);
  };
  std::vector<double> nr(n), nl(n);
  for (int l = 1; l <= l_max; ++l) {
    for (std::size_t m = 0; m < n; ++m) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        acc += 0.5 * h * (phir[j] * wd[m - j] * tr[j] + phil[j + 1] * wd[m - j - 1] * tl[j + 1]);
      nr[m] = acc / xir[m];
      nl[m] = (m == 0 ? 0.0 : acc / xil[m]);
    }
    tr = nr;
    tl = nl;
    for (std::size_t m = 0; m < n; ++m) {
      sr[m] += tr[m];
      sl[m] += tl[m];
      scale = std::max(scale, std::abs(sr[m]));
    }
    terms = l;
    if (tail_at_end(l) <= tol * scale) break;
  }

  NeumannPass out;
  out.terms = terms;
  out.rho = rho;
  out.s = s;
  out.trunc_deriv.resize(n);
  out.trunc_value.resize(n);
  double tail_factor = std::pow(rho, double(terms + 1)) / (1.0 - rho);
  double phi_max = phir[n - 1];
  for (std::size_t m = 0; m < n; ++m) {
    double xm = d + h * double(m);
    out.trunc_deriv[m] = c_env * std::exp(s * xm) * tail_factor;
    out.trunc_value[m] =
        phi_max * wv[m] * c_env * tail_factor * (std::exp(s * xm) - std::exp(s * d)) / s;
  }

  // reconstruct values from the derivative series
  out.w = make_grid(d, h, n);
  out.w.left_derivs[0] = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      acc += 0.5 * h * (phir[j] * wv[m - j] * sr[j] + phil[j + 1] * wv[m - j - 1] * sl[j + 1]);
    out.w.values[m] = wv[m] + acc;
    out.w.right_derivs[m] = sr[m];
    if (m > 0 && phil[m] != phir[m]) out.w.left_derivs[m] = sl[m];
  }
  if (profile.is_step())
    for (double b : profile.barriers())
      if (b > d && b < x_max) out.w.mark_breakpoint(b);
  return out;
}

} // namespace detail

inline NeumannSolution neumann_w(const LevyModel& model, const RateProfile& profile, double q,
                                 double d, double h, double x_max, double tol = 1e-9,
                                 int l_max = 80) {
  detail::NeumannPass coarse = detail::neumann_pass(model, profile, q, d, h, x_max, tol, l_max);
  detail::NeumannPass fine = detail::neumann_pass(model, profile, q, d, h / 2.0, x_max, tol, l_max);
  NeumannSolution out;
  out.terms = fine.terms;
  out.contraction = fine.rho;
  out.envelope_rate = fine.s;
  out.deriv_bound = fine.trunc_deriv;
  out.value_bound = fine.trunc_value;
  std::size_t nf = fine.w.n_nodes();
  for (std::size_t m = 0; m < nf; ++m) {
    std::size_t mc = m / 2;
    double diff = std::abs(fine.w.values[m] - coarse.w.values[std::min(mc, coarse.w.n_nodes() - 1)]);
    if (m % 2 == 1 && mc + 1 < coarse.w.n_nodes())
      diff = std::max(diff, std::abs(fine.w.values[m] - coarse.w.values[mc + 1]));
    out.value_bound[m] += (4.0 / 3.0) * diff + 1e-13 * std::max(1.0, std::abs(fine.w.values[m]));
  }
  out.w = std::move(fine.w);
  return out;
}

// Pointwise domination study for the iterated kernel: the l-th iterate
// evaluated on a probe grid next to the matching term of its convolution
// majorant, both computed with identical nonnegative quadrature weights so
// the comparison reflects the analytical inequality rather than quadrature
// noise.
struct KernelDominationRecord {
  int order;
  double x;
  double y;
  double iterate;
  double majorant;
};

inline std::vector<KernelDominationRecord> probe_kernel_domination(
    const LevyModel& model, const RateProfile& profile, double q, double T, int n_probe,
    int l_max, double h) {
  detail::check_grid_alignment(profile, 0.0, h, T);
  double probe_step = T / double(n_probe);
  require(std::abs(probe_step / h - std::round(probe_step / h)) < 1e-9,
          ErrorKind::BreakpointMisaligned, "probe points must sit on grid nodes");

  ExpSumScale W(model, DriftShift::none(), q);
  auto n_panels = static_cast<std::size_t>(std::llround(T / h));
  std::size_t n = n_panels + 1;
  double w0 = W.value0();
  std::vector<double> phir(n), phil(n), xir(n), xil(n), wd(n);
  for (std::size_t m = 0; m < n; ++m) {
    double xm = h * double(m);
    phir[m] = profile.value_right(xm);
    phil[m] = profile.value(xm);
    xir[m] = xi_right(profile, w0, xm);
    xil[m] = xi(profile, w0, xm);
    wd[m] = W.deriv(xm);
  }
  double a_T = phir[n - 1] / xir[n - 1];

  std::vector<KernelDominationRecord> records;
  auto probe_index = static_cast<std::size_t>(std::llround(probe_step / h));
  for (int jp = 0; jp < n_probe; ++jp) {
    std::size_t jy = static_cast<std::size_t>(jp) * probe_index;
    double y = h * double(jy);
    double phi_y = phil[jy];
    std::vector<double> kr(n, 0.0), kl(n, 0.0), maj(n, 0.0);
    for (std::size_t m = jy; m < n; ++m) {
      kr[m] = phi_y * wd[m - jy] / xir[m];
      kl[m] = phi_y * wd[m - jy] / xil[m];
      maj[m] = a_T * wd[m - jy];
    }
    for (int l = 1; l <= l_max; ++l) {
      for (int ip = jp + 1; ip <= n_probe; ++ip) {
        std::size_t ix = static_cast<std::size_t>(ip) * probe_index;
        records.push_back({l, h * double(ix), y, kr[ix], maj[ix]});
      }
      if (l == l_max) break;
      std::vector<double> nkr(n, 0.0), nkl(n, 0.0), nmaj(n, 0.0);
      for (std::size_t m = jy + 1; m < n; ++m) {
        double acc = 0.0, macc = 0.0;
        for (std::size_t j = jy; j < m; ++j) {
          acc += 0.5 * h * (phir[j] * wd[m - j] * kr[j] + phil[j + 1] * wd[m - j - 1] * kl[j + 1]);
          macc += 0.5 * h * (wd[m - j] * maj[j] + wd[m - j - 1] * maj[j + 1]);
        }
        nkr[m] = acc / xir[m];
        nkl[m] = acc / xil[m];
        nmaj[m] = a_T * macc;
      }
      kr = std::move(nkr);
      kl = std::move(nkl);
      maj = std::move(nmaj);
    }
  }
  return records;
}

// Piecewise-constant lower approximation of a smooth rate profile on the
// dyadic grid of refinement n: steps at l 2^{-n} for l = 1 .. n 2^n, each
// carrying the profile increment over the previous node. Flat stretches
// produce no step.
inline RateProfile approximate_profile(const RateProfile& profile, int n) {
  require(n >= 1 && n <= 20, ErrorKind::DomainError, "refinement order out of range");
  if (profile.is_step()) return profile;
  double step = std::ldexp(1.0, -n);
  long count = static_cast<long>(n) << n;
  std::vector<double> barriers, deltas;
  double prev = 0.0;
  for (long l = 1; l <= count; ++l) {
    double b = double(l) * step;
    double v = profile.value(b);
    double inc = v - prev;
    if (inc > 1e-15) {
      barriers.push_back(b);
      deltas.push_back(inc);
      prev = v;
    }
  }
  if (barriers.empty()) return RateProfile::zero();
  return RateProfile::step(barriers, deltas);
}

struct ConvergenceRow {
  int refinement;
  double grid_h;
  double sup_error;
};

// Sup-norm distance between the barrier-recursion solution for the dyadic
// step approximation and the marching solution for the smooth profile itself.
inline std::vector<ConvergenceRow> convergence_report(const LevyModel& model,
                                                      const RateProfile& profile, double q,
                                                      int n_lo, int n_hi, double h,
                                                      double x_max) {
  require(profile.is_smooth(), ErrorKind::DomainError, "refinement study needs a smooth profile");
  require(n_lo >= 1 && n_hi >= n_lo, ErrorKind::DomainError, "bad refinement range");
  GridFn ref = march_w(model, profile, q, 0.0, h, x_max);
  std::vector<ConvergenceRow> rows;
  for (int n = n_lo; n <= n_hi; ++n) {
    RateProfile stepped = approximate_profile(profile, n);
    GridFn approx = build_w(model, stepped, q, 0.0, h, x_max);
    double coarse_h = std::max(ref.h, approx.h);
    auto nodes = static_cast<std::size_t>(std::llround((x_max - 0.0) / coarse_h));
    double sup = 0.0;
    for (std::size_t m = 0; m <= nodes; ++m) {
      double x = coarse_h * double(m);
      sup = std::max(sup, std::abs(ref.values[ref.node_of(x)] - approx.values[approx.node_of(x)]));
    }
    rows.push_back({n, coarse_h, sup});
  }
  return rows;
}

// Ratio of the growth functionals
//   N_f(T) = c_f + int e^{-Phi(q) y} phi(y) f'(y) dy
// for two of the marched solutions, extended over a common horizon until the
// ratio stabilizes. Each functional alone diverges whenever the rate profile
// keeps a positive limit, but the matched ratio converges to the ratio of the
// leading growth coefficients.
inline double limit_ratio(const LevyModel& model, const RateProfile& profile, double q,
                          SeedKind num, double d_num, SeedKind den, double d_den,
                          double h = 1.0 / 1024.0) {
  require(q > 0.0, ErrorKind::DomainError, "growth functionals need q > 0");
  double phi_q = right_inverse(model, DriftShift::none(), q);

  auto constant = [&](SeedKind k, double d) {
    switch (k) {
      case SeedKind::FirstKind: return std::exp(-phi_q * d);
      case SeedKind::SecondKind: return q / phi_q;
      default: return model.psi_prime(phi_q);
    }
  };
  if (profile.is_zero() || (profile.is_step() && profile.levels() == 0))
    return constant(num, d_num) / constant(den, d_den);

  auto functional = [&](SeedKind k, double d, double T) {
    GridFn f = k == SeedKind::FirstKind ? march_w(model, profile, q, d, h, T)
               : k == SeedKind::SecondKind ? march_z(model, profile, q, h, T)
                                           : march_u(model, profile, q, h, T);
    double acc = constant(k, d);
    for (std::size_t m = 0; m + 1 < f.n_nodes(); ++m) {
      double za = f.x_at(m), zb = f.x_at(m + 1);
      acc += 0.5 * f.h *
             (std::exp(-phi_q * za) * profile.value_right(za) * f.right_derivs[m] +
              std::exp(-phi_q * zb) * profile.value(zb) * f.left_deriv(m + 1));
    }
    return acc;
  };

  double top = 0.0;
  if (profile.is_step()) top = profile.barriers().back();
  double T = std::ceil(std::max({top + 4.0, d_num + 8.0, d_den + 8.0, 8.0}));
  double prev = functional(num, d_num, T) / functional(den, d_den, T);
  int stable = 0;
  for (;;) {
    T += 8.0;
    require(T <= 4000.0, ErrorKind::TailNotDecaying, "growth-functional ratio did not stabilize");
    double cur = functional(num, d_num, T) / functional(den, d_den, T);
    if (std::abs(cur - prev) <= 1e-9 * std::max(1.0, std::abs(cur))) {
      if (++stable >= 2) return cur;
    } else {
      stable = 0;
    }
    prev = cur;
  }
}

} // namespace levyref
