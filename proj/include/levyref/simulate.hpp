#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "levyref/errors.hpp"
#include "levyref/fluctuation.hpp"
#include "levyref/levy_model.hpp"
#include "levyref/rate_profile.hpp"
#include "levyref/rng.hpp"
#include "levyref/volterra.hpp"

namespace levyref {

enum class Scheme { EventDriven, EulerJumpDiffusion };

struct PathConfig {
  double horizon = 0.0;   // T; estimators treat 0 as "pick a safety horizon"
  double max_step = 1e-3; // h_sim for Euler steps and smooth-flow integration
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::EventDriven;
};

// Monte Carlo estimate. truncation_budget bounds how much probability mass
// the paths cut off at the safety horizon could still contribute; it is an
// upper bound on the truncation bias, not a confidence term.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  double truncation_budget = 0.0;
};

struct PathPoint {
  double t = 0.0;
  double u = 0.0;
};

// Piecewise record of one simulated path. Nodes are stored in time order and
// a jump contributes two nodes at the same instant (value before, value
// after), so linear interpolation between nodes reproduces the event-driven
// path exactly and value_at() reads the right-continuous version.
struct PathRecord {
  std::vector<PathPoint> points;
  std::vector<double> jump_times;
  std::vector<double> jump_sizes;
  double end_value = 0.0;
  // Largest residual of U(t) = x0 + X(t) - sum_i delta_i (time above b_i) at
  // event epochs. Exact bookkeeping only for event-driven step paths; the
  // other constructions leave it at 0.
  double identity_gap = 0.0;

  double value_at(double t) const {
    require(!points.empty(), ErrorKind::DomainError, "empty path record");
    if (t <= points.front().t) return points.front().u;
    if (t >= points.back().t) return points.back().u;
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](double v, const PathPoint& p) { return v < p.t; });
    std::size_t i = static_cast<std::size_t>(it - points.begin()) - 1;
    const PathPoint& a = points[i];
    const PathPoint& b = points[i + 1];
    double f = (t - a.t) / (b.t - a.t);
    return a.u + f * (b.u - a.u);
  }
};

namespace detail {

inline double sample_magnitude(const JumpSpec& j, Rng& rng) {
  std::size_t i = 0;
  if (j.phases() > 1) {
    double u = rng.uniform();
    double acc = 0.0;
    for (; i + 1 < j.phases(); ++i) {
      acc += j.weights[i];
      if (u < acc) break;
    }
  }
  return rng.exponential(j.rates[i]);
}

struct JumpSkeleton {
  std::vector<double> times;
  std::vector<double> sizes;
};

inline JumpSkeleton draw_skeleton(const JumpSpec& jumps, double horizon, Rng& rng) {
  JumpSkeleton sk;
  if (jumps.empty()) return sk;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(jumps.intensity);
    if (t > horizon) break;
    sk.times.push_back(t);
    sk.sizes.push_back(sample_magnitude(jumps, rng));
  }
  return sk;
}

// Sorted-barrier view of a step profile with prefix drain sums, so each flow
// piece costs O(log k) even for the dyadic ladders of refinement studies.
struct StepLadder {
  const std::vector<double>* bars;
  std::vector<double> cum; // cum[i] = sum of the first i deltas
  double c;                // driver drift

  StepLadder(const RateProfile& p, double drift) : bars(&p.barriers()), c(drift) {
    cum.assign(bars->size() + 1, 0.0);
    for (std::size_t i = 0; i < bars->size(); ++i) cum[i + 1] = cum[i] + p.deltas()[i];
  }

  std::size_t count_at_or_below(double u) const {
    return static_cast<std::size_t>(std::upper_bound(bars->begin(), bars->end(), u) -
                                    bars->begin());
  }
  double rate_right(double u) const { return cum[count_at_or_below(u)]; }
};

// One maximal linear piece of the deterministic flow du = (c - phi(u)) dt
// from level u: slope, time to the next barrier, and the exact barrier level.
// Event-driven construction requires the drain to stay strictly below the
// drift, so the flow always moves up and the slope is positive.
struct FlowPiece {
  double slope = 0.0;
  double dt = 0.0;
  double target = 0.0;
};

inline FlowPiece ladder_piece(const StepLadder& l, double u) {
  const double inf = std::numeric_limits<double>::infinity();
  double slope = l.c - l.rate_right(u);
  std::size_t j = l.count_at_or_below(u);
  if (j >= l.bars->size()) return {slope, inf, inf};
  double target = (*l.bars)[j];
  return {slope, (target - u) / slope, target};
}

struct Window {
  bool active = false;
  double lo = 0.0;
  double hi = 0.0;
  double q = 0.0;
};

// Discounted time the linear piece u0 + s*tau, tau in [0, dt], spends inside
// the open window; closed form, so event-driven occupation carries no
// quadrature error.
inline double window_time(const Window& w, double t0, double u0, double s, double dt) {
  if (!w.active || dt <= 0.0) return 0.0;
  double ta, tb;
  if (s == 0.0) {
    if (u0 <= w.lo || u0 >= w.hi) return 0.0;
    ta = 0.0;
    tb = dt;
  } else {
    ta = std::max(((s > 0.0 ? w.lo : w.hi) - u0) / s, 0.0);
    tb = std::min(((s > 0.0 ? w.hi : w.lo) - u0) / s, dt);
    if (tb <= ta) return 0.0;
  }
  if (w.q == 0.0) return tb - ta;
  return std::exp(-w.q * t0) * (std::exp(-w.q * ta) - std::exp(-w.q * tb)) / w.q;
}

inline double safety_horizon(const LevyModel& model, const RateProfile& profile) {
  double surrogate = std::max(std::abs(model.mean() - profile.sup_value()), 1e-2);
  return 40.0 / surrogate;
}

// Decay exponent of the unresolved-passage bound: the positive root theta of
// psi_drained(-theta) = 0. The fully drained driver lower-bounds the refracted
// path, so exp(-theta (u - d)) bounds the chance that a path still alive at
// the cut ever passes below d (Lundberg inequality). Returns 0 when the
// drained mean is nonpositive (no exponential bound applies).
inline double lundberg_exponent(const LevyModel& model, const RateProfile& profile) {
  double drain = profile.sup_value();
  if (model.psi_prime(0.0, drain) <= 0.0) return 0.0;
  if (model.jumps.empty() && model.sigma == 0.0) return 1e6; // no downward moves at all
  if (model.jumps.empty()) return 2.0 * (model.drift - drain) / (model.sigma * model.sigma);
  double hi = model.jumps.rates[0];
  for (double r : model.jumps.rates) hi = std::min(hi, r);
  hi *= 1.0 - 1e-12;
  if (model.psi(-hi, drain) <= 0.0) return hi;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (model.psi(-mid, drain) <= 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// Travel time of the smooth deterministic flow from one level to another:
// composite Simpson on 1 / (c - phi(v)) with doubling panels.
inline double flow_travel_time(const RateProfile& profile, double c, double from, double to) {
  auto f = [&](double v) { return 1.0 / (c - profile.value(v)); };
  double prev = 0.0;
  for (int k = 2; k <= 20; ++k) {
    std::size_t n = std::size_t(1) << k;
    double h = (to - from) / static_cast<double>(n);
    double s = f(from) + f(to);
    for (std::size_t i = 1; i < n; ++i) s += f(from + h * double(i)) * (i % 2 ? 4.0 : 2.0);
    s *= h / 3.0;
    if (k > 3 && std::abs(s - prev) <= 1e-13 * std::max(1.0, std::abs(s))) return s;
    prev = s;
  }
  return prev;
}

struct WalkResult {
  int hit = 0; // +1 upper level, -1 lower level, 0 still open at the cut
  double time = 0.0;
  double u_end = 0.0;
  double occupation = 0.0;
};

// Exact event-driven walk for a step profile: linear pieces between jumps,
// creeping-exact crossing of the upper level, closed-form occupation. The
// flow only moves up, so the lower level is reached by jumps alone.
inline WalkResult event_walk_step(const LevyModel& model, const RateProfile& profile, double x0,
                                  double upper, double lower, double t_cut, const Window& win,
                                  Rng& rng) {
  const double inf = std::numeric_limits<double>::infinity();
  double t = 0.0, u = x0, occ = 0.0;
  if (u >= upper) return {+1, 0.0, u, 0.0};
  if (u < lower) return {-1, 0.0, u, 0.0};
  StepLadder ladder(profile, model.total_drift());

  auto advance = [&](double dt_total) -> bool {
    double remain = dt_total;
    while (remain > 0.0) {
      FlowPiece pc = ladder_piece(ladder, u);
      double dt = std::min(remain, pc.dt);
      if (upper < inf && u + pc.slope * dt >= upper) {
        double dth = (upper - u) / pc.slope;
        occ += window_time(win, t, u, pc.slope, dth);
        t += dth;
        u = upper;
        return true;
      }
      occ += window_time(win, t, u, pc.slope, dt);
      t += dt;
      u = dt == pc.dt ? pc.target : u + pc.slope * dt;
      remain -= dt;
    }
    return false;
  };

  for (;;) {
    double tau = model.jumps.empty() ? inf : rng.exponential(model.jumps.intensity);
    double to_cut = t_cut - t;
    if (advance(std::min(tau, to_cut))) return {+1, t, u, occ};
    if (tau >= to_cut) return {0, t, u, occ};
    double size = sample_magnitude(model.jumps, rng);
    u -= size;
    if (u < lower) return {-1, t, u, occ};
  }
}

// Event-driven walk for a smooth profile: jumps are exact, the flow between
// them integrates with classical fourth-order steps, and a detected crossing
// of the upper level is replaced by its exact travel time. Occupation treats
// each substep as linear (second-order accurate).
inline WalkResult event_walk_smooth(const LevyModel& model, const RateProfile& profile,
                                    double x0, double upper, double lower, double t_cut,
                                    const Window& win, double h_sim, Rng& rng) {
  const double inf = std::numeric_limits<double>::infinity();
  double t = 0.0, u = x0, occ = 0.0;
  if (u >= upper) return {+1, 0.0, u, 0.0};
  if (u < lower) return {-1, 0.0, u, 0.0};
  double c = model.total_drift();
  auto slope_at = [&](double v) { return c - profile.value(v); };

  auto advance = [&](double dt_total) -> bool {
    double remain = dt_total;
    while (remain > 1e-15) {
      double dt = std::min(h_sim, remain);
      double k1 = slope_at(u);
      double k2 = slope_at(u + 0.5 * dt * k1);
      double k3 = slope_at(u + 0.5 * dt * k2);
      double k4 = slope_at(u + dt * k3);
      double u1 = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (upper < inf && u1 >= upper) {
        double dth = flow_travel_time(profile, c, u, upper);
        occ += window_time(win, t, u, (upper - u) / std::max(dth, 1e-300), dth);
        t += dth;
        u = upper;
        return true;
      }
      occ += window_time(win, t, u, (u1 - u) / dt, dt);
      t += dt;
      u = u1;
      remain -= dt;
    }
    return false;
  };

  for (;;) {
    double tau = model.jumps.empty() ? inf : rng.exponential(model.jumps.intensity);
    double to_cut = t_cut - t;
    if (advance(std::min(tau, to_cut))) return {+1, t, u, occ};
    if (tau >= to_cut) return {0, t, u, occ};
    double size = sample_magnitude(model.jumps, rng);
    u -= size;
    if (u < lower) return {-1, t, u, occ};
  }
}

// Fixed-step Euler walk with exact jump epochs. Stop levels trigger at the
// first grid point past them, so exit times carry an O(sqrt(h_sim)) bias for
// diffusions; no bridge correction is applied.
inline WalkResult euler_walk(const LevyModel& model, const RateProfile& profile, double x0,
                             double upper, double lower, double t_cut, const Window& win,
                             double h_sim, Rng& rng) {
  const double inf = std::numeric_limits<double>::infinity();
  double t = 0.0, u = x0, occ = 0.0;
  if (u >= upper) return {+1, 0.0, u, 0.0};
  if (u < lower) return {-1, 0.0, u, 0.0};
  for (;;) {
    double tau = model.jumps.empty() ? inf : rng.exponential(model.jumps.intensity);
    double to_cut = t_cut - t;
    double seg = std::min(tau, to_cut);
    double done = 0.0;
    while (done < seg - 1e-15) {
      double dt = std::min(h_sim, seg - done);
      double u1 = u + (model.drift - profile.value(u)) * dt;
      if (model.sigma > 0.0) u1 += model.sigma * std::sqrt(dt) * rng.normal();
      occ += window_time(win, t, u, 0.0, dt); // left-point occupancy
      t += dt;
      done += dt;
      u = u1;
      if (upper < inf && u >= upper) return {+1, t, u, occ};
      if (lower > -inf && u < lower) return {-1, t, u, occ};
    }
    if (tau >= to_cut) return {0, t, u, occ};
    double size = sample_magnitude(model.jumps, rng);
    u -= size;
    if (u < lower) return {-1, t, u, occ};
  }
}

inline WalkResult dispatch_walk(const LevyModel& model, const RateProfile& profile, double x0,
                                double upper, double lower, double t_cut, const Window& win,
                                Scheme scheme, double h_sim, Rng& rng) {
  if (scheme == Scheme::EulerJumpDiffusion)
    return euler_walk(model, profile, x0, upper, lower, t_cut, win, h_sim, rng);
  require(model.bounded_variation(), ErrorKind::SchemeModelMismatch,
          "event-driven paths need a bounded-variation driver");
  require(profile.sup_value() < model.total_drift(), ErrorKind::DomainError,
          "event-driven paths need the refraction drain below the drift");
  if (profile.is_step())
    return event_walk_step(model, profile, x0, upper, lower, t_cut, win, rng);
  return event_walk_smooth(model, profile, x0, upper, lower, t_cut, win, h_sim, rng);
}

// Exact event-driven record for a step profile, with the integrated-identity
// residual tracked through prefix drain sums.
inline PathRecord step_record(const LevyModel& model, const RateProfile& profile, double x0,
                              double horizon, const JumpSkeleton& sk) {
  PathRecord rec;
  rec.jump_times = sk.times;
  rec.jump_sizes = sk.sizes;
  double c = model.total_drift();
  StepLadder ladder(profile, c);
  double t = 0.0, u = x0;
  double jumped = 0.0, drained = 0.0, gap = 0.0;
  rec.points.push_back({0.0, u});

  // Node times hang off the exact segment endpoint (t_end - remain), so jump
  // epochs stay exact and the identity residual does not pick up clock drift.
  auto advance = [&](double t_end) {
    double remain = t_end - t;
    while (remain > 0.0) {
      FlowPiece pc = ladder_piece(ladder, u);
      double dt = std::min(remain, pc.dt);
      drained += ladder.rate_right(u) * dt;
      u = dt == pc.dt ? pc.target : u + pc.slope * dt;
      remain -= dt;
      rec.points.push_back({t_end - remain, u});
    }
    t = t_end;
  };

  for (std::size_t j = 0; j <= sk.times.size(); ++j) {
    double t_next = j < sk.times.size() ? sk.times[j] : horizon;
    advance(t_next);
    gap = std::max(gap, std::abs(u - (x0 + c * t - jumped - drained)));
    if (j == sk.times.size()) break;
    rec.points.push_back({t, u});
    jumped += sk.sizes[j];
    u -= sk.sizes[j];
    rec.points.push_back({t, u});
  }
  rec.end_value = u;
  rec.identity_gap = gap;
  return rec;
}

inline PathRecord smooth_record(const LevyModel& model, const RateProfile& profile, double x0,
                                double horizon, const JumpSkeleton& sk, double h_sim) {
  PathRecord rec;
  rec.jump_times = sk.times;
  rec.jump_sizes = sk.sizes;
  double c = model.total_drift();
  auto slope_at = [&](double v) { return c - profile.value(v); };
  double t = 0.0, u = x0;
  rec.points.push_back({0.0, u});

  auto advance = [&](double t_end) {
    double remain = t_end - t;
    while (remain > 1e-15) {
      double dt = std::min(h_sim, remain);
      double k1 = slope_at(u);
      double k2 = slope_at(u + 0.5 * dt * k1);
      double k3 = slope_at(u + 0.5 * dt * k2);
      double k4 = slope_at(u + dt * k3);
      u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      remain -= dt;
      rec.points.push_back({t_end - remain, u});
    }
    t = t_end;
  };

  for (std::size_t j = 0; j <= sk.times.size(); ++j) {
    double t_next = j < sk.times.size() ? sk.times[j] : horizon;
    advance(t_next);
    if (j == sk.times.size()) break;
    rec.points.push_back({t, u});
    u -= sk.sizes[j];
    rec.points.push_back({t, u});
  }
  rec.end_value = u;
  return rec;
}

inline PathRecord euler_record(const LevyModel& model, const RateProfile& profile, double x0,
                               const PathConfig& cfg, Rng& rng) {
  JumpSkeleton sk = draw_skeleton(model.jumps, cfg.horizon, rng);
  PathRecord rec;
  rec.jump_times = sk.times;
  rec.jump_sizes = sk.sizes;
  double t = 0.0, u = x0;
  rec.points.push_back({0.0, u});
  for (std::size_t j = 0; j <= sk.times.size(); ++j) {
    double t_next = j < sk.times.size() ? sk.times[j] : cfg.horizon;
    double remain = t_next - t;
    while (remain > 1e-15) {
      double dt = std::min(cfg.max_step, remain);
      u += (model.drift - profile.value(u)) * dt;
      if (model.sigma > 0.0) u += model.sigma * std::sqrt(dt) * rng.normal();
      remain -= dt;
      rec.points.push_back({t_next - remain, u});
    }
    t = t_next;
    if (j == sk.times.size()) break;
    rec.points.push_back({t, u});
    u -= sk.sizes[j];
    rec.points.push_back({t, u});
  }
  rec.end_value = u;
  return rec;
}

inline McEstimate finish_estimate(double sum, double sumsq, std::size_t n, std::uint64_t seed,
                                  double budget) {
  double mean = sum / static_cast<double>(n);
  double var = n > 1 ? std::max(0.0, sumsq - double(n) * mean * mean) / double(n - 1) : 0.0;
  return {mean, std::sqrt(var / double(n)), n, seed, budget / double(n)};
}

} // namespace detail

// Strong solution of dU = dX - phi(U) dt over [0, horizon]. Event-driven mode
// draws the compound-Poisson skeleton exactly and integrates the deterministic
// flow between jumps (closed form per level interval for step profiles,
// fourth-order steps for smooth ones); Euler mode takes fixed steps with a
// Gaussian increment and exact jump epochs. `index` selects the counter-based
// stream, so path number i of an estimator run with the same config is
// reproduced exactly; a zero horizon picks the estimators' safety horizon.
inline PathRecord simulate_path_stream(const LevyModel& model, const RateProfile& profile,
                                       double x0, const PathConfig& cfg, std::uint64_t index) {
  model.check_valid();
  require(std::isfinite(x0), ErrorKind::DomainError, "start level must be finite");
  require(cfg.horizon >= 0.0, ErrorKind::DomainError, "path horizon must be nonnegative");
  require(cfg.max_step > 0.0, ErrorKind::DomainError, "max_step must be positive");
  PathConfig local = cfg;
  if (local.horizon == 0.0) local.horizon = detail::safety_horizon(model, profile);
  Rng rng = Rng::stream(local.seed, index);
  if (local.scheme == Scheme::EventDriven) {
    require(model.bounded_variation(), ErrorKind::SchemeModelMismatch,
            "event-driven paths need a bounded-variation driver");
    require(profile.sup_value() < model.total_drift(), ErrorKind::DomainError,
            "event-driven paths need the refraction drain below the drift");
    detail::JumpSkeleton sk = detail::draw_skeleton(model.jumps, local.horizon, rng);
    return profile.is_step()
               ? detail::step_record(model, profile, x0, local.horizon, sk)
               : detail::smooth_record(model, profile, x0, local.horizon, sk, local.max_step);
  }
  return detail::euler_record(model, profile, x0, local, rng);
}

inline PathRecord simulate_path(const LevyModel& model, const RateProfile& profile, double x0,
                                const PathConfig& cfg) {
  require(cfg.horizon > 0.0, ErrorKind::DomainError, "path horizon must be positive");
  return simulate_path_stream(model, profile, x0, cfg, 0);
}

enum class ExitFunctional { TwoSidedUp, TwoSidedDown, OneSidedUp, OneSidedDown };

// E_x[e^{-q kappa} 1{event}] for the four first-passage functionals. Paths
// still open at the horizon contribute 0 and their largest possible
// contribution goes into truncation_budget (discount at the cut, tightened by
// the Lundberg bound for downward events).
inline McEstimate mc_exit(const LevyModel& model, const RateProfile& profile,
                          const ExitQuery& qr, ExitFunctional fn, std::size_t n_paths,
                          const PathConfig& cfg) {
  model.check_valid();
  require(n_paths > 0, ErrorKind::DomainError, "need at least one path");
  require(qr.q >= 0.0, ErrorKind::DomainError, "discount must be nonnegative");
  require(cfg.max_step > 0.0, ErrorKind::DomainError, "max_step must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  bool two = fn == ExitFunctional::TwoSidedUp || fn == ExitFunctional::TwoSidedDown;
  bool has_upper = two || fn == ExitFunctional::OneSidedUp;
  bool has_lower = two || fn == ExitFunctional::OneSidedDown;
  if (has_upper)
    require(qr.x <= qr.a, ErrorKind::DomainError, "start must sit at or below the upper level");
  if (has_lower)
    require(qr.x >= qr.d, ErrorKind::DomainError, "start must sit at or above the lower level");
  if (two) require(qr.d < qr.a, ErrorKind::DomainError, "levels must satisfy d < a");
  bool want_up = fn == ExitFunctional::TwoSidedUp || fn == ExitFunctional::OneSidedUp;

  double upper = has_upper ? qr.a : inf;
  double lower = has_lower ? qr.d : -inf;
  double t_cut = cfg.horizon > 0.0 ? cfg.horizon : detail::safety_horizon(model, profile);
  double theta =
      want_up ? 0.0 : std::min(detail::lundberg_exponent(model, profile), 1e6);
  detail::Window no_window{};

  double sum = 0.0, sumsq = 0.0, budget = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    detail::WalkResult r = detail::dispatch_walk(model, profile, qr.x, upper, lower, t_cut,
                                                 no_window, cfg.scheme, cfg.max_step, rng);
    double y = 0.0;
    if (r.hit == (want_up ? +1 : -1)) y = qr.q > 0.0 ? std::exp(-qr.q * r.time) : 1.0;
    if (r.hit == 0) {
      double bound = qr.q > 0.0 ? std::exp(-qr.q * r.time) : 1.0;
      if (!want_up)
        bound *= std::exp(-std::min(theta * std::max(r.u_end - qr.d, 0.0), 700.0));
      budget += bound;
    }
    sum += y;
    sumsq += y * y;
  }
  return detail::finish_estimate(sum, sumsq, n_paths, cfg.seed, budget);
}

// Discounted window occupation int_0^kappa e^{-qt} 1{U(t) in (lo, hi)} dt,
// where kappa is the kill time of the chosen resolvent variant. Event-driven
// paths accumulate the integral in closed form per linear piece.
inline McEstimate mc_occupation(const LevyModel& model, const RateProfile& profile,
                                const ExitQuery& qr, ResolventVariant variant, double window_lo,
                                double window_hi, std::size_t n_paths, const PathConfig& cfg) {
  model.check_valid();
  require(n_paths > 0, ErrorKind::DomainError, "need at least one path");
  require(window_lo < window_hi, ErrorKind::DomainError, "window must be a nonempty interval");
  require(qr.q >= 0.0, ErrorKind::DomainError, "discount must be nonnegative");
  require(qr.q > 0.0 || variant == ResolventVariant::TwoBarrier, ErrorKind::DomainError,
          "open-horizon occupation needs q > 0");
  require(cfg.max_step > 0.0, ErrorKind::DomainError, "max_step must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  bool has_upper = variant == ResolventVariant::TwoBarrier || variant == ResolventVariant::UpperOnly;
  bool has_lower = variant == ResolventVariant::TwoBarrier || variant == ResolventVariant::LowerOnly;
  if (has_upper)
    require(qr.x <= qr.a, ErrorKind::DomainError, "start must sit at or below the upper level");
  if (has_lower)
    require(qr.x >= qr.d, ErrorKind::DomainError, "start must sit at or above the lower level");

  double upper = has_upper ? qr.a : inf;
  double lower = has_lower ? qr.d : -inf;
  double t_cut = cfg.horizon;
  if (t_cut <= 0.0) {
    t_cut = detail::safety_horizon(model, profile);
    if (qr.q > 0.0)
      t_cut = std::min(t_cut, std::max(std::log(1.0 / (qr.q * 1e-9)) / qr.q, 1.0));
  }
  detail::Window win{true, window_lo, window_hi, qr.q};

  double sum = 0.0, sumsq = 0.0, budget = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    detail::WalkResult r = detail::dispatch_walk(model, profile, qr.x, upper, lower, t_cut, win,
                                                 cfg.scheme, cfg.max_step, rng);
    double y = r.occupation;
    if (r.hit == 0) budget += qr.q > 0.0 ? std::exp(-qr.q * r.time) / qr.q : 1.0;
    sum += y;
    sumsq += y * y;
  }
  return detail::finish_estimate(sum, sumsq, n_paths, cfg.seed, budget);
}

struct CouplingReport {
  double max_violation = 0.0;  // max over paths and times of U_{n+1}(t) - U_n(t)
  double sup_gap_coarse = 0.0; // max over paths and times of U_n(t) - U_ref(t)
  double sup_gap_fine = 0.0;   // same for U_{n+1}
  std::size_t n_paths = 0;
};

namespace detail {

// Exact maximum of a(t) - b(t) for two piecewise-linear records that share
// their jump epochs: the difference is continuous and piecewise linear, so
// the extremum sits on a node of one record. Linear merge, O(n).
inline double max_node_gap(const PathRecord& a, const PathRecord& b) {
  auto eval = [](const PathRecord& r, std::size_t& j, double t) {
    const auto& p = r.points;
    while (j + 1 < p.size() && p[j + 1].t <= t) ++j;
    if (j + 1 >= p.size() || t <= p[j].t) return p[j].u;
    double f = (t - p[j].t) / (p[j + 1].t - p[j].t);
    return p[j].u + f * (p[j + 1].u - p[j].u);
  };
  std::size_t ia = 0, ib = 0, ja = 0, jb = 0;
  double m = 0.0; // both paths share the start, so the gap there is 0
  while (ia < a.points.size() || ib < b.points.size()) {
    double t;
    if (ib >= b.points.size() ||
        (ia < a.points.size() && a.points[ia].t <= b.points[ib].t))
      t = a.points[ia++].t;
    else
      t = b.points[ib++].t;
    m = std::max(m, eval(a, ja, t) - eval(b, jb, t));
  }
  return m;
}

} // namespace detail

// Pathwise monotonicity of the dyadic refinement: the step approximations
// phi_n <= phi_{n+1} of a rate profile drive coupled paths on one shared jump
// skeleton from x0 = 0, and the finer drain must never push its path above the
// coarser one. Also reports the sup distance of both to a refinement-10
// reference path.
inline CouplingReport coupling_monotonicity(const LevyModel& model, const RateProfile& rate,
                                            int n, std::size_t n_paths, const PathConfig& cfg) {
  model.check_valid();
  require(model.bounded_variation(), ErrorKind::SchemeModelMismatch,
          "coupled refinement paths are event-driven");
  require(rate.sup_value() < model.total_drift(), ErrorKind::DomainError,
          "event-driven paths need the refraction drain below the drift");
  require(n >= 1 && n + 1 < 10, ErrorKind::DomainError,
          "refinement pair must sit below the reference order 10");
  require(cfg.horizon > 0.0, ErrorKind::DomainError, "coupling needs a positive horizon");
  require(n_paths > 0, ErrorKind::DomainError, "need at least one path");
  RateProfile coarse = approximate_profile(rate, n);
  RateProfile fine = approximate_profile(rate, n + 1);
  RateProfile reference = approximate_profile(rate, 10);

  CouplingReport rep;
  rep.n_paths = n_paths;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    detail::JumpSkeleton sk = detail::draw_skeleton(model.jumps, cfg.horizon, rng);
    PathRecord pa = detail::step_record(model, coarse, 0.0, cfg.horizon, sk);
    PathRecord pb = detail::step_record(model, fine, 0.0, cfg.horizon, sk);
    PathRecord pr = detail::step_record(model, reference, 0.0, cfg.horizon, sk);
    rep.max_violation = std::max(rep.max_violation, detail::max_node_gap(pb, pa));
    rep.sup_gap_coarse = std::max(rep.sup_gap_coarse, detail::max_node_gap(pa, pr));
    rep.sup_gap_fine = std::max(rep.sup_gap_fine, detail::max_node_gap(pb, pr));
  }
  return rep;
}

} // namespace levyref
