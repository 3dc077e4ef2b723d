#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "levyref/errors.hpp"

namespace levyref {

// Sampled function on a uniform grid [origin, origin + N*h].
// values[i] is the function at node i, right_derivs[i] its right derivative.
// Where the derivative has a one-sided jump (refraction barriers), the left
// derivative at that node is stored separately; everywhere else left == right.
struct GridFn {
  double origin = 0.0;
  double h = 0.0;
  std::vector<double> values;
  std::vector<double> right_derivs;
  std::vector<double> breakpoints;                 // sorted, each on a node
  std::unordered_map<std::size_t, double> left_derivs;  // overrides at breakpoint nodes

  std::size_t n_nodes() const { return values.size(); }
  double x_at(std::size_t i) const { return origin + static_cast<double>(i) * h; }
  double x_max() const { return values.empty() ? origin : x_at(values.size() - 1); }

  double left_deriv(std::size_t i) const {
    auto it = left_derivs.find(i);
    return it == left_derivs.end() ? right_derivs[i] : it->second;
  }

  // Exact node lookup: x must coincide with a grid node up to a tiny slack.
  std::size_t node_of(double x) const {
    double t = (x - origin) / h;
    double r = std::round(t);
    require(std::abs(t - r) <= 1e-9 * std::max(1.0, std::abs(t)) && r >= 0.0 &&
                r < static_cast<double>(values.size()),
            ErrorKind::BreakpointMisaligned,
            "point " + std::to_string(x) + " is not a grid node (origin " +
                std::to_string(origin) + ", h " + std::to_string(h) + ")");
    return static_cast<std::size_t>(r);
  }

  bool covers(double x) const {
    return x >= origin - 1e-12 * std::max(1.0, std::abs(origin)) && x <= x_max() + 1e-12;
  }

  // Linear interpolation between nodes.
  double value_at(double x) const {
    require(!values.empty(), ErrorKind::QueryOutsideGrid, "empty grid");
    require(covers(x), ErrorKind::QueryOutsideGrid,
            "query " + std::to_string(x) + " outside [" + std::to_string(origin) + ", " +
                std::to_string(x_max()) + "]");
    double t = (x - origin) / h;
    auto i = static_cast<std::size_t>(std::clamp(t, 0.0, double(values.size() - 1)));
    if (i + 1 >= values.size()) return values.back();
    double frac = t - static_cast<double>(i);
    if (frac <= 0.0) return values[i];
    return values[i] + frac * (values[i + 1] - values[i]);
  }

  // Max over interior panels of |trapezoid(derivs) - (value increment)|.
  // Panels whose right node is a breakpoint use that node's left derivative.
  double self_consistency() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      double inc = values[i + 1] - values[i];
      double trap = 0.5 * h * (right_derivs[i] + left_deriv(i + 1));
      worst = std::max(worst, std::abs(inc - trap));
    }
    return worst;
  }

  void mark_breakpoint(double x) {
    std::size_t i = node_of(x);
    double xb = x_at(i);
    auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), xb);
    if (it == breakpoints.end() || *it != xb) breakpoints.insert(it, xb);
  }
};

inline GridFn make_grid(double origin, double h, std::size_t n_nodes) {
  require(h > 0.0, ErrorKind::DomainError, "grid spacing must be positive");
  GridFn g;
  g.origin = origin;
  g.h = h;
  g.values.assign(n_nodes, 0.0);
  g.right_derivs.assign(n_nodes, 0.0);
  return g;
}

} // namespace levyref
