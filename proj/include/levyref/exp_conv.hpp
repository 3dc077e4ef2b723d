#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "levyref/exp_sum.hpp"

namespace levyref {

// Product integration of int e^{zeta (x - y)} g(y) dy on a uniform grid with
// g piecewise linear between nodes: the panel over [x_m, x_m + h] contributes
//   m0 * g(x_m+) + m1 * g(x_{m+1}-)
// and the previous accumulator is damped by E = e^{zeta h}. The weights are
//   m0 = h (phi1(a) - phi2(a)),  m1 = h phi2(a),  a = zeta h,
// with phi1 = (e^a - 1)/a and phi2 = (e^a - 1 - a)/a^2 evaluated by series
// for small |a| to avoid cancellation.
struct PanelWeights {
  std::complex<double> E;
  std::complex<double> m0;
  std::complex<double> m1;
};

inline PanelWeights panel_weights(std::complex<double> zeta, double h) {
  std::complex<double> a = zeta * h;
  std::complex<double> phi1, phi2;
  if (std::abs(a) < 0.5) {
    // phi1 = sum a^n/(n+1)!, phi2 = sum a^n/(n+2)!
    std::complex<double> term = 1.0;
    phi1 = 0.0;
    phi2 = 0.0;
    double fact = 1.0;
    for (int n = 0; n < 24; ++n) {
      fact *= static_cast<double>(n + 1);  // (n+1)!
      phi1 += term / fact;
      phi2 += term / (fact * static_cast<double>(n + 2));
      term *= a;
      if (std::abs(term) / fact < 1e-20) break;
    }
  } else {
    std::complex<double> ea = std::exp(a);
    phi1 = (ea - 1.0) / a;
    phi2 = (ea - 1.0 - a) / (a * a);
  }
  PanelWeights w;
  w.E = std::exp(a);
  w.m0 = h * (phi1 - phi2);
  w.m1 = h * phi2;
  return w;
}

// value[m]  = int_{x_s}^{x_m} W (x_m - y) g(y) dy
// dvalue[m] = int_{x_s}^{x_m} W'(x_m - y) g(y) dy
// where x_s is the node `start`, W the exponential sum, and g the sampled
// integrand with one-sided values g_right / g_left at the nodes.
struct ConvOut {
  std::vector<double> value;
  std::vector<double> dvalue;
};

inline ConvOut conv_against(const ExpSumScale& W, const std::vector<double>& g_right,
                            const std::vector<double>& g_left, std::size_t start, double h) {
  std::size_t n = g_right.size();
  ConvOut out;
  out.value.assign(n, 0.0);
  out.dvalue.assign(n, 0.0);
  std::size_t t_count = W.n_terms();
  std::vector<PanelWeights> pw(t_count);
  std::vector<std::complex<double>> J(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) pw[t] = panel_weights(W.exponent(t), h);
  for (std::size_t m = start + 1; m < n; ++m) {
    std::complex<double> v = 0.0, dv = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) {
      J[t] = pw[t].E * J[t] + pw[t].m0 * g_right[m - 1] + pw[t].m1 * g_left[m];
      v += W.coefficient(t) * J[t];
      dv += W.coefficient(t) * W.exponent(t) * J[t];
    }
    out.value[m] = v.real();
    out.dvalue[m] = dv.real();
  }
  return out;
}

} // namespace levyref
