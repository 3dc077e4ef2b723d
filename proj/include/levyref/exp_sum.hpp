#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "levyref/errors.hpp"
#include "levyref/grid_fn.hpp"
#include "levyref/levy_model.hpp"

namespace levyref {

namespace poly {

using Coeffs = std::vector<double>;  // ascending powers

inline Coeffs mul(const Coeffs& a, const Coeffs& b) {
  Coeffs r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

inline void add_in(Coeffs& a, const Coeffs& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
}

inline std::complex<double> eval(const Coeffs& c, std::complex<double> x) {
  std::complex<double> v = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

inline Coeffs derivative(const Coeffs& c) {
  if (c.size() <= 1) return {0.0};
  Coeffs d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
  return d;
}

// All complex roots via the companion matrix, then a short Newton polish.
inline std::vector<std::complex<double>> roots(const Coeffs& c_in) {
  Coeffs c = c_in;
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  require(c.size() > 1, ErrorKind::NonConvergence, "constant polynomial has no roots");
  std::size_t n = c.size() - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (std::size_t i = 0; i < n; ++i) companion(i, n - 1) = -c[i] / c[n];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, ErrorKind::NonConvergence,
          "eigenvalue iteration for polynomial roots failed");
  Coeffs dc = derivative(c);
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> z = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    for (int it = 0; it < 4; ++it) {
      std::complex<double> f = eval(c, z);
      std::complex<double> df = eval(dc, z);
      if (std::abs(df) == 0.0) break;
      std::complex<double> step = f / df;
      z -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    out[i] = z;
  }
  return out;
}

} // namespace poly

// W_j^(q) as an exact finite sum of exponentials: the rational exponent makes
// 1/(psi_j - q) a proper rational function Q/P whose poles are the exponents
// and whose residues are the coefficients.
class ExpSumScale {
 public:
  ExpSumScale(const LevyModel& model, const DriftShift& shift, double q)
      : model_(model), shift_(shift), q_(q) {
    require(q >= 0.0, ErrorKind::DomainError, "scale function needs q >= 0");
    model.check_valid();
    double g = model.drift - shift.cumulative_delta;
    if (model.bounded_variation())
      require(g > 0.0, ErrorKind::DomainError,
              "cumulative drift reduction must stay below the total drift");

    // P(lam) = (psi_j(lam) - q) * Q(lam), Q(lam) = prod (mu_i + lam)
    poly::Coeffs quot = {1.0};
    const auto& J = model.jumps;
    for (double mu : J.rates) quot = poly::mul(quot, {mu, 1.0});
    poly::Coeffs base = {-(J.intensity + q), g};
    if (model.sigma > 0.0) base.push_back(0.5 * model.sigma * model.sigma);
    if (J.empty()) base[0] = -q;
    poly::Coeffs P = poly::mul(base, quot);
    for (std::size_t i = 0; i < J.rates.size(); ++i) {
      poly::Coeffs qi = {1.0};
      for (std::size_t l = 0; l < J.rates.size(); ++l)
        if (l != i) qi = poly::mul(qi, {J.rates[l], 1.0});
      poly::add_in(P, qi, J.intensity * J.weights[i] * J.rates[i]);
    }

    zeta_ = poly::roots(P);
    for (std::size_t i = 0; i < zeta_.size(); ++i)
      for (std::size_t l = 0; l < i; ++l)
        require(std::abs(zeta_[i] - zeta_[l]) > 1e-8, ErrorKind::DegenerateRoots,
                "repeated exponent in the scale expansion; perturb q slightly");

    poly::Coeffs dP = poly::derivative(P);
    coeff_.resize(zeta_.size());
    for (std::size_t i = 0; i < zeta_.size(); ++i)
      coeff_[i] = poly::eval(quot, zeta_[i]) / poly::eval(dP, zeta_[i]);

    phi_q_ = right_inverse(model, shift, q);
    std::size_t top = 0;
    for (std::size_t i = 1; i < zeta_.size(); ++i)
      if (zeta_[i].real() > zeta_[top].real()) top = i;
    require(std::abs(zeta_[top].imag()) < 1e-8 && std::abs(zeta_[top].real() - phi_q_) < 1e-8,
            ErrorKind::NonConvergence,
            "leading exponent does not match the right-inverse of the exponent");
    zeta_[top] = phi_q_;  // pin the dominant exponent to the polished right-inverse

    w0_ = model.bounded_variation() ? 1.0 / g : 0.0;
    wp0_ = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i) wp0_ += (coeff_[i] * zeta_[i]).real();
  }

  double q() const { return q_; }
  const DriftShift& shift() const { return shift_; }
  const LevyModel& model() const { return model_; }
  double phi_q() const { return phi_q_; }
  std::size_t n_terms() const { return zeta_.size(); }
  std::complex<double> exponent(std::size_t i) const { return zeta_[i]; }
  std::complex<double> coefficient(std::size_t i) const { return coeff_[i]; }

  // W(0): 1/(c - sum delta) in the bounded-variation case, else 0.
  double value0() const { return w0_; }
  // W'(0+), finite for every shipped class.
  double deriv0() const { return wp0_; }

  double value(double x) const {
    if (x < 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i) s += (coeff_[i] * std::exp(zeta_[i] * x)).real();
    return s;
  }

  // right derivative; W' on (0, inf), W'(0+) at x = 0, 0 below
  double deriv(double x) const {
    if (x < 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i)
      s += (coeff_[i] * zeta_[i] * std::exp(zeta_[i] * x)).real();
    return s;
  }

  // int_0^x W(y) dy, termwise
  double integral(double x) const {
    if (x <= 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i) {
      std::complex<double> z = zeta_[i];
      std::complex<double> t = std::abs(z) * x < 1e-8
                                   ? std::complex<double>(x) * (1.0 + 0.5 * z * x)
                                   : (std::exp(z * x) - 1.0) / z;
      s += (coeff_[i] * t).real();
    }
    return s;
  }

  // Z(x) = 1 + q int_0^x W, equal to 1 for x <= 0 and identically 1 at q = 0
  double z_value(double x) const { return q_ == 0.0 ? 1.0 : 1.0 + q_ * integral(x); }
  double z_deriv(double x) const { return q_ * value(x); }

  // int_0^inf e^{-lam x} W(x) dx = sum D_i / (lam - zeta_i), valid lam > phi_q
  double laplace(double lam) const {
    require(lam > phi_q_, ErrorKind::DomainError,
            "transform argument must exceed the leading exponent");
    double s = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i) s += (coeff_[i] / (lam - zeta_[i])).real();
    return s;
  }

  // int_{x0}^inf e^{-s z} W(z) dz, termwise, requires s > phi_q
  double tail_value_integral(double s, double x0) const {
    require(s > phi_q_, ErrorKind::DomainError, "tail weight must exceed the leading exponent");
    double r = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i)
      r += (coeff_[i] * std::exp((zeta_[i] - s) * x0) / (s - zeta_[i])).real();
    return r;
  }

  // int_{x0}^inf e^{-s z} W'(z) dz for x0 >= 0 (the right derivative is
  // integrable at the origin, so x0 = 0 is admissible)
  double tail_deriv_integral(double s, double x0) const {
    require(s > phi_q_, ErrorKind::DomainError, "tail weight must exceed the leading exponent");
    require(x0 >= 0.0, ErrorKind::DomainError, "tail of the derivative starts at or above 0");
    double r = 0.0;
    for (std::size_t i = 0; i < zeta_.size(); ++i)
      r += (coeff_[i] * zeta_[i] * std::exp((zeta_[i] - s) * x0) / (s - zeta_[i])).real();
    return r;
  }

 private:
  LevyModel model_;
  DriftShift shift_;
  double q_ = 0.0;
  double phi_q_ = 0.0;
  double w0_ = 0.0;
  double wp0_ = 0.0;
  std::vector<std::complex<double>> zeta_;
  std::vector<std::complex<double>> coeff_;
};

inline ExpSumScale scale_function(const LevyModel& model, const DriftShift& shift, double q) {
  return ExpSumScale(model, shift, q);
}

inline double initial_value(const LevyModel& model, const DriftShift& shift) {
  model.check_valid();
  if (!model.bounded_variation()) return 0.0;
  double g = model.drift - shift.cumulative_delta;
  require(g > 0.0, ErrorKind::DomainError, "drift reduction at or above total drift");
  return 1.0 / g;
}

inline double z_function(const ExpSumScale& scale, double x) { return scale.z_value(x); }

// |termwise transform - 1/(psi_j(lam) - q)|
inline double verify_laplace(const ExpSumScale& scale, const LevyModel& model,
                             const DriftShift& shift, double q, double lam) {
  double lhs = scale.laplace(lam);
  double rhs = 1.0 / (model.psi(lam, shift.cumulative_delta) - q);
  return std::abs(lhs - rhs);
}

// Exact sampling of (W, W') onto a uniform grid. The origin of W (x = 0) and
// every requested breakpoint must sit on nodes.
inline GridFn sample_to_grid(const ExpSumScale& scale, double d, double h, std::size_t n_panels,
                             const std::vector<double>& breakpoints = {}) {
  GridFn g = make_grid(d, h, n_panels + 1);
  for (std::size_t m = 0; m < g.n_nodes(); ++m) {
    double x = g.x_at(m);
    g.values[m] = scale.value(x);
    g.right_derivs[m] = scale.deriv(x);
  }
  if (d < 0.0) {
    std::size_t m0 = g.node_of(0.0);
    g.left_derivs[m0] = 0.0;
    g.mark_breakpoint(0.0);
  }
  for (double b : breakpoints) g.mark_breakpoint(b);
  return g;
}

} // namespace levyref
