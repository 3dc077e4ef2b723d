#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "levyref/errors.hpp"

namespace levyref {

// Level-dependent drain rate. Step profiles drive the barrier recursions;
// smooth profiles drive the integral-equation solver. Convention throughout:
//   step value(x) = sum of delta_j over {j : b_j < x}   (strict indicator),
// so value() is the left limit at a barrier and value_right() adds delta_j.
class RateProfile {
 public:
  enum class Kind { Zero, Step, SmoothSaturating, SmoothLinearClamp };

  static RateProfile zero() { return RateProfile(); }

  static RateProfile step(std::vector<double> barriers, std::vector<double> deltas) {
    require(barriers.size() == deltas.size(), ErrorKind::NonMonotoneProfile,
            "barriers and deltas must have equal length");
    for (std::size_t j = 0; j < barriers.size(); ++j) {
      require(deltas[j] > 0.0, ErrorKind::NonMonotoneProfile,
              "delta[" + std::to_string(j) + "] must be positive");
      require(j == 0 || barriers[j] > barriers[j - 1], ErrorKind::NonMonotoneProfile,
              "barriers must be strictly increasing");
    }
    if (!barriers.empty())
      require(barriers.front() >= 0.0, ErrorKind::NonMonotoneProfile,
              "barriers must be nonnegative (rate vanishes at and below 0)");
    if (barriers.empty()) return RateProfile();
    RateProfile p;
    p.kind_ = Kind::Step;
    p.barriers_ = std::move(barriers);
    p.deltas_ = std::move(deltas);
    return p;
  }

  static RateProfile smooth_saturating(double delta_max, double beta) {
    require(delta_max > 0.0 && beta > 0.0, ErrorKind::NonMonotoneProfile,
            "smooth_saturating needs delta_max > 0 and beta > 0");
    RateProfile p;
    p.kind_ = Kind::SmoothSaturating;
    p.delta_max_ = delta_max;
    p.beta_ = beta;
    return p;
  }

  static RateProfile smooth_linear_clamp(double alpha, double delta_max, double eps_blend) {
    require(alpha > 0.0 && delta_max > 0.0 && eps_blend > 0.0, ErrorKind::NonMonotoneProfile,
            "smooth_linear_clamp needs positive alpha, delta_max, eps_blend");
    require(eps_blend < delta_max / alpha, ErrorKind::NonMonotoneProfile,
            "blend half-width must be smaller than the kink abscissa");
    RateProfile p;
    p.kind_ = Kind::SmoothLinearClamp;
    p.alpha_ = alpha;
    p.delta_max_ = delta_max;
    p.eps_blend_ = eps_blend;
    return p;
  }

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  bool is_step() const { return kind_ == Kind::Step || kind_ == Kind::Zero; }
  bool is_smooth() const { return !is_step(); }

  const std::vector<double>& barriers() const { return barriers_; }
  const std::vector<double>& deltas() const { return deltas_; }
  std::size_t levels() const { return barriers_.size(); }

  double delta_max() const { return delta_max_; }
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  double eps_blend() const { return eps_blend_; }

  // phi(x) with the strict convention (left limit at step barriers).
  double value(double x) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::Step: {
        double s = 0.0;
        for (std::size_t j = 0; j < barriers_.size(); ++j)
          if (barriers_[j] < x) s += deltas_[j];
        return s;
      }
      case Kind::SmoothSaturating:
        return x <= 0.0 ? 0.0 : delta_max_ * (1.0 - std::exp(-beta_ * x));
      case Kind::SmoothLinearClamp: return clamp_value(x);
    }
    return 0.0;
  }

  double value_right(double x) const {
    if (kind_ != Kind::Step) return value(x);
    double s = 0.0;
    for (std::size_t j = 0; j < barriers_.size(); ++j)
      if (barriers_[j] <= x) s += deltas_[j];
    return s;
  }

  // phi'(x) for smooth variants (right derivative at kinks); 0 a.e. for steps.
  double deriv(double x) const {
    if (x <= 0.0) return 0.0;
    switch (kind_) {
      case Kind::SmoothSaturating: return delta_max_ * beta_ * std::exp(-beta_ * x);
      case Kind::SmoothLinearClamp: {
        double xk = delta_max_ / alpha_;
        if (x < xk - eps_blend_) return alpha_;
        if (x > xk + eps_blend_) return 0.0;
        return alpha_ - alpha_ * (x - xk + eps_blend_) / (2.0 * eps_blend_);
      }
      default: return 0.0;
    }
  }

  // sup_x phi(x): the total drain once every level is active.
  double sup_value() const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::Step: {
        double s = 0.0;
        for (double d : deltas_) s += d;
        return s;
      }
      default: return delta_max_;
    }
  }

 private:
  RateProfile() = default;

  double clamp_value(double x) const {
    if (x <= 0.0) return 0.0;
    double xk = delta_max_ / alpha_;
    if (x <= xk - eps_blend_) return alpha_ * x;
    if (x >= xk + eps_blend_) return delta_max_;
    double t = x - xk + eps_blend_;
    return alpha_ * x - alpha_ * t * t / (4.0 * eps_blend_);
  }

  Kind kind_ = Kind::Zero;
  std::vector<double> barriers_;
  std::vector<double> deltas_;
  double delta_max_ = 0.0;
  double beta_ = 0.0;
  double alpha_ = 0.0;
  double eps_blend_ = 0.0;
};

} // namespace levyref
