#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "levyref/errors.hpp"
#include "levyref/rate_profile.hpp"

namespace levyref {

// Downward jump component: compound Poisson with hyperexponential magnitudes.
// An empty spec means no jumps; a single phase is the plain exponential case.
struct JumpSpec {
  double intensity = 0.0;              // lambda_p, total jump rate
  std::vector<double> weights;         // p_i >= 0, sum to 1
  std::vector<double> rates;           // mu_i > 0, pairwise distinct

  static JumpSpec none() { return {}; }

  static JumpSpec exponential(double intensity, double mu) {
    return hyperexponential(intensity, {1.0}, {mu});
  }

  static JumpSpec hyperexponential(double intensity, std::vector<double> weights,
                                   std::vector<double> rates) {
    require(intensity > 0.0, ErrorKind::DomainError, "jump intensity must be positive");
    require(weights.size() == rates.size() && !weights.empty(), ErrorKind::DomainError,
            "weights and rates must be nonempty and of equal length");
    double wsum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      require(weights[i] >= 0.0, ErrorKind::DomainError, "mixture weights must be nonnegative");
      require(rates[i] > 0.0, ErrorKind::DomainError, "mixture rates must be positive");
      for (std::size_t l = 0; l < i; ++l)
        require(std::abs(rates[i] - rates[l]) > 1e-12 * rates[i], ErrorKind::DomainError,
                "mixture rates must be pairwise distinct");
      wsum += weights[i];
    }
    require(std::abs(wsum - 1.0) <= 1e-12, ErrorKind::DomainError,
            "mixture weights must sum to 1");
    JumpSpec s;
    s.intensity = intensity;
    s.weights = std::move(weights);
    s.rates = std::move(rates);
    return s;
  }

  bool empty() const { return intensity == 0.0; }
  std::size_t phases() const { return rates.size(); }

  // Laplace transform of the jump magnitude, sum p_i mu_i / (mu_i + lam).
  double magnitude_laplace(double lam) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) s += weights[i] * rates[i] / (rates[i] + lam);
    return s;
  }

  double magnitude_laplace_deriv(double lam) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      double d = rates[i] + lam;
      s -= weights[i] * rates[i] / (d * d);
    }
    return s;
  }

  double mean_magnitude() const {
    double s = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) s += weights[i] / rates[i];
    return s;
  }
};

// Cumulative drift reduction sum_{i<=j} delta_i of the j-th shifted process.
struct DriftShift {
  double cumulative_delta = 0.0;
  int index = 0;

  static DriftShift none() { return {}; }
};

// Spectrally negative driver with rational exponent. For sigma = 0 the drift
// field is the total drift c itself (no small-jump compensation is kept,
// jumps here always have finite activity); for sigma > 0 it is the linear
// coefficient of the exponent.
struct LevyModel {
  double drift = 0.0;   // c when sigma = 0, gamma otherwise
  double sigma = 0.0;
  JumpSpec jumps;
  std::string name = "model";

  bool bounded_variation() const { return sigma == 0.0; }
  double total_drift() const { return drift; }

  void check_valid() const {
    require(sigma >= 0.0, ErrorKind::DomainError, "sigma must be nonnegative");
    if (bounded_variation())
      require(drift > 0.0, ErrorKind::DomainError,
              "bounded-variation model needs positive drift (one-sided paths otherwise)");
  }

  // psi_j(lam) = drift*lam + sigma^2 lam^2 / 2 + lambda_p (mhat(lam) - 1) - cumdelta*lam
  double psi(double lam, double cumulative_delta = 0.0) const {
    double v = (drift - cumulative_delta) * lam + 0.5 * sigma * sigma * lam * lam;
    if (!jumps.empty()) v += jumps.intensity * (jumps.magnitude_laplace(lam) - 1.0);
    return v;
  }

  double psi_prime(double lam, double cumulative_delta = 0.0) const {
    double v = drift - cumulative_delta + sigma * sigma * lam;
    if (!jumps.empty()) v += jumps.intensity * jumps.magnitude_laplace_deriv(lam);
    return v;
  }

  // E[X(1)] = psi'(0+)
  double mean() const { return psi_prime(0.0); }
};

inline double laplace_exponent(const LevyModel& model, const DriftShift& shift, double lam) {
  require(lam >= 0.0, ErrorKind::DomainError, "laplace_exponent needs lam >= 0");
  model.check_valid();
  return model.psi(lam, shift.cumulative_delta);
}

// phi_j(q): largest nonnegative root of psi_j(lam) = q. Safeguarded Newton
// inside a bisection bracket, absolute tolerance 1e-12 on lam.
inline double right_inverse(const LevyModel& model, const DriftShift& shift, double q) {
  require(q >= 0.0, ErrorKind::DomainError, "right_inverse needs q >= 0");
  model.check_valid();
  double cd = shift.cumulative_delta;
  if (q == 0.0 && model.psi_prime(0.0, cd) >= 0.0) return 0.0;

  double hi = 1.0;
  int expand = 0;
  while (model.psi(hi, cd) <= q) {
    hi *= 2.0;
    require(++expand < 200, ErrorKind::NonConvergence, "could not bracket the root");
  }
  // psi_j is convex with psi_j(0) = 0, so on (lo, hi] the target root is the
  // unique sign change of psi_j - q approached from the right.
  double lo = 0.0;
  if (q == 0.0) {
    // exclude the root at 0: walk right until psi_j < 0
    lo = 1e-12;
    while (model.psi(lo, cd) >= 0.0 && lo < hi) lo *= 4.0;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double f = model.psi(x, cd) - q;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    if (hi - lo < 1e-12) return 0.5 * (lo + hi);
    double dp = model.psi_prime(x, cd);
    double xn = dp != 0.0 ? x - f / dp : x;
    x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
  }
  fail(ErrorKind::NonConvergence, "right_inverse did not reach tolerance in 200 iterations");
}

struct AdmissibilityCheck {
  std::string condition;
  bool pass = false;
  std::string detail;
};

struct AdmissibilityReport {
  std::vector<AdmissibilityCheck> checks;
  bool all_pass = true;

  void add(std::string condition, bool pass, std::string detail) {
    all_pass = all_pass && pass;
    checks.push_back({std::move(condition), pass, std::move(detail)});
  }
};

// Report-style admissibility of a (model, rate) pair: rate is non-decreasing
// and vanishes at or below 0, barriers are ordered, and for bounded variation
// the drain never reaches the drift.
inline AdmissibilityReport validate(const LevyModel& model, const RateProfile& profile) {
  AdmissibilityReport rep;
  model.check_valid();

  bool monotone = true;
  if (profile.is_smooth()) {
    double prev = 0.0;
    for (int i = 0; i <= 400; ++i) {
      double x = 0.05 * i;
      double v = profile.value(x);
      if (v < prev - 1e-12) monotone = false;
      prev = v;
    }
  }
  rep.add("rate non-decreasing", monotone, profile.is_step() ? "positive increments" : "sampled on [0,20]");

  rep.add("rate vanishes at and below 0", profile.value(0.0) == 0.0 && profile.value(-1.0) == 0.0,
          "strict indicator convention");

  bool ordered = true;
  const auto& b = profile.barriers();
  for (std::size_t j = 1; j < b.size(); ++j) ordered = ordered && b[j] > b[j - 1];
  rep.add("barriers distinct and increasing", ordered,
          b.empty() ? "no barriers" : "k = " + std::to_string(b.size()));

  if (model.bounded_variation()) {
    double cap = model.total_drift();
    double s = profile.sup_value();
    rep.add("drain below drift (bounded variation)", s < cap,
            "sup rate " + std::to_string(s) + " vs drift " + std::to_string(cap));
  } else {
    rep.add("drain below drift (bounded variation)", true, "vacuous for unbounded variation");
  }
  return rep;
}

} // namespace levyref
