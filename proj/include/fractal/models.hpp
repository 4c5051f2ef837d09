#pragma once

#include "fractal/fields.hpp"

#include <functional>
#include <string>
#include <vector>

namespace flab {

enum class Family { DoublePhase, BorderlineDoublePhase, PiecewiseVarExp, ContinuousVarExp };

const char* family_name(Family f);

/// Parameters of an integrand family. The base exponent p of the double phase and
/// borderline families is the geometry's p0.
struct ModelParams {
  Family family = Family::DoublePhase;
  double q = 2.6;
  double alpha = 1.0;
  double beta = 0.0;
  double kappa = 1.0;  // log exponent of a_0 (borderline) or of sigma (continuous exponent)
  double epsilon = 1.0;
  double p_minus = 1.5;
  double p_plus = 2.0;

  bool operator==(const ModelParams&) const = default;
};

/// One term c * t^p * log^k(e + t).
struct PowerLogTerm {
  double coef = 0.0;
  double power = 1.0;
  double logpow = 0.0;

  double value(double t) const;
  double d1(double t) const;
  double d2(double t) const;
};

/// t -> phi(x, t) at a fixed point: a sum of at most two power-log terms.
struct LocalPhi {
  PowerLogTerm first;
  PowerLogTerm second;

  double value(double t) const { return first.value(t) + second.value(t); }
  double d1(double t) const { return first.d1(t) + second.d1(t); }
  double d2(double t) const { return first.d2(t) + second.d2(t); }
  /// Closed form for a single pure power, numeric Legendre transform otherwise.
  double conjugate(double s) const;
  /// Maximizer t of s t - phi(t).
  double conjugate_argmax(double s) const;
  bool pure_power() const;
};

/// Root of phi'(t) = s for an increasing derivative with phi'(0) = 0.
/// Throws std::runtime_error when no bracket is found.
double invert_derivative(const std::function<double(double)>& dphi,
                         const std::function<double(double)>& d2phi, double s, double t_hint = 1.0);

/// sigma(t) = kappa loglog(e^3 + 1/t) / log(e + 1/t).
double sigma(double kappa, double t);
/// Height t* with sigma(t*) = target (sigma is increasing on (0, 1]).
double sigma_inverse(double kappa, double target);

class Integrand {
 public:
  /// Throws std::invalid_argument on inconsistent parameters, a non-convex borderline
  /// integrand, or an unsupported regime.
  Integrand(Geometry g, ModelParams params);

  const Geometry& geometry() const { return g_; }
  const ModelParams& params() const { return mp_; }

  /// Weight a(x) for the double phase families.
  double weight_a(const Point& x) const;
  double weight_reduced(double dist, double height) const;
  /// Exponent p(x) for the variable exponent families.
  double exponent_p(const Point& x) const;
  double exponent_reduced(double dist, double height) const;
  /// Cutoff xi of the continuous exponent model (function of the height only).
  double xi(double height) const;
  double xi_support() const { return xi_t_; }

  LocalPhi local(const Point& x) const;
  LocalPhi local_reduced(double dist, double height) const;

  double phi(const Point& x, double t) const { return local(x).value(t); }
  double phi_t(const Point& x, double t) const { return local(x).d1(t); }
  double phi_star(const Point& x, double s) const { return local(x).conjugate(s); }

  /// Exponent of the dominant growth used by homogeneity scalings: (p, q) for double
  /// phase, (p-, p+) otherwise.
  double lower_growth() const;
  double upper_growth() const;

 private:
  Geometry g_;
  ModelParams mp_;
  double xi_t_ = 0.0;
};

/// Psi(t) = t^p0 log^delta(e + t) and its conjugate.
struct TestOrlicz {
  double p0;
  double delta;

  double value(double t) const;
  double conjugate(double s) const;
  LocalPhi as_local() const;
};

/// Convexity of t -> c t^p log^k(e + t) on a log grid over [1e-8, 1e8].
bool convex_on_grid(const PowerLogTerm& term);

struct Verdict {
  std::string name;
  std::string inequality;
  bool pass;
  std::string detail;
};

/// Parameter windows of the four main results, instantiated numerically.
std::vector<Verdict> theorem_windows(const Geometry& g, const ModelParams& mp);
/// Windows on gamma nu (and p-, q) under which the competitor and auxiliary modulars are finite.
std::vector<Verdict> finiteness_windows(const Geometry& g, const ModelParams& mp);

}  // namespace flab
