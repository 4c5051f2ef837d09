#pragma once

#include "fractal/fields.hpp"
#include "fractal/series.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flab {

// Planar (d = 2) potentials, traces and the separating field. Points are (x1, x2).

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<std::array<double, 2>(const Point&)>;

/// Axis-aligned box [x_lo, x_hi] x [y_lo, y_hi]; defaults to the closed square.
struct Box {
  double x_lo = -1.0, x_hi = 1.0;
  double y_lo = -1.0, y_hi = 1.0;
};

/// Smooth bump h exp(-1 / (1 - |x - c|^2 / R^2)) supported in the disc of radius R.
struct Bump {
  double cx = 0.0, cy = 0.0, radius = 0.1, height = 1.0;

  double operator()(const Point& x) const;
  std::array<double, 2> grad(const Point& x) const;
  Box box() const;
  /// Sup norm of the gradient.
  double grad_sup() const;
};

/// Bumps with centres uniform in `centres` and radii uniform in [r_min, r_max].
std::vector<Bump> random_bumps(std::uint64_t seed, int n, const Box& centres, double r_min, double r_max);

struct RieszOptions {
  int shells = 40;  // dyadic shells along the cone axis
  int order = 8;
  Box support;      // f is taken to vanish outside this box
  SeriesOptions series;
};

struct RieszValue {
  double value = 0.0;
  double error = 0.0;  // order n vs 2n difference plus the fitted tail
  Convergence verdict = Convergence::Convergent;
  std::string reason;
};

/// I_1^+ (sign > 0), I_1^- (sign < 0) or their sum (sign == 0) of |f| at x, with cones
/// {|ybar - xbar| <= |y_2 - x_2| / 2} clipped to the open square.
RieszValue restricted_riesz(const ScalarField& f, const Point& x, int sign, const RieszOptions& opt = {});

struct RieszBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // NaN when rhs == 0
  Convergence verdict = Convergence::Convergent;
};

/// lhs = int I_1(|f|)(xbar, 0) dmu_m, rhs = int |f| b dy. Sub regime, d = 2.
RieszBound riesz_vs_b(const Geometry& g, const ScalarField& f, const RieszOptions& opt = {},
                      double coarse = 1.0 / 256.0);

/// Integral of F(ybar, t) over {(ybar, t): t in [t_lo, t_hi], ybar in [lo, hi], d(ybar, C_m) <= c t},
/// split at the heights where windows around generation-J nodes merge.
double cone_region_integral(const CantorSpec& spec, int m, double c, double t_lo, double t_hi, double lo,
                            double hi, const std::function<double(double, double)>& F, int order = 8);

/// Radial profile of the averaging weight on the unit ball; the ball indicator by default.
using Profile = std::function<double(double)>;

/// Weighted average of v over B_{r/4}((xbar, sign r)). Throws std::domain_error if the ball
/// leaves the open square.
double trace_average(const ScalarField& v, double xbar, double r, int sign, int order = 12,
                     const Profile& omega = {});
double trace_jump(const ScalarField& v, double xbar, double r, int order = 12);

struct TraceLimit {
  double value = 0.0;
  double error = 0.0;               // last increment
  std::vector<double> averages;     // at r = 2^-k, k = k_from .. k_to
  std::vector<double> increments;
  bool cauchy = false;              // increments decay geometrically or vanish
};
/// Extrapolated limit of the averages over r = 2^-k.
TraceLimit trace_limit(const ScalarField& v, double xbar, int sign, int k_from = 4, int k_to = 12,
                       int order = 12);

struct TraceSample {
  double xbar = 0.0;
  TraceLimit plus;
  TraceLimit minus;
  double jump = 0.0;
};
TraceSample trace_sample(const ScalarField& v, double xbar, int k_from = 4, int k_to = 12);

struct ChainOptions {
  double tau = 0.01;  // ball radius relative to the distance to the set
  int k_steps = 8;    // approach distances gap / 4 * 2^-k, k < k_steps
  int order = 8;
  double tol = 1e-6;
};

struct ChainSample {
  int m = 0;
  std::vector<double> left;   // v(0, xi^-_j), j = 1 .. 2^m
  std::vector<double> right;  // v(0, xi^+_j)
  double across = 0.0;        // S: sum of v(xi^+_j) - v(xi^-_j)
  double gaps = 0.0;          // sum of |v(xi^-_{j+1}) - v(xi^+_j)|, j = 0 .. 2^m
  double gaps_signed = 0.0;
  double boundary_jump = 0.0; // v(0, 1) - v(0, -1) of the extension
  double residual = 0.0;      // |across + gaps_signed - boundary_jump|
  double seam = 0.0;          // largest gap between the inner limits at x_2 = +-1 and +-eta/2
  bool consistent = true;
};

/// Endpoint values on the axis through {0} x C_m from ball averages inside the gaps, with
/// v = +-eta/2 beyond x_2 = +-1. Super regime, d = 2, m <= 16.
ChainSample chain_sums(const Geometry& g, const ScalarField& v, int m, double eta,
                       const ChainOptions& opt = {});

struct BFieldOptions {
  double r1 = 0.0;  // inner radius; 0 selects l_m / 8
  double r2 = 4.0 / 3.0;
  double coarse = 0.005;  // node collapse relative to the window half width
  int order = 6;
};

/// Separating field b(z) = int (K^+ - K^-)(xbar, z) dmu(xbar) for the ball-indicator weight.
/// Sub regime, d = 2. Throws std::domain_error within l_m / 4 of the contact set.
std::array<double, 2> vector_field_b(const Geometry& g, const Point& z, const BFieldOptions& opt = {});

/// S(f) = int_Omega b . grad f. grad_f may be restricted to a support box.
double separating_functional(const Geometry& g, const VectorField& grad_f, const BFieldOptions& opt = {},
                             const Box& support = {}, int order = 16);

}  // namespace flab
