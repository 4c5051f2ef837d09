#pragma once

#include "fractal/cantor.hpp"

#include <vector>

namespace flab {

using Point = std::vector<double>;

enum class Regime { Sub, Matching, Super };

const char* regime_name(Regime r);

/// Geometric data of a competitor construction. For Sub the contact set is
/// C^{d-1} x {0}; for Super it is {0}^{d-1} x C; for Matching it is the origin.
struct Geometry {
  Regime regime = Regime::Sub;
  int d = 2;
  double p0 = 1.5;
  double gamma = 0.0;
  double D = 0.0;       // dimension of the contact set
  double lambda = 0.0;  // 0 selects the meager construction
  double nu = 0.0;
  int m = 12;           // generation of every distance and measure surrogate
  CantorSpec cantor;

  /// Derives D, lambda, nu from (regime, d, p0). Throws std::invalid_argument when
  /// p0 lies outside the regime's range or a meager set is requested with gamma <= 0.
  static Geometry make(Regime regime, int d, double p0, double gamma, int m = 12);
};

// Cutoff ramp with 1_{(1/2,inf)} <= theta <= 1_{(1/4,inf)} and max theta' = 6.
double theta(double t);
double theta_prime(double t);
/// Integral of theta over [0, t].
double theta_integral(double t);

/// Cone pair for the smooth indicator: 1 on {dist <= tau1 h}, 0 on {dist >= tau2 h}.
struct ConePair {
  double tau1;
  double tau2;
};
constexpr ConePair kCompetitorCone{2.0, 4.0};
constexpr ConePair kWeightCone{0.5, 2.0};
/// Throws std::invalid_argument unless 1/4 <= tau1 < tau2 <= 4 and tau2 - tau1 >= 1/4.
void validate_cone(ConePair c);

struct RhoValue {
  double value;
  double d_dist;    // partial derivative in the distance variable
  double d_height;  // partial derivative in the height variable
};
/// Smooth cone indicator as a function of (distance, height).
RhoValue rho_reduced(double dist, double height, ConePair c);
/// Upper bound of |grad rho| * height over the transition shell.
double rho_gradient_constant(ConePair c);

/// Distance to the contact set's cross-section and the cone height, with gradients in x.
/// Sub: (d(xbar, C^{d-1}_m), |x_d|). Matching: (|xbar|, |x_d|). Super: (d(x_d, C_m), |xbar|).
struct ConeCoords {
  double dist;
  double height;
  int sign;  // sign of x_d
  Point grad_dist;
  Point grad_height;
};
ConeCoords cone_coords(const Geometry& g, const Point& x);

double rho_cone(const Geometry& g, const Point& x, ConePair c);
Point grad_rho_cone(const Geometry& g, const Point& x, ConePair c);

/// 1/2 sgn(x_d) theta(|x_d| / |xbar|). Throws std::domain_error at x = 0.
double u_matching(const Point& x);

/// Competitor u. Throws std::domain_error on the contact set.
double u_eval(const Geometry& g, const Point& x);
Point grad_u(const Geometry& g, const Point& x);

/// Competitor in the super regime evaluated from (x_d, |xbar|) with the generation-m measure.
/// Returns u and its partial derivatives in x_d and in |xbar|.
struct SuperU {
  double value;
  double d_xd;
  double d_h;
};
SuperU u_super(const CantorSpec& spec, int m, double xd, double h);

/// Auxiliary function b (zero outside its cone).
double b_eval(const Geometry& g, const Point& x);
/// b in reduced coordinates; same conventions as cone_coords.
double b_reduced(const Geometry& g, double dist, double height);

struct SupportFlags {
  bool in_supp_grad_u;
  bool in_supp_b;
  bool in_transition;
};
SupportFlags support_predicates(const Geometry& g, const Point& x);

/// True on the contact set (up to the generation-m surrogate).
bool on_contact_set(const Geometry& g, const Point& x);

}  // namespace flab
