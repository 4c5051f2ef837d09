#pragma once

#include "fractal/models.hpp"
#include "fractal/series.hpp"

#include <functional>
#include <string>
#include <vector>

namespace flab {

enum class Field { GradU, B };

const char* field_name(Field f);

/// Dyadic shells {2^{-k-1} <= height <= 2^{-k}} in the cone height (|x_d| for Sub and
/// Matching, |xbar| for Super).
struct EnergyOptions {
  int k0 = 0;
  int k_max = 40;
  int order = 8;
  /// Shells beyond k_max sampled for the asymptotic fit; empty selects 2, 4, 8, ... times k_max.
  std::vector<int> probes;
  int probe_block = 4;
  int probe_limit = 480;
  SeriesOptions series;
};

struct EnergyReport {
  Field field = Field::GradU;
  double scale = 1.0;
  std::vector<double> shells;  // contribution of shell k0 + i
  std::vector<ShellProbe> probes;
  SeriesAnalysis analysis;
  double value = 0.0;
  double tail = 0.0;
  Convergence verdict = Convergence::Inconclusive;
  /// Spread between the two bracketing cross-section volumes (zero for d = 2).
  double bracket_gap = 0.0;
  std::string note;
};

/// t -> phi(x, t) as a function of the reduced coordinates (dist, height).
using LocalProvider = std::function<LocalPhi(double dist, double height)>;

/// F(scale * u) or F*(scale * b) over Omega = (-1, 1)^d.
EnergyReport modular(const Integrand& I, Field field, double scale, const EnergyOptions& opt = {});
EnergyReport modular(const Geometry& g, const LocalProvider& local, Field field, double scale,
                     const EnergyOptions& opt = {});

/// Contribution of a single shell. upper selects the max-norm cross-section volume (the
/// Euclidean lower bracket otherwise; the two coincide for d = 2).
double shell_integral(const Geometry& g, const LocalProvider& local, Field field, double scale, int k,
                      int order, bool upper = true);

/// Gradient of the super-regime competitor near the leftmost generation-j node, in the
/// coordinate z = x_d + 1/2. Nodes shorter than coarse * h are lumped into point masses.
struct SuperGrad {
  double d_xd;
  double d_h;
  double dist;
};
SuperGrad super_grad_local(const CantorSpec& spec, int j, double z, double h, double coarse = 1e-3);

struct Mc1Result {
  EnergyReport fu;
  EnergyReport fb;
  bool holds;
};
Mc1Result check_mc1(const Integrand& I, const EnergyOptions& opt = {});

struct AssumptionCertificate {
  bool issued = false;
  double kappa = 0.0;
  double eta = 1.0;
  double s = 1.0;
  double sigma = 0.0;    // borderline schedule only
  double epsilon = 0.0;  // borderline schedule only
  double f_u = 0.0;      // F(eta u)
  double f_b = 0.0;      // F*(s b)
  double slack = 0.0;    // kappa eta s - F(eta u) - F*(s b)
  double best_ratio = 0.0;
  int trials = 0;
  double recheck_slack = 0.0;
  bool recheck_ok = false;
  std::string note;
};

/// Doubling search along the schedule of the family: s = eta^{p1 - 1} for the power families,
/// sigma then epsilon (with eta = 1, s = sigma / epsilon) for the borderline family.
AssumptionCertificate find_certificate(const Integrand& I, double kappa, const EnergyOptions& opt = {},
                                       int budget = 60);

/// Integrand with epsilon replaced (borderline family).
Integrand with_epsilon(const Integrand& I, double epsilon);

enum class Trend { Decreasing, NonDecreasing, Inconclusive };
const char* trend_name(Trend t);

struct MeyersSeries {
  std::vector<double> x;  // h for the sub form, m for the super form
  std::vector<double> g;
  double slope = 0.0;     // of log g against log log(1/h) or log m
  double predicted = 0.0;
  Trend trend = Trend::Inconclusive;
};

/// G(Psi, h) over C_h = c_{h/2} x (-2h, 2h). upper selects the max-norm volume bracket.
double meyers_condition_sub(const Geometry& g, const TestOrlicz& psi, double h, bool upper = true);
MeyersSeries meyers_trend_sub(const Geometry& g, const TestOrlicz& psi, int k_from = 4, int k_to = 14,
                              double flat_tol = 0.05);

/// Sum over the 2^m tubes B_{tube l_m} x (xi^- - tube l_m, xi^+ + tube l_m) of Psi*(l_m^{1-d}).
double meyers_condition_super(const Geometry& g, const TestOrlicz& psi, int m, double tube = 1.0);
MeyersSeries meyers_trend_super(const Geometry& g, const TestOrlicz& psi, int m_from = 4, int m_to = 24,
                                double flat_tol = 0.05);

}  // namespace flab
