#pragma once

#include <functional>
#include <vector>

namespace flab {

enum class CantorKind { LambdaGamma, Meager };

/// Defining sequence of a generalized Cantor set and its Cartesian power.
/// Lengths are stored after the shift normalization l~_j = l_{j+j0} / l_{j0}.
class CantorSpec {
 public:
  /// Throws std::invalid_argument on lambda outside [0, 1/2), Meager with gamma <= 0,
  /// or a kind inconsistent with lambda.
  static CantorSpec build(CantorKind kind, double lambda, double gamma, int power = 1);

  CantorKind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  double gamma() const { return gamma_; }
  int power() const { return power_; }
  int shift() const { return shift_; }

  /// Unnormalized l_j (l_0 = 1 for LambdaGamma).
  double raw_length(int j) const;
  /// Normalized l~_j; zero past the last representable index.
  double length(int j) const;
  /// Removed middle length at step j: l~_j - 2 l~_{j+1}.
  double gap(int j) const;
  /// Number of stored positive lengths.
  int depth() const { return static_cast<int>(len_.size()); }
  /// Smallest j with gap(j) <= s (gaps are strictly decreasing).
  int first_gap_at_most(double s) const;
  /// -k log 2 / log lambda, or 0 for Meager.
  double dimension() const;

 private:
  CantorKind kind_ = CantorKind::LambdaGamma;
  double lambda_ = 1.0 / 3.0;
  double gamma_ = 0.0;
  int power_ = 1;
  int shift_ = 0;
  std::vector<double> len_;
  std::vector<double> gap_;
};

struct Interval {
  double a;
  double b;
};

/// Generation-m pre-Cantor set in one coordinate.
struct PreCantor {
  CantorSpec spec;
  int m = 0;
  std::vector<Interval> intervals;
};

constexpr int kDefaultGenerationCap = 24;

PreCantor generation(const CantorSpec& spec, int m, int cap = kDefaultGenerationCap);

/// Visits the 2^m generation-m intervals left to right without storing them.
void for_each_interval(const CantorSpec& spec, int m, const std::function<void(double, double)>& f);

/// Distance from x to the one-dimensional generation-m set.
double distance1(const CantorSpec& spec, int m, double x);
/// x minus its nearest point in the one-dimensional generation-m set.
double offset1(const CantorSpec& spec, int m, double x);
/// Euclidean distance from xbar to the k-fold product of the generation-m set.
double distance(const CantorSpec& spec, int m, const std::vector<double>& xbar);
/// Max-norm distance to the product set.
double distance_max(const CantorSpec& spec, int m, const std::vector<double>& xbar);

/// mu_m((-inf, x]) for the one-dimensional measure.
double cdf(const CantorSpec& spec, int m, double x);

/// Exact mu_m mass of an axis-aligned box (product measure).
double measure_box(const CantorSpec& spec, int m, const std::vector<double>& lo,
                   const std::vector<double>& hi);

struct Bracket {
  double lower;
  double upper;
};
/// Euclidean ball mass; exact (lower == upper) for k = 1.
Bracket measure_ball(const CantorSpec& spec, int m, const std::vector<double>& center, double r);

/// Length of the r-neighborhood of the one-dimensional generation-m set (closed form).
double neighborhood_length(const CantorSpec& spec, int m, double r);
/// Same quantity by explicit interval merging; requires m <= cap.
double neighborhood_length_merged(const CantorSpec& spec, int m, double r);
/// Max-norm neighborhood volume of the product set.
double neighborhood_volume(const CantorSpec& spec, int m, double r);
/// Euclidean neighborhood volume bracketed by max-norm volumes.
Bracket neighborhood_volume_euclid(const CantorSpec& spec, int m, double r);

/// Integral of f over {x in R : d(x, C_m) <= r}. Nodes of generation `coarse_gen`
/// are collapsed to their centres once the set is finer than that generation.
double integrate_neighborhood(const CantorSpec& spec, int m, double r,
                              const std::function<double(double)>& f, int coarse_gen = 8,
                              int order = 6);

/// A node of the construction tree: generation j, left end a, length spec.length(j).
struct CantorNode {
  int j;
  double a;
};

/// Integral of f against mu_m restricted to [lo, hi] and to the subtree of `node`.
/// Subtrees inside the window shorter than `coarse` are collapsed to their centres.
double integrate_mu(const CantorSpec& spec, int m, CantorNode node, double lo, double hi,
                    const std::function<double(double)>& f, double coarse, int order = 6);
double integrate_mu(const CantorSpec& spec, int m, double lo, double hi,
                    const std::function<double(double)>& f, double coarse, int order = 6);

struct BoxCount {
  double dimension = 0.0;
  double residual = 0.0;
  int samples = 0;
  bool ill_conditioned = false;
};
/// Least-squares slope of log N(eps) against log(1/eps) over eps = 2^-i >= l_{m_max},
/// with N the covering number of the generation-m_max set.
BoxCount boxcount_dimension(const CantorSpec& spec, int m_max);
/// Covering number of the generation-m set by intervals of length eps.
double covering_number(const CantorSpec& spec, int m, double eps);

}  // namespace flab
