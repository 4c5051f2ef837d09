#include "fractal/cantor.hpp"

#include "fractal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace flab {

namespace {

constexpr int kMaxStored = 4096;
constexpr int kScanLimit = 256;

bool conditions_hold(const std::vector<double>& l, int j) {
  // l_{j-1} > 2 l_j and l_{j+1} > (3 l_j - l_{j-1}) / 2
  return l[j - 1] > 2.0 * l[j] && l[j + 1] > 0.5 * (3.0 * l[j] - l[j - 1]);
}

}  // namespace

double CantorSpec::raw_length(int j) const {
  if (j < 0) throw std::invalid_argument("raw_length: negative index");
  if (kind_ == CantorKind::Meager) return std::exp(-std::exp2(j / gamma_));
  if (j == 0) return 1.0;
  return std::exp(j * std::log(lambda_) + gamma_ * std::log(static_cast<double>(j)));
}

CantorSpec CantorSpec::build(CantorKind kind, double lambda, double gamma, int power) {
  if (power < 1) throw std::invalid_argument("cantor: power must be >= 1");
  if (!(lambda >= 0.0 && lambda < 0.5)) throw std::invalid_argument("cantor: lambda must lie in [0, 1/2)");
  if (kind == CantorKind::Meager) {
    if (lambda != 0.0) throw std::invalid_argument("cantor: Meager sets require lambda = 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("cantor: Meager sets require gamma > 0");
  } else if (lambda == 0.0) {
    throw std::invalid_argument("cantor: lambda = 0 requires the Meager kind");
  }
  CantorSpec s;
  s.kind_ = kind;
  s.lambda_ = lambda;
  s.gamma_ = gamma;
  s.power_ = power;

  // raw sequence in log form to survive underflow of l_j itself
  std::vector<double> raw(kScanLimit + 3);
  for (int j = 0; j < static_cast<int>(raw.size()); ++j) raw[j] = s.raw_length(j);

  int j0 = -1;
  for (int cand = 0; cand < kScanLimit && j0 < 0; ++cand) {
    if (!(raw[cand] > 0.0)) break;
    std::vector<double> l;
    for (int j = cand; j < static_cast<int>(raw.size()); ++j) l.push_back(raw[j] / raw[cand]);
    // the scan requires three consecutive hits, the tail is then checked on every stored index
    int run = 0;
    bool ok = true;
    for (int j = 1; j + 1 < static_cast<int>(l.size()); ++j) {
      if (!(l[j + 1] > 0.0)) break;
      if (conditions_hold(l, j)) {
        ++run;
      } else {
        ok = false;
        break;
      }
    }
    if (ok && run >= 3) j0 = cand;
  }
  if (j0 < 0) throw std::invalid_argument("cantor: no admissible shift found");
  s.shift_ = j0;

  double base = raw[j0];
  for (int j = 0; j < kMaxStored; ++j) {
    double v = s.raw_length(j + j0) / base;
    if (kind == CantorKind::LambdaGamma && j + j0 > 0) {
      // log form keeps the ratio accurate when both factors are tiny
      v = std::exp((j + j0) * std::log(lambda) + gamma * std::log(static_cast<double>(j + j0)) -
                   std::log(base));
    }
    if (!(v > 1e-300) || !std::isfinite(v)) break;
    s.len_.push_back(v);
  }
  s.gap_.resize(s.len_.size());
  for (std::size_t j = 0; j < s.len_.size(); ++j) {
    double next = j + 1 < s.len_.size() ? s.len_[j + 1] : 0.0;
    s.gap_[j] = s.len_[j] - 2.0 * next;
  }
  return s;
}

double CantorSpec::length(int j) const {
  if (j < 0) throw std::invalid_argument("length: negative index");
  return j < static_cast<int>(len_.size()) ? len_[j] : 0.0;
}

double CantorSpec::gap(int j) const {
  if (j < 0) throw std::invalid_argument("gap: negative index");
  return j < static_cast<int>(gap_.size()) ? gap_[j] : 0.0;
}

int CantorSpec::first_gap_at_most(double s) const {
  // gap_ is strictly decreasing
  auto it = std::lower_bound(gap_.begin(), gap_.end(), s, [](double g, double v) { return g > v; });
  return static_cast<int>(it - gap_.begin());
}

double CantorSpec::dimension() const {
  if (kind_ == CantorKind::Meager) return 0.0;
  return -power_ * std::numbers::ln2 / std::log(lambda_);
}

PreCantor generation(const CantorSpec& spec, int m, int cap) {
  if (m < 0) throw std::invalid_argument("generation: negative m");
  if (m > cap) throw std::overflow_error("generation: m exceeds the generation cap");
  PreCantor p{spec, m, {}};
  p.intervals.reserve(std::size_t{1} << m);
  for_each_interval(spec, m, [&](double a, double b) { p.intervals.push_back({a, b}); });
  return p;
}

namespace {

void visit(const CantorSpec& spec, int m, int j, double a,
           const std::function<void(double, double)>& f) {
  double l = spec.length(j);
  if (j == m) {
    f(a, a + l);
    return;
  }
  double lc = spec.length(j + 1);
  visit(spec, m, j + 1, a, f);
  visit(spec, m, j + 1, a + l - lc, f);
}

}  // namespace

void for_each_interval(const CantorSpec& spec, int m, const std::function<void(double, double)>& f) {
  visit(spec, m, 0, -0.5, f);
}

double offset1(const CantorSpec& spec, int m, double x) {
  double a = -0.5;
  for (int j = 0;; ++j) {
    double l = spec.length(j);
    double b = a + l;
    if (x <= a) return x - a;
    if (x >= b) return x - b;
    if (j == m || l == 0.0) return 0.0;
    double lc = spec.length(j + 1);
    double left_end = a + lc, right_start = b - lc;
    if (x <= left_end) continue;
    if (x >= right_start) {
      a = right_start;
      continue;
    }
    return x - left_end <= right_start - x ? x - left_end : x - right_start;
  }
}

double distance1(const CantorSpec& spec, int m, double x) { return std::abs(offset1(spec, m, x)); }

double distance(const CantorSpec& spec, int m, const std::vector<double>& xbar) {
  double s = 0.0;
  for (double x : xbar) {
    double d = distance1(spec, m, x);
    s += d * d;
  }
  return std::sqrt(s);
}

double distance_max(const CantorSpec& spec, int m, const std::vector<double>& xbar) {
  double s = 0.0;
  for (double x : xbar) s = std::max(s, distance1(spec, m, x));
  return s;
}

double cdf(const CantorSpec& spec, int m, double x) {
  double a = -0.5, mass = 1.0, acc = 0.0;
  for (int j = 0;; ++j) {
    double l = spec.length(j);
    if (x <= a) return acc;
    if (x >= a + l) return acc + mass;
    if (j == m || l == 0.0) return acc + mass * (x - a) / l;
    double lc = spec.length(j + 1);
    mass *= 0.5;
    if (x <= a + lc) continue;
    acc += mass;
    if (x < a + l - lc) return acc;
    a = a + l - lc;
  }
}

double measure_box(const CantorSpec& spec, int m, const std::vector<double>& lo,
                   const std::vector<double>& hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("measure_box: dimension mismatch");
  double p = 1.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (hi[i] <= lo[i]) return 0.0;
    p *= cdf(spec, m, hi[i]) - cdf(spec, m, lo[i]);
  }
  return p;
}

Bracket measure_ball(const CantorSpec& spec, int m, const std::vector<double>& center, double r) {
  const std::size_t k = center.size();
  std::vector<double> lo(k), hi(k), ilo(k), ihi(k);
  double ri = k == 1 ? r : r / std::sqrt(static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    lo[i] = center[i] - r;
    hi[i] = center[i] + r;
    ilo[i] = center[i] - ri;
    ihi[i] = center[i] + ri;
  }
  return {measure_box(spec, m, ilo, ihi), measure_box(spec, m, lo, hi)};
}

double neighborhood_length(const CantorSpec& spec, int m, double r) {
  if (r < 0) throw std::invalid_argument("neighborhood_length: negative radius");
  int J = std::min(m, spec.first_gap_at_most(2.0 * r));
  return std::ldexp(spec.length(J) + 2.0 * r, J);
}

double neighborhood_length_merged(const CantorSpec& spec, int m, double r) {
  PreCantor p = generation(spec, m);
  double total = 0.0, cur_a = 0.0, cur_b = 0.0;
  bool open = false;
  for (const Interval& I : p.intervals) {
    double a = I.a - r, b = I.b + r;
    if (open && a <= cur_b) {
      cur_b = std::max(cur_b, b);
    } else {
      if (open) total += cur_b - cur_a;
      cur_a = a;
      cur_b = b;
      open = true;
    }
  }
  if (open) total += cur_b - cur_a;
  return total;
}

double neighborhood_volume(const CantorSpec& spec, int m, double r) {
  return std::pow(neighborhood_length(spec, m, r), spec.power());
}

Bracket neighborhood_volume_euclid(const CantorSpec& spec, int m, double r) {
  double k = spec.power();
  return {neighborhood_volume(spec, m, r / std::sqrt(k)), neighborhood_volume(spec, m, r)};
}

double integrate_neighborhood(const CantorSpec& spec, int m, double r,
                              const std::function<double(double)>& f, int coarse_gen, int order) {
  int J = std::min(m, spec.first_gap_at_most(2.0 * r));
  if (J <= coarse_gen) {
    double s = 0.0;
    for_each_interval(spec, J, [&](double a, double b) { s += gauss(f, a - r, b + r, order); });
    return s;
  }
  // every coarse node carries an identical copy of the fine structure
  double share = std::ldexp(spec.length(J) + 2.0 * r, J - coarse_gen);
  double half = 0.5 * spec.length(coarse_gen);
  double s = 0.0;
  for_each_interval(spec, coarse_gen, [&](double a, double) { s += f(a + half); });
  return s * share;
}

namespace {

double mu_rec(const CantorSpec& spec, int m, int j, double a, double mass, double lo, double hi,
              const std::function<double(double)>& f, double coarse, int order) {
  double l = spec.length(j);
  double b = a + l;
  if (b < lo || a > hi) return 0.0;
  bool inside = a >= lo && b <= hi;
  if (l == 0.0) return (a >= lo && a <= hi) ? mass * f(a) : 0.0;
  if (j == m) {
    double s = std::max(a, lo), e = std::min(b, hi);
    if (e <= s) return 0.0;
    return mass / l * gauss(f, s, e, order);
  }
  if (inside && l <= coarse) return mass * f(a + 0.5 * l);
  double lc = spec.length(j + 1);
  return mu_rec(spec, m, j + 1, a, 0.5 * mass, lo, hi, f, coarse, order) +
         mu_rec(spec, m, j + 1, b - lc, 0.5 * mass, lo, hi, f, coarse, order);
}

}  // namespace

double integrate_mu(const CantorSpec& spec, int m, CantorNode node, double lo, double hi,
                    const std::function<double(double)>& f, double coarse, int order) {
  return mu_rec(spec, m, node.j, node.a, std::ldexp(1.0, -node.j), lo, hi, f, coarse, order);
}

double integrate_mu(const CantorSpec& spec, int m, double lo, double hi,
                    const std::function<double(double)>& f, double coarse, int order) {
  return integrate_mu(spec, m, CantorNode{0, -0.5}, lo, hi, f, coarse, order);
}

double covering_number(const CantorSpec& spec, int m, double eps) {
  // nodes separated by gaps >= eps need separate covers; finer gaps are bridged
  int J = std::min(m, spec.first_gap_at_most(eps));
  double per = std::max(1.0, std::ceil(spec.length(J) / eps));
  return std::ldexp(per, J);
}

BoxCount boxcount_dimension(const CantorSpec& spec, int m_max) {
  if (m_max < 6) throw std::invalid_argument("boxcount_dimension: m_max must be >= 6");
  double floor_len = 0.0;
  for (int j = std::min(m_max, spec.depth() - 1); j >= 0; --j) {
    if (spec.length(j) > 0.0) {
      floor_len = spec.length(j);
      break;
    }
  }
  std::vector<double> x, y;
  for (int i = 1; i < 1000; ++i) {
    double eps = std::ldexp(1.0, -i);
    if (eps < floor_len || eps < std::numeric_limits<double>::min()) break;
    x.push_back(i * std::numbers::ln2);
    y.push_back(std::log(covering_number(spec, m_max, eps)));
  }
  BoxCount out;
  out.samples = static_cast<int>(x.size());
  if (x.size() < 4) {
    out.ill_conditioned = true;
    return out;
  }
  LineFit fit = fit_line(x, y);
  out.dimension = spec.power() * fit.slope;
  out.residual = fit.residual_rms;
  out.ill_conditioned = fit.residual_rms > 0.5;
  return out;
}

}  // namespace flab
