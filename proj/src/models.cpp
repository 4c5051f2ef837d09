#include "fractal/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace flab {

namespace {

constexpr double kE = std::numbers::e;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// log(e + 1/t) without overflow for tiny t
double log_e_inv(double t) { return t < 1e-200 ? -std::log(t) : std::log(kE + 1.0 / t); }

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::DoublePhase: return "double_phase";
    case Family::BorderlineDoublePhase: return "borderline";
    case Family::PiecewiseVarExp: return "piecewise_exponent";
    case Family::ContinuousVarExp: return "continuous_exponent";
  }
  return "?";
}

double PowerLogTerm::value(double t) const {
  if (coef == 0.0 || t <= 0.0) return 0.0;
  double v = coef * std::pow(t, power);
  if (logpow != 0.0) v *= std::pow(std::log(kE + t), logpow);
  if (std::isfinite(v) && v > 0.0) return v;
  double lv = std::log(coef) + power * std::log(t);
  if (logpow != 0.0) lv += logpow * std::log(std::log(kE + t));
  return std::exp(lv);
}

double PowerLogTerm::d1(double t) const {
  if (coef == 0.0 || t <= 0.0) return 0.0;
  double L = std::log(kE + t);
  double tp1 = std::pow(t, power - 1.0);
  if (logpow == 0.0) return coef * power * tp1;
  double Lk = std::pow(L, logpow);
  return coef * Lk * tp1 * (power + logpow * t / ((kE + t) * L));
}

double PowerLogTerm::d2(double t) const {
  if (coef == 0.0) return 0.0;
  if (t <= 0.0) {
    if (power < 2.0) return std::numeric_limits<double>::infinity();
    return power == 2.0 ? 2.0 * coef : 0.0;
  }
  double L = std::log(kE + t), et = kE + t;
  double tp2 = std::pow(t, power - 2.0);
  if (logpow == 0.0) return coef * power * (power - 1.0) * tp2;
  double Lk = std::pow(L, logpow);
  double r = t / (et * L);
  double k = logpow;
  // t^{p-2} L^k [p(p-1) + 2pk r + k(k-1) r^2 - k r t/(e+t)]
  return coef * tp2 * Lk * (power * (power - 1.0) + 2.0 * power * k * r + k * (k - 1.0) * r * r - k * r * t / et);
}

bool LocalPhi::pure_power() const { return second.coef == 0.0 && first.logpow == 0.0; }

double invert_derivative(const std::function<double(double)>& dphi,
                         const std::function<double(double)>& d2phi, double s, double t_hint) {
  if (s <= 0.0) return 0.0;
  double lo = 0.0, hi = std::max(t_hint, 1e-300);
  int grow = 0;
  while (dphi(hi) < s) {
    lo = hi;
    hi *= 4.0;
    if (++grow > 600 || !std::isfinite(hi)) throw std::runtime_error("invert_derivative: no bracket");
  }
  if (lo == 0.0) {
    int shrink = 0;
    while (dphi(hi * 0.25) >= s && shrink < 1200) {
      hi *= 0.25;
      ++shrink;
    }
    lo = hi * 0.25;
    if (dphi(lo) >= s) lo = 0.0;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    double f = dphi(t) - s;
    if (f == 0.0) return t;
    if (f < 0) lo = t;
    else hi = t;
    if (hi - lo <= 4e-16 * hi) break;
    double fp = d2phi(t);
    double next = (fp > 0 && std::isfinite(fp)) ? t - f / fp : -1.0;
    if (!(next > lo && next < hi)) next = (lo > 0 && hi > 4 * lo) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    t = next;
  }
  return t;
}

double LocalPhi::conjugate_argmax(double s) const {
  if (s <= 0.0) return 0.0;
  double c = first.coef * first.power;
  double hint = c > 0 ? std::pow(s / c, 1.0 / (first.power - 1.0)) : 1.0;
  if (!std::isfinite(hint) || hint <= 0) hint = 1.0;
  return invert_derivative([this](double t) { return d1(t); }, [this](double t) { return d2(t); }, s, hint);
}

double LocalPhi::conjugate(double s) const {
  if (s <= 0.0) return 0.0;
  if (pure_power()) {
    if (first.coef == 0.0) return std::numeric_limits<double>::infinity();
    double p = first.power;
    double t = std::pow(s / (first.coef * p), 1.0 / (p - 1.0));
    return (p - 1.0) * first.coef * std::pow(t, p);
  }
  double t = conjugate_argmax(s);
  return std::max(0.0, s * t - value(t));
}

double sigma(double kappa, double t) {
  if (t <= 0.0) return 0.0;
  double l3 = t < 1e-200 ? -std::log(t) : std::log(std::exp(3.0) + 1.0 / t);
  return kappa * std::log(l3) / log_e_inv(t);
}

double sigma_inverse(double kappa, double target) {
  double lo = -300.0 * std::numbers::ln10, hi = 0.0;
  if (sigma(kappa, std::exp(lo)) >= target) return 0.0;
  if (sigma(kappa, 1.0) <= target) return 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (sigma(kappa, std::exp(mid)) < target) lo = mid;
    else hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

bool convex_on_grid(const PowerLogTerm& term) {
  if (term.coef < 0) return false;
  for (int i = 0; i <= 1600; ++i) {
    double t = std::pow(10.0, -8.0 + 16.0 * i / 1600.0);
    if (!(term.d2(t) >= 0.0)) return false;
  }
  return true;
}

Integrand::Integrand(Geometry g, ModelParams mp) : g_(std::move(g)), mp_(mp) {
  const double p0 = g_.p0;
  switch (mp_.family) {
    case Family::DoublePhase:
      if (!(mp_.q > p0)) throw std::invalid_argument("double phase: q must exceed p");
      if (!(mp_.alpha >= 0)) throw std::invalid_argument("double phase: alpha must be >= 0");
      break;
    case Family::BorderlineDoublePhase:
      if (!(mp_.epsilon > 0)) throw std::invalid_argument("borderline: epsilon must be positive");
      if (!(mp_.kappa >= 0)) throw std::invalid_argument("borderline: kappa must be >= 0");
      if (!convex_on_grid({1.0, p0, -mp_.beta}))
        throw std::invalid_argument("borderline: t^p0 log^-beta(e+t) is not convex for (p0, beta) = (" +
                                    fmt(p0) + ", " + fmt(mp_.beta) + ")");
      if (!convex_on_grid({1.0, p0, mp_.alpha}))
        throw std::invalid_argument("borderline: t^p0 log^alpha(e+t) is not convex for (p0, alpha) = (" +
                                    fmt(p0) + ", " + fmt(mp_.alpha) + ")");
      break;
    case Family::PiecewiseVarExp:
      if (!(mp_.p_minus > 1.0 && mp_.p_minus < mp_.p_plus))
        throw std::invalid_argument("piecewise exponent: need 1 < p- < p+");
      break;
    case Family::ContinuousVarExp:
      if (!(mp_.kappa > 0)) throw std::invalid_argument("continuous exponent: kappa must be positive");
      xi_t_ = sigma_inverse(mp_.kappa, (p0 - 1.0) / 10.0);
      break;
  }
}

double Integrand::weight_reduced(double dist, double h) const {
  if (mp_.family != Family::DoublePhase && mp_.family != Family::BorderlineDoublePhase)
    throw std::logic_error("weight_a: family has no weight");
  double rho = rho_reduced(dist, h, kWeightCone).value;
  double factor = g_.regime == Regime::Super ? 1.0 - rho : rho;
  if (factor == 0.0 || h <= 0.0) return 0.0;
  if (mp_.family == Family::DoublePhase) return std::pow(h, mp_.alpha) * factor;
  return std::pow(log_e_inv(h), -mp_.kappa) * factor;
}

double Integrand::weight_a(const Point& x) const {
  ConeCoords c = cone_coords(g_, x);
  return weight_reduced(c.dist, c.height);
}

double Integrand::xi(double h) const {
  double t = xi_t_;
  if (h <= 0.5 * t) return 1.0;
  if (h >= t) return 0.0;
  return 1.0 - theta(((h - 0.5 * t) / (0.5 * t) + 1.0) / 4.0);
}

double Integrand::exponent_reduced(double dist, double h) const {
  if (mp_.family == Family::PiecewiseVarExp) {
    bool low = g_.regime == Regime::Super ? dist <= h : h <= dist;
    return low ? mp_.p_minus : mp_.p_plus;
  }
  if (mp_.family != Family::ContinuousVarExp) throw std::logic_error("exponent_p: family has no variable exponent");
  double p0 = g_.p0;
  double x = xi(h);
  if (x == 0.0) return p0;
  double s = sigma(mp_.kappa, h);
  double rho = rho_reduced(dist, h, kWeightCone).value;
  double w_minus = g_.regime == Regime::Super ? rho : 1.0 - rho;
  return x * (p0 - s) * w_minus + x * (p0 + s) * (1.0 - w_minus) + (1.0 - x) * p0;
}

double Integrand::exponent_p(const Point& x) const {
  ConeCoords c = cone_coords(g_, x);
  return exponent_reduced(c.dist, c.height);
}

LocalPhi Integrand::local_reduced(double dist, double h) const {
  LocalPhi L;
  const double p0 = g_.p0;
  switch (mp_.family) {
    case Family::DoublePhase:
      L.first = {1.0 / p0, p0, 0.0};
      L.second = {weight_reduced(dist, h) / mp_.q, mp_.q, 0.0};
      break;
    case Family::BorderlineDoublePhase:
      L.first = {1.0, p0, -mp_.beta};
      L.second = {weight_reduced(dist, h) / mp_.epsilon, p0, mp_.alpha};
      break;
    case Family::PiecewiseVarExp:
    case Family::ContinuousVarExp: {
      double p = exponent_reduced(dist, h);
      L.first = {1.0 / p, p, 0.0};
      break;
    }
  }
  return L;
}

LocalPhi Integrand::local(const Point& x) const {
  ConeCoords c = cone_coords(g_, x);
  return local_reduced(c.dist, c.height);
}

double Integrand::lower_growth() const {
  switch (mp_.family) {
    case Family::DoublePhase:
    case Family::BorderlineDoublePhase: return g_.p0;
    case Family::PiecewiseVarExp: return mp_.p_minus;
    case Family::ContinuousVarExp: return g_.p0 - (g_.p0 - 1.0) / 10.0;
  }
  return g_.p0;
}

double Integrand::upper_growth() const {
  switch (mp_.family) {
    case Family::DoublePhase: return mp_.q;
    case Family::BorderlineDoublePhase: return g_.p0;
    case Family::PiecewiseVarExp: return mp_.p_plus;
    case Family::ContinuousVarExp: return g_.p0 + (g_.p0 - 1.0) / 10.0;
  }
  return g_.p0;
}

double TestOrlicz::value(double t) const { return as_local().value(t); }
double TestOrlicz::conjugate(double s) const { return as_local().conjugate(s); }
LocalPhi TestOrlicz::as_local() const {
  LocalPhi L;
  L.first = {1.0, p0, delta};
  return L;
}

namespace {

Verdict strict_greater(const std::string& name, const std::string& ineq, double lhs, double rhs) {
  bool ok = lhs > rhs;
  std::string detail = ok ? fmt(lhs) + " > " + fmt(rhs) : ineq + " violated: " + fmt(lhs) + " ≤ " + fmt(rhs);
  return {name, ineq, ok, detail};
}

Verdict inside(const std::string& name, const std::string& what, double v, double lo, double hi) {
  bool ok = v > lo && v < hi;
  std::string ineq = fmt(lo) + " < " + what + " < " + fmt(hi);
  std::string detail = ok ? what + " = " + fmt(v) + " inside (" + fmt(lo) + ", " + fmt(hi) + ")"
                          : ineq + " violated: " + what + " = " + fmt(v);
  return {name, ineq, ok, detail};
}

}  // namespace

std::vector<Verdict> theorem_windows(const Geometry& g, const ModelParams& mp) {
  std::vector<Verdict> out;
  const double p = g.p0;
  switch (mp.family) {
    case Family::DoublePhase: {
      out.push_back(strict_greater("double_phase.p", "p > 1", p, 1.0));
      double rhs = p + mp.alpha * std::max(1.0, (p - 1.0) / (g.d - 1.0));
      Verdict v = strict_greater("double_phase.q", "q > p+α·max{1,(p−1)/(d−1)}", mp.q, rhs);
      out.push_back(v);
      bool a_ok = mp.alpha >= 0;
      out.push_back({"double_phase.alpha", "α ≥ 0", a_ok,
                     a_ok ? fmt(mp.alpha) + " ≥ 0" : "α ≥ 0 violated: " + fmt(mp.alpha) + " < 0"});
      break;
    }
    case Family::BorderlineDoublePhase:
      out.push_back(strict_greater("borderline.p", "p > 1", p, 1.0));
      out.push_back(strict_greater("borderline.sum", "α+β > p+ϰ", mp.alpha + mp.beta, p + mp.kappa));
      break;
    case Family::PiecewiseVarExp:
      out.push_back(strict_greater("piecewise.lower", "p− > 1", mp.p_minus, 1.0));
      out.push_back(strict_greater("piecewise.order", "p+ > p−", mp.p_plus, mp.p_minus));
      break;
    case Family::ContinuousVarExp:
      out.push_back(strict_greater("continuous.p0", "p0 > 1", p, 1.0));
      out.push_back(strict_greater("continuous.kappa", "ϰ > p0/2", mp.kappa, p / 2.0));
      break;
  }
  return out;
}

std::vector<Verdict> finiteness_windows(const Geometry& g, const ModelParams& mp) {
  std::vector<Verdict> out;
  const double p0 = g.p0, gn = g.gamma * g.nu;
  const bool super = g.regime == Regime::Super;
  if (g.regime == Regime::Matching) {
    if (mp.family == Family::PiecewiseVarExp) out.push_back(strict_greater("mc1.p_minus", "p0 > p−", p0, mp.p_minus));
    else out.push_back({"mc1.matching", "p− < p0 = d", false, "matching regime requires a lower exponent p− < d"});
    return out;
  }
  switch (mp.family) {
    case Family::DoublePhase:
      if (super) {
        out.push_back(strict_greater("mc1.q", "q > p0+α(p0−1)/(d−1)", mp.q, p0 + mp.alpha * (p0 - 1) / (g.d - 1)));
        out.push_back(strict_greater("mc1.gamma", "γν(p0−1) > 1", gn * (p0 - 1), 1.0));
      } else {
        out.push_back(strict_greater("mc1.q", "q > p0+α", mp.q, p0 + mp.alpha));
        out.push_back(strict_greater("mc1.gamma", "γν < −1", -gn, 1.0));
      }
      break;
    case Family::BorderlineDoublePhase:
      if (super) out.push_back(inside("mc1.gamma", "γν(p0−1)", gn * (p0 - 1), 1 - mp.beta, mp.alpha + 1 - p0 - mp.kappa));
      else out.push_back(inside("mc1.gamma", "γν", gn, mp.kappa - mp.alpha + p0 - 1, mp.beta - 1));
      break;
    case Family::PiecewiseVarExp: {
      bool order = mp.p_minus <= p0 && p0 < mp.p_plus;
      out.push_back({"mc1.order", "p− ≤ p0 < p+", order,
                     fmt(mp.p_minus) + " ≤ " + fmt(p0) + " < " + fmt(mp.p_plus) + (order ? "" : " violated")});
      if (mp.p_minus < p0) {
        out.push_back(strict_greater("mc1.p_minus", "p− < p0", p0, mp.p_minus));
      } else if (super) {
        out.push_back(strict_greater("mc1.gamma", "γν(p0−1) > 1 when p− = p0", gn * (p0 - 1), 1.0));
      } else {
        out.push_back(strict_greater("mc1.gamma", "γν < −1 when p− = p0", -gn, 1.0));
      }
      break;
    }
    case Family::ContinuousVarExp:
      if (super)
        out.push_back(inside("mc1.gamma", "γν", gn, (1 - (1 - g.D) * mp.kappa) / (p0 - 1),
                             -1 + mp.kappa * (g.d - 1) / ((p0 - 1) * (p0 - 1))));
      else out.push_back(inside("mc1.gamma", "γν", gn, p0 - 1 - mp.kappa, mp.kappa - 1));
      break;
  }
  return out;
}

}  // namespace flab
