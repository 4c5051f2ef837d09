#include "fractal/fields.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace flab {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Sub: return "sub";
    case Regime::Matching: return "matching";
    case Regime::Super: return "super";
  }
  return "?";
}

Geometry Geometry::make(Regime regime, int d, double p0, double gamma, int m) {
  if (d < 2) throw std::invalid_argument("geometry: d must be >= 2");
  if (!(p0 > 1.0)) throw std::invalid_argument("geometry: p0 must exceed 1");
  if (m < 0) throw std::invalid_argument("geometry: negative generation");
  Geometry g;
  g.regime = regime;
  g.d = d;
  g.p0 = p0;
  g.gamma = gamma;
  g.m = m;
  switch (regime) {
    case Regime::Sub:
      if (p0 > d) throw std::invalid_argument("geometry: sub regime requires 1 < p0 <= d");
      g.D = d - p0;
      if (g.D > 0) {
        g.lambda = std::exp2((1.0 - d) / g.D);
        g.nu = g.D;
      } else {
        g.lambda = 0.0;
        g.nu = d - 1.0;
      }
      if (g.lambda >= 0.5) throw std::invalid_argument("geometry: p0 too close to 1 for a Cantor set");
      g.cantor = CantorSpec::build(g.lambda > 0 ? CantorKind::LambdaGamma : CantorKind::Meager,
                                   g.lambda, gamma, d - 1);
      break;
    case Regime::Matching:
      if (p0 != d) throw std::invalid_argument("geometry: matching regime requires p0 = d");
      g.D = 0.0;
      g.lambda = 0.0;
      g.nu = d - 1.0;
      break;
    case Regime::Super:
      if (p0 < d) throw std::invalid_argument("geometry: super regime requires p0 >= d");
      g.D = (p0 - d) / (p0 - 1.0);
      if (g.D > 0) {
        g.lambda = std::exp2(-1.0 / g.D);
        g.nu = g.D;
      } else {
        g.lambda = 0.0;
        g.nu = 1.0;
      }
      if (g.lambda >= 0.5) throw std::invalid_argument("geometry: p0 too large for a Cantor set");
      g.cantor = CantorSpec::build(g.lambda > 0 ? CantorKind::LambdaGamma : CantorKind::Meager,
                                   g.lambda, gamma, 1);
      break;
  }
  return g;
}

namespace {

constexpr double kRampEdge = 1.0 / 3.0;
constexpr double kRampSlope = 1.5;

double smooth5(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double smooth5_int(double u) { return u * u * u * u * (2.5 + u * (-3.0 + u)); }
double smooth5_int2(double u) {
  double u5 = u * u * u * u * u;
  return u5 * (0.5 + u * (-0.5 + u / 7.0));
}

// Unit ramp on [0, 1] with slope 1.5 w, w a plateau bump.
double ramp(double x) {
  constexpr double a = kRampEdge;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > 0.5) return 1.0 - ramp(1.0 - x);
  if (x <= a) return kRampSlope * a * smooth5_int(x / a);
  return kRampSlope * (x - 0.5 * a);
}

double ramp_prime(double x) {
  constexpr double a = kRampEdge;
  if (x <= 0.0 || x >= 1.0) return 0.0;
  if (x > 0.5) x = 1.0 - x;
  if (x <= a) return kRampSlope * smooth5(x / a);
  return kRampSlope;
}

// Integral of the ramp over [0, x], x in [0, 1].
double ramp_int(double x) {
  constexpr double a = kRampEdge;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 0.5;
  if (x > 1.0 - a) return 0.5 - (1.0 - x) + ramp_int(1.0 - x);
  double head = kRampSlope * a * a * smooth5_int2(std::min(x, a) / a);
  if (x <= a) return head;
  return head + kRampSlope * (-0.5 * a * (x - a) + 0.5 * (x * x - a * a));
}

}  // namespace

double theta(double t) { return ramp(4.0 * t - 1.0); }
double theta_prime(double t) { return 4.0 * ramp_prime(4.0 * t - 1.0); }

double theta_integral(double t) {
  if (t <= 0.25) return 0.0;
  if (t >= 0.5) return 0.125 + (t - 0.5);
  return 0.25 * ramp_int(4.0 * t - 1.0);
}

void validate_cone(ConePair c) {
  if (!(c.tau1 >= 0.25 && c.tau1 < c.tau2 && c.tau2 <= 4.0 && c.tau2 - c.tau1 >= 0.25))
    throw std::invalid_argument("cone pair must satisfy 1/4 <= tau1 < tau2 <= 4, tau2 - tau1 >= 1/4");
}

RhoValue rho_reduced(double dist, double height, ConePair c) {
  if (dist <= c.tau1 * height) return {1.0, 0.0, 0.0};
  if (dist >= c.tau2 * height) return {0.0, 0.0, 0.0};
  double span = 1.0 / c.tau1 - 1.0 / c.tau2;
  double q = height / dist;
  double s = (q - 1.0 / c.tau2) / span;
  double rp = ramp_prime(s) / span;
  return {ramp(s), -rp * q / dist, rp / dist};
}

double rho_gradient_constant(ConePair c) {
  double span = 1.0 / c.tau1 - 1.0 / c.tau2;
  double q = 1.0 / c.tau1;
  return kRampSlope * std::sqrt(q * q + q * q * q * q) / span;
}

ConeCoords cone_coords(const Geometry& g, const Point& x) {
  if (static_cast<int>(x.size()) != g.d) throw std::invalid_argument("point dimension mismatch");
  const int d = g.d;
  ConeCoords c{0.0, 0.0, 0, Point(d, 0.0), Point(d, 0.0)};
  double xd = x[d - 1];
  c.sign = xd > 0 ? 1 : (xd < 0 ? -1 : 0);
  double bar2 = 0.0;
  for (int i = 0; i + 1 < d; ++i) bar2 += x[i] * x[i];
  double bar = std::sqrt(bar2);
  switch (g.regime) {
    case Regime::Sub: {
      double s = 0.0;
      for (int i = 0; i + 1 < d; ++i) {
        c.grad_dist[i] = offset1(g.cantor, g.m, x[i]);
        s += c.grad_dist[i] * c.grad_dist[i];
      }
      c.dist = std::sqrt(s);
      for (int i = 0; i + 1 < d; ++i) c.grad_dist[i] = c.dist > 0 ? c.grad_dist[i] / c.dist : 0.0;
      c.height = std::abs(xd);
      c.grad_height[d - 1] = c.sign;
      break;
    }
    case Regime::Matching:
      c.dist = bar;
      for (int i = 0; i + 1 < d; ++i) c.grad_dist[i] = bar > 0 ? x[i] / bar : 0.0;
      c.height = std::abs(xd);
      c.grad_height[d - 1] = c.sign;
      break;
    case Regime::Super: {
      double off = offset1(g.cantor, g.m, xd);
      c.dist = std::abs(off);
      c.grad_dist[d - 1] = off > 0 ? 1.0 : (off < 0 ? -1.0 : 0.0);
      c.height = bar;
      for (int i = 0; i + 1 < d; ++i) c.grad_height[i] = bar > 0 ? x[i] / bar : 0.0;
      break;
    }
  }
  return c;
}

double rho_cone(const Geometry& g, const Point& x, ConePair c) {
  validate_cone(c);
  ConeCoords cc = cone_coords(g, x);
  return rho_reduced(cc.dist, cc.height, c).value;
}

Point grad_rho_cone(const Geometry& g, const Point& x, ConePair c) {
  validate_cone(c);
  ConeCoords cc = cone_coords(g, x);
  RhoValue r = rho_reduced(cc.dist, cc.height, c);
  Point out(g.d);
  for (int i = 0; i < g.d; ++i) out[i] = r.d_dist * cc.grad_dist[i] + r.d_height * cc.grad_height[i];
  return out;
}

double u_matching(const Point& x) {
  double bar2 = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) bar2 += x[i] * x[i];
  double xd = x.back();
  if (bar2 == 0.0 && xd == 0.0) throw std::domain_error("u_matching: singular point x = 0");
  if (xd == 0.0) return 0.0;
  double s = xd > 0 ? 0.5 : -0.5;
  if (bar2 == 0.0) return s;
  return s * theta(std::abs(xd) / std::sqrt(bar2));
}

bool on_contact_set(const Geometry& g, const Point& x) {
  ConeCoords c = cone_coords(g, x);
  return c.dist == 0.0 && c.height == 0.0;
}

namespace {

struct SuperAcc {
  double v = 0.0, dx = 0.0, dh = 0.0;
};

void super_node(const CantorSpec& spec, int m, int j, double a, double mass, double xd, double h,
                SuperAcc& acc) {
  double l = spec.length(j);
  double b = a + l;
  if (xd - b >= 0.5 * h) {
    acc.v += 0.5 * mass;
    return;
  }
  if (a - xd >= 0.5 * h) {
    acc.v -= 0.5 * mass;
    return;
  }
  if (std::max(std::abs(xd - a), std::abs(xd - b)) <= 0.25 * h) return;
  bool one_side = xd <= a || xd >= b;
  if (l == 0.0 || (one_side && l <= 1e-6 * h)) {
    double z = xd - (a + 0.5 * l), s = std::abs(z) / h, sg = z > 0 ? 1.0 : -1.0;
    acc.v += 0.5 * mass * sg * theta(s);
    acc.dx += 0.5 * mass * theta_prime(s) / h;
    acc.dh -= 0.5 * mass * sg * theta_prime(s) * s / h;
    return;
  }
  if (j == m) {
    double rho0 = 0.5 * mass / l;
    double za = xd - a, zb = xd - b;
    double sa = std::abs(za) / h, sb = std::abs(zb) / h;
    acc.v += rho0 * h * (theta_integral(sa) - theta_integral(sb));
    double sga = za > 0 ? 1.0 : (za < 0 ? -1.0 : 0.0);
    double sgb = zb > 0 ? 1.0 : (zb < 0 ? -1.0 : 0.0);
    acc.dx += rho0 * (sga * theta(sa) - sgb * theta(sb));
    acc.dh += rho0 * ((theta_integral(sa) - sa * theta(sa)) - (theta_integral(sb) - sb * theta(sb)));
    return;
  }
  double lc = spec.length(j + 1);
  super_node(spec, m, j + 1, a, 0.5 * mass, xd, h, acc);
  super_node(spec, m, j + 1, b - lc, 0.5 * mass, xd, h, acc);
}

}  // namespace

SuperU u_super(const CantorSpec& spec, int m, double xd, double h) {
  if (h <= 0.0) {
    if (distance1(spec, m, xd) == 0.0) throw std::domain_error("u_super: point on the contact set");
    return {cdf(spec, m, xd) - 0.5, 0.0, 0.0};
  }
  SuperAcc acc;
  super_node(spec, m, 0, -0.5, 1.0, xd, h, acc);
  return {acc.v, acc.dx, acc.dh};
}

double u_eval(const Geometry& g, const Point& x) {
  if (on_contact_set(g, x)) throw std::domain_error("u_eval: point on the contact set");
  if (g.regime == Regime::Super) {
    ConeCoords c = cone_coords(g, x);
    return u_super(g.cantor, g.m, x.back(), c.height).value;
  }
  ConeCoords c = cone_coords(g, x);
  return 0.5 * c.sign * rho_reduced(c.dist, c.height, kCompetitorCone).value;
}

Point grad_u(const Geometry& g, const Point& x) {
  if (on_contact_set(g, x)) throw std::domain_error("grad_u: point on the contact set");
  ConeCoords c = cone_coords(g, x);
  Point out(g.d, 0.0);
  if (g.regime == Regime::Super) {
    SuperU s = u_super(g.cantor, g.m, x.back(), c.height);
    for (int i = 0; i + 1 < g.d; ++i) out[i] = s.d_h * c.grad_height[i];
    out[g.d - 1] = s.d_xd;
    return out;
  }
  RhoValue r = rho_reduced(c.dist, c.height, kCompetitorCone);
  for (int i = 0; i < g.d; ++i)
    out[i] = 0.5 * c.sign * (r.d_dist * c.grad_dist[i] + r.d_height * c.grad_height[i]);
  return out;
}

double b_reduced(const Geometry& g, double dist, double h) {
  if (h <= 0.0) return 0.0;
  switch (g.regime) {
    case Regime::Sub:
      if (dist > 0.5 * h) return 0.0;
      return std::pow(h, g.D + 1.0 - g.d) * std::pow(std::log(std::numbers::e + 1.0 / h), -g.gamma * g.nu);
    case Regime::Matching:
      return dist < 0.5 * h ? std::pow(h, 1.0 - g.d) : 0.0;
    case Regime::Super:
      return (dist >= 2.0 * h && dist <= 4.0 * h) ? std::pow(h, 1.0 - g.d) : 0.0;
  }
  return 0.0;
}

double b_eval(const Geometry& g, const Point& x) {
  ConeCoords c = cone_coords(g, x);
  return b_reduced(g, c.dist, c.height);
}

SupportFlags support_predicates(const Geometry& g, const Point& x) {
  ConeCoords c = cone_coords(g, x);
  SupportFlags f{false, false, false};
  f.in_supp_b = b_reduced(g, c.dist, c.height) > 0.0;
  if (c.height == 0.0) return f;
  if (g.regime == Regime::Super) {
    f.in_supp_grad_u = c.dist < 0.5 * c.height;
    f.in_transition = f.in_supp_grad_u;
  } else {
    f.in_transition = c.dist > kCompetitorCone.tau1 * c.height && c.dist < kCompetitorCone.tau2 * c.height;
    f.in_supp_grad_u = f.in_transition;
  }
  return f;
}

}  // namespace flab
