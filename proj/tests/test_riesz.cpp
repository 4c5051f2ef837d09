#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fractal/cantor.hpp"
#include "fractal/quadrature.hpp"
#include "fractal/riesz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace flab;

namespace {

Geometry sub2(int m = 12) { return Geometry::make(Regime::Sub, 2, 1.5, -3.0, m); }
Geometry super2(int m = 12) { return Geometry::make(Regime::Super, 2, 3.0, 2.0, m); }

// Disc average by a midpoint polar rule, independent of the library's Gauss rule.
double disc_mid(const ScalarField& v, double cx, double cy, double R) {
  const int n = 40;
  double sum = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 2 * n; ++k) {
      double s = (i + 0.5) / n, th = std::numbers::pi * (k + 0.5) / n;
      sum += s * v({cx + R * s * std::cos(th), cy + R * s * std::sin(th)});
      den += s;
    }
  return sum / den;
}

// S(f) through the ball averages it is built from:
// int dmu [<f>^+_{r2} - <f>^+_{r1} - <f>^-_{r2} + <f>^-_{r1}].
double fubini_separating(const Geometry& g, const ScalarField& f, double r1, double r2) {
  return integrate_mu(
      g.cantor, g.m, -1.0, 1.0,
      [&](double x) {
        return disc_mid(f, x, r2, r2 / 4) - disc_mid(f, x, r1, r1 / 4) - disc_mid(f, x, -r2, r2 / 4) +
               disc_mid(f, x, -r1, r1 / 4);
      },
      1e-4, 6);
}

// int |f| K with K(y) = int |x - y|^{-1} 1{|xbar - ybar| < |y_2| / 2} dmu(xbar).
double fubini_riesz(const Geometry& g, const Bump& f) {
  Box b = f.box();
  auto slab = [&](double y2) {
    double t = std::abs(y2);
    if (t == 0.0) return 0.0;
    return gauss(
        [&](double y1) {
          double v = f({y1, y2});
          if (v == 0.0) return 0.0;
          double K = integrate_mu(
              g.cantor, g.m, y1 - 0.5 * t, y1 + 0.5 * t,
              [&](double x) { return 1.0 / std::hypot(x - y1, y2); }, 1e-5, 6);
          return v * K;
        },
        b.x_lo, b.x_hi, 64);
  };
  std::vector<double> br;
  for (int k = 0; k < 40; ++k) br.push_back(std::ldexp(1.0, -k));
  double s = 0.0;
  if (b.y_hi > 0.0) s += gauss_split(slab, std::max(b.y_lo, 1e-12), b.y_hi, br, 32);
  if (b.y_lo < 0.0) s += gauss_split([&](double t) { return slab(-t); }, std::max(-b.y_hi, 1e-12), -b.y_lo, br, 32);
  return s;
}

double ramp(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}
double ramp_prime(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  double da = a / (s * s), db = -b / ((1.0 - s) * (1.0 - s));
  return (da * b - a * db) / ((a + b) * (a + b));
}

}  // namespace

TEST_CASE("restricted Riesz potential") {
  ScalarField zero = [](const Point&) { return 0.0; };
  CHECK(restricted_riesz(zero, {0.1, 0.0}, 0).value == 0.0);

  // f = 1: each cone integrates to int_0^1 ds int_{-1/2}^{1/2} da / sqrt(1 + a^2)
  ScalarField one = [](const Point&) { return 1.0; };
  RieszValue r = restricted_riesz(one, {0.0, 0.0}, 1);
  CHECK(r.verdict == Convergence::Convergent);
  CHECK(r.value == doctest::Approx(2.0 * std::asinh(0.5)).epsilon(0.01));
  CHECK(r.error < 0.01 * r.value);
  CHECK(restricted_riesz(one, {0.0, 0.0}, 0).value == doctest::Approx(4.0 * std::asinh(0.5)).epsilon(0.01));

  // a bump away from both cones is invisible
  Bump off{0.6, 0.1, 0.05};
  CHECK(restricted_riesz(off, {0.0, 0.0}, 0).value == 0.0);
  RieszOptions boxed;
  boxed.support = off.box();
  CHECK(restricted_riesz(off, {0.0, 0.0}, 0, boxed).value == 0.0);

  CHECK_THROWS_AS(restricted_riesz(one, {1.0, 0.0}, 1), std::domain_error);
}

TEST_CASE("restricted Riesz potential of the competitor gradient") {
  for (double xb : {0.0, 0.3, -0.37}) {
    double v[2];
    for (int q = 0; q < 2; ++q) {
      Geometry g = sub2(10 + 2 * q);
      ScalarField f = [&g](const Point& y) {
        if (on_contact_set(g, y)) return 0.0;
        Point gu = grad_u(g, y);
        return std::hypot(gu[0], gu[1]);
      };
      RieszValue r = restricted_riesz(f, {xb, 0.0}, 0);
      CHECK(r.verdict == Convergence::Convergent);
      v[q] = r.value;
    }
    CHECK(std::isfinite(v[0]));
    CHECK(v[1] == doctest::Approx(v[0]).epsilon(0.02));
  }
}

TEST_CASE("cone region integral of a constant") {
  Geometry g = sub2();
  for (double c : {0.5, 1.0 / std::sqrt(15.0)}) {
    double t0 = 1e-4, t1 = 0.7;
    double got = cone_region_integral(g.cantor, g.m, c, t0, t1, -1.0, 1.0, [](double, double) { return 1.0; });
    std::vector<double> br;
    for (int j = 0; j < g.m; ++j) br.push_back(g.cantor.gap(j) / (2.0 * c));
    for (int k = 0; k < 20; ++k) br.push_back(std::ldexp(1.0, -k));
    double oracle = gauss_split([&](double t) { return neighborhood_length(g.cantor, g.m, c * t); }, t0, t1, br, 16);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("Riesz potential against the auxiliary function") {
  Geometry g = sub2();
  ScalarField zero = [](const Point&) { return 0.0; };
  RieszBound z = riesz_vs_b(g, zero);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  CHECK(std::isnan(z.ratio));

  // inside the central gap and below the cones over C
  Bump gap{0.0, 0.05, 0.04};
  RieszOptions o;
  o.support = gap.box();
  CHECK(riesz_vs_b(g, gap, o).lhs == 0.0);

  std::vector<Bump> bumps = random_bumps(11, 3, {-0.6, 0.6, -0.5, 0.5}, 0.05, 0.3);
  for (const Bump& b : bumps) {
    o.support = b.box();
    RieszBound rb = riesz_vs_b(g, b, o);
    if (rb.lhs == 0.0) continue;
    CHECK(rb.lhs == doctest::Approx(fubini_riesz(g, b)).epsilon(1e-3));
  }

  double worst[2] = {0.0, 0.0};
  for (const Bump& b : random_bumps(5, 20, {-0.6, 0.6, -0.5, 0.5}, 0.05, 0.3)) {
    o.support = b.box();
    for (int q = 0; q < 2; ++q) {
      RieszBound rb = riesz_vs_b(sub2(12 + 2 * q), b, o);
      CHECK(rb.verdict == Convergence::Convergent);
      if (rb.rhs > 0.0) worst[q] = std::max(worst[q], rb.ratio);
    }
  }
  CHECK(worst[0] > 0.0);
  CHECK(std::isfinite(worst[0]));
  CHECK(worst[1] == doctest::Approx(worst[0]).epsilon(0.2));
}

TEST_CASE("trace averages and jumps") {
  ScalarField c = [](const Point&) { return 3.5; };
  CHECK(trace_jump(c, 0.1, 0.1) == doctest::Approx(0.0).scale(1.0));
  CHECK(trace_average(c, 0.1, 0.1, 1) == doctest::Approx(3.5).epsilon(1e-14));
  CHECK_THROWS_AS(trace_average(c, 0.95, 0.4, 1), std::domain_error);
  CHECK_THROWS_AS(trace_average(c, 0.0, 0.9, -1), std::domain_error);

  // the quadrature integrates low-degree polynomials exactly
  ScalarField quad = [](const Point& x) { return x[0] * x[0] + 2.0 * x[1]; };
  double R = 0.05;
  CHECK(trace_average(quad, 0.2, 0.2, 1) == doctest::Approx(0.04 + R * R / 4.0 + 0.4).epsilon(1e-12));

  // a smooth radial weight still averages constants and linear functions exactly
  Profile omega = [](double s) { return std::exp(-1.0 / (1.0 - s * s)); };
  ScalarField lin = [](const Point& x) { return 1.0 + x[0] - x[1]; };
  CHECK(trace_average(lin, 0.2, 0.2, 1, 12, omega) == doctest::Approx(1.0 + 0.2 - 0.2).epsilon(1e-12));

  Geometry g = sub2();
  double eta = 2.5;
  ScalarField v = [&](const Point& x) { return eta * u_eval(g, x); };
  std::vector<Interval> iv = generation(g.cantor, 6).intervals;
  for (std::size_t j = 0; j < iv.size(); j += 7) {
    TraceSample s = trace_sample(v, 0.5 * (iv[j].a + iv[j].b));
    CHECK(s.jump == doctest::Approx(eta).epsilon(1e-10));
    CHECK(s.plus.cauchy);
    CHECK(s.minus.cauchy);
  }
  // away from the set the averages settle once r is below the distance scale
  TraceSample off = trace_sample(v, 0.0);
  CHECK(off.jump == doctest::Approx(0.0).scale(1.0));

  // the Cauchy flag follows geometric increments of a smooth function
  ScalarField smooth = [](const Point& x) { return std::sin(x[0] + 3.0 * x[1]); };
  TraceLimit tl = trace_limit(smooth, 0.3, 1);
  CHECK(tl.cauchy);
  CHECK(tl.value == doctest::Approx(std::sin(0.3)).epsilon(1e-6));
  ScalarField wild = [](const Point& x) { return std::sin(1.0 / std::abs(x[1])); };
  CHECK_FALSE(trace_limit(wild, 0.3, 1).cauchy);
}

TEST_CASE("chain sums in the super regime") {
  Geometry g = super2();
  double eta = 2.0;
  ScalarField v = [&](const Point& x) { return eta * u_eval(g, x); };
  for (int m : {3, 6}) {
    ChainSample c = chain_sums(g, v, m, eta);
    CHECK(c.right.size() == std::size_t(1) << m);
    CHECK(c.across == doctest::Approx(eta).epsilon(1e-8));
    CHECK(c.gaps == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
    CHECK(c.residual < 1e-6);
    CHECK(c.seam < 1e-8);
    CHECK(c.consistent);
  }
  ScalarField lin = [&](const Point& x) { return 0.5 * eta * x[1]; };
  double prev = 1e300;
  for (int m : {2, 4, 6, 8}) {
    ChainSample c = chain_sums(g, lin, m, eta);
    // a linear function has S = eta / 2 times the total length of the generation-m set
    CHECK(c.across == doctest::Approx(0.5 * eta * std::ldexp(g.cantor.length(m), m)).epsilon(1e-8));
    CHECK(c.across < prev);
    CHECK(c.residual < 1e-6);
    prev = c.across;
  }
  CHECK_THROWS_AS(chain_sums(sub2(), v, 3, eta), std::invalid_argument);
}

TEST_CASE("separating vector field") {
  Geometry g = sub2();
  // central gap: the field vanishes off the cones over C
  auto b0 = vector_field_b(g, {0.0, 0.1});
  CHECK(b0[0] == 0.0);
  CHECK(b0[1] == 0.0);
  CHECK_THROWS_AS(vector_field_b(g, {-0.5, 0.0}), std::domain_error);
  CHECK_THROWS_AS(vector_field_b(g, {-0.5, 1e-12}), std::domain_error);
  CHECK_THROWS_AS(vector_field_b(super2(), {0.0, 0.1}), std::invalid_argument);

  // symmetry and the bound |b| <= C b over sampled points of the support
  std::vector<double> ratios;
  std::vector<Interval> iv = generation(g.cantor, 8).intervals;
  for (int i = 0; i < 1000; ++i) {
    const Interval& I = iv[(i * 37) % iv.size()];
    double t = std::ldexp(1.0, -1 - (i % 20)) * (1.0 + 0.5 * std::sin(i));
    double x = 0.5 * (I.a + I.b) + (std::cos(1.7 * i) * 0.2) * t;
    auto up = vector_field_b(g, {x, t});
    auto dn = vector_field_b(g, {x, -t});
    CHECK(up[1] >= 0.0);
    CHECK(dn[1] == doctest::Approx(up[1]).epsilon(1e-12));
    CHECK(dn[0] == doctest::Approx(-up[0]).epsilon(1e-12).scale(1e-300));
    double bb = b_eval(g, {x, t});
    double nb = std::hypot(up[0], up[1]);
    if (nb > 0.0) {
      REQUIRE(bb > 0.0);
      ratios.push_back(nb / bb);
    }
  }
  REQUIRE(ratios.size() > 500);
  double cmax = *std::max_element(ratios.begin(), ratios.end());
  CHECK(std::isfinite(cmax));
  CHECK(cmax < 1e3);

  // S(f) against the ball averages it comes from, with a visible inner radius
  Bump f{0.1, 0.05, 0.3};
  BFieldOptions o;
  o.r1 = 0.02;
  double S = separating_functional(g, [&](const Point& z) { return f.grad(z); }, o, f.box());
  CHECK(S == doctest::Approx(fubini_separating(g, f, 0.02, 4.0 / 3.0)).epsilon(1e-4));

  // weak divergence and flux normalization
  for (const Bump& xi : random_bumps(3, 10, {-0.6, 0.6, -0.5, 0.5}, 0.05, 0.3)) {
    double s = separating_functional(g, [&](const Point& z) { return xi.grad(z); }, {}, xi.box());
    CHECK(std::abs(s) <= 1e-3 * xi.grad_sup());
  }
  VectorField ext = [](const Point& z) -> std::array<double, 2> {
    return {0.0, 4.0 * ramp_prime(8.0 * std::abs(z[1]) - 1.0)};
  };
  CHECK(ramp(0.5) == doctest::Approx(0.5));
  CHECK(separating_functional(g, ext, {}, {-1.0, 1.0, -0.3, 0.3}) == doctest::Approx(1.0).epsilon(1e-3));
}
