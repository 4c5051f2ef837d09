#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fractal/models.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

using namespace flab;

namespace {

Geometry sub2() { return Geometry::make(Regime::Sub, 2, 1.5, -3.0); }
Geometry super2(double gamma = 2.0) { return Geometry::make(Regime::Super, 2, 3.0, gamma); }

ModelParams dp(double q = 2.6) {
  ModelParams m;
  m.family = Family::DoublePhase;
  m.q = q;
  m.alpha = 1.0;
  return m;
}
ModelParams bdp() {
  ModelParams m;
  m.family = Family::BorderlineDoublePhase;
  m.alpha = 3.0;
  m.beta = 0.2;
  m.kappa = 0.2;
  m.epsilon = 0.5;
  return m;
}
ModelParams pw(double pm = 1.4, double pp = 2.0) {
  ModelParams m;
  m.family = Family::PiecewiseVarExp;
  m.p_minus = pm;
  m.p_plus = pp;
  return m;
}
ModelParams cont(double kappa = 1.0) {
  ModelParams m;
  m.family = Family::ContinuousVarExp;
  m.kappa = kappa;
  return m;
}

// sup_{y >= 0} (x y - g(y)) by golden-section search on a concave objective
double legendre_oracle(const std::function<double(double)>& g, double x) {
  auto obj = [&](double y) { return x * y - g(y); };
  double hi = 1.0;
  while (obj(2 * hi) > obj(hi)) hi *= 2;
  double lo = 0.0;
  hi *= 2;
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
  double fa = obj(a), fb = obj(b);
  for (int i = 0; i < 300; ++i) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + r * (hi - lo);
      fb = obj(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - r * (hi - lo);
      fa = obj(a);
    }
  }
  return std::max(std::max(fa, fb), 0.0);
}

Point random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  return {U(rng), U(rng)};
}

std::vector<Integrand> all_integrands() {
  return {Integrand(sub2(), dp()),   Integrand(sub2(), bdp()),  Integrand(sub2(), pw()),
          Integrand(sub2(), cont()), Integrand(super2(), dp(3.5)), Integrand(super2(), pw(2.8, 3.4))};
}

}  // namespace

TEST_CASE("power-log term derivatives") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    PowerLogTerm T{0.5 + U(rng), 1.1 + 2 * U(rng), -2 + 5 * U(rng)};
    double t = std::exp(-5 + 10 * U(rng)), h = 1e-5 * t;
    CHECK(T.d1(t) == doctest::Approx((T.value(t + h) - T.value(t - h)) / (2 * h)).epsilon(1e-6));
    CHECK(T.d2(t) == doctest::Approx((T.d1(t + h) - T.d1(t - h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("integrand values") {
  Integrand f(sub2(), dp());
  CHECK(f.phi({0.0, 0.01}, 1.0) == doctest::Approx(1.0 / 1.5));  // a = 0 away from the set
  ModelParams v = pw(2.0, 3.0);
  LocalPhi sq;
  sq.first = {0.5, 2.0, 0.0};
  CHECK(sq.value(3.0) == doctest::Approx(4.5));
  CHECK(sq.conjugate(3.0) == doctest::Approx(4.5));
  LocalPhi border;
  border.first = {1.0, 2.0, 0.0};
  border.second = {1.0, 2.0, 1.0};
  CHECK(border.value(1.0) == doctest::Approx(2.31326).epsilon(1e-5));
  CHECK(1 + std::log(std::numbers::e + 1) == doctest::Approx(2.31326).epsilon(1e-5));
}

TEST_CASE("weight a") {
  Integrand f(sub2(), dp());
  auto G = generation(sub2().cantor, 12);
  double a0 = G.intervals[5].a;
  CHECK(f.weight_a({a0, 0.5}) == doctest::Approx(0.5));
  CHECK(f.weight_a({0.0, 0.01}) == 0.0);
  CHECK_THROWS(Integrand(sub2(), pw()).weight_a({0.0, 0.1}));
  // grid Holder seminorm of a stays bounded under refinement
  auto holder = [&](int N) {
    double best = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        Point x{-1 + (i + 0.5) * 2.0 / N, -1 + (j + 0.5) * 2.0 / N};
        double ax = f.weight_a(x);
        for (int s = 1; s < N; s *= 2)
          for (int dir = 0; dir < 2; ++dir) {
            Point y = x;
            y[dir] += s * 2.0 / N;
            if (y[dir] >= 1) continue;
            double r = std::abs(f.weight_a(y) - ax) / std::pow(s * 2.0 / N, 1.0);
            best = std::max(best, r);
          }
      }
    return best;
  };
  double h1 = holder(64), h2 = holder(128);
  CHECK(h1 > 0);
  CHECK(std::isfinite(h2));
  CHECK(h2 / h1 < 1.5);
  Integrand b(sub2(), bdp());
  CHECK(b.weight_a({a0, 0.5}) == doctest::Approx(std::pow(std::log(std::numbers::e + 2.0), -0.2)));
}

TEST_CASE("exponents") {
  Integrand f(sub2(), pw());
  CHECK(f.exponent_p({0.0, 0.1}) == 1.4);  // d(0, C) = 1/4 >= 0.1
  CHECK(f.exponent_p({0.0, 0.3}) == 2.0);
  CHECK(sigma(1.0, 1e-3) == doctest::Approx(0.2797).epsilon(1e-3));
  Integrand c(sub2(), cont());
  CHECK(sigma(1.0, c.xi_support()) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(c.xi(0.4 * c.xi_support()) == 1.0);
  CHECK(c.xi(c.xi_support()) == 0.0);
  CHECK(c.exponent_reduced(0.0, 1e-300) == doctest::Approx(1.5).epsilon(0.02));
  CHECK(c.exponent_reduced(0.3, 0.1) == 1.5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double h = c.xi_support() * 2 * U(rng), d = 3 * h * U(rng);
    double p = c.exponent_reduced(d, h);
    CHECK(p >= 1.5 - sigma(1.0, h) - 1e-12);
    CHECK(p <= 1.5 + sigma(1.0, h) + 1e-12);
  }
}

TEST_CASE("conjugates") {
  LocalPhi pp;
  pp.first = {1.0 / 1.5, 1.5, 0.0};
  for (double s : {0.1, 1.0, 7.0}) CHECK(pp.conjugate(s) == doctest::Approx(std::pow(s, 3.0) / 3.0));
  LocalPhi d;
  d.first = {1.0 / 1.5, 1.5, 0.0};
  d.second = {1.0 / 2.5, 2.5, 0.0};
  double grid = 0.0;
  for (int i = 0; i <= 1000000; ++i) {
    double t = 4.0 * i / 1000000.0;
    grid = std::max(grid, 2 * t - d.value(t));
  }
  CHECK(d.conjugate(2.0) == doctest::Approx(grid).epsilon(1e-6));
  TestOrlicz psi0{1.5, 0.0};
  CHECK(psi0.value(2.0) == doctest::Approx(std::pow(2.0, 1.5)));
  TestOrlicz psi{1.5, 2.0};
  CHECK(psi.value(1.0) == doctest::Approx(std::pow(std::log(std::numbers::e + 1), 2.0)));
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i <= 60; ++i) {
    double s = std::pow(10.0, 6.0 * i / 60.0);
    double r = psi.conjugate(s) / (std::pow(s, 3.0) * std::pow(std::log(std::numbers::e + s), 2.0 / (1 - 1.5)));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo < 10.0);
  CHECK(std::isfinite(hi));
}

TEST_CASE("Fenchel-Young equality and biconjugation") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const Integrand& f : all_integrands()) {
    int bic = 0;
    for (int i = 0; i < 1000; ++i) {
      Point x = random_point(rng);
      if (on_contact_set(f.geometry(), x)) continue;
      double t = std::exp(-6 + 10 * U(rng));
      LocalPhi L = f.local(x);
      double s = L.d1(t);
      double lhs = L.value(t) + L.conjugate(s) - s * t;
      CHECK(std::abs(lhs) <= 1e-6 * (1 + s * t));
      // Young inequality at a random dual point
      double s2 = s * std::exp(2 * U(rng) - 1);
      CHECK(s2 * t <= L.value(t) + L.conjugate(s2) + 1e-9 * (1 + s2 * t));
      if (i % 10 == 0) {
        double back = legendre_oracle([&](double y) { return L.conjugate(y); }, t);
        CHECK(back == doctest::Approx(L.value(t)).epsilon(1e-5));
        ++bic;
      }
    }
    CHECK(bic > 50);
  }
}

TEST_CASE("convexity, growth and monotonicity on samples") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const Integrand& f : all_integrands()) {
    double c = std::pow(2.0, f.upper_growth() + 1);
    for (int i = 0; i < 500; ++i) {
      Point x = random_point(rng);
      LocalPhi L = f.local(x);
      double t = std::exp(-6 + 12 * U(rng));
      CHECK(L.value(0.0) == 0.0);
      CHECK(L.d1(t) > 0.0);
      CHECK(L.d2(t) >= 0.0);
      CHECK(L.value(2 * t) <= c * L.value(t));
      CHECK(L.value(2 * t) >= 2 * L.value(t));
    }
  }
}

TEST_CASE("region separation") {
  std::mt19937_64 rng(31);
  for (const Integrand& f : all_integrands()) {
    const Geometry& g = f.geometry();
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
      Point x = random_point(rng);
      if (on_contact_set(g, x)) continue;
      if (!support_predicates(g, x).in_supp_grad_u) continue;
      ++hits;
      switch (f.params().family) {
        case Family::DoublePhase:
        case Family::BorderlineDoublePhase: CHECK(f.weight_a(x) == 0.0); break;
        case Family::PiecewiseVarExp: CHECK(f.exponent_p(x) == f.params().p_minus); break;
        case Family::ContinuousVarExp: {
          ConeCoords c = cone_coords(g, x);
          if (f.xi(c.height) == 1.0) CHECK(f.exponent_p(x) == doctest::Approx(g.p0 - sigma(1.0, c.height)));
          break;
        }
      }
    }
    CHECK(hits > 10);
  }
  // the continuous exponent's low region is only reachable below the cutoff height
  Integrand c(sub2(), cont());
  double h = 0.25 * c.xi_support();
  CHECK(c.exponent_reduced(3 * h, h) == doctest::Approx(1.5 - sigma(1.0, h)));
}

TEST_CASE("parameter windows") {
  auto w = theorem_windows(sub2(), dp(2.6));
  bool all = true;
  for (auto& v : w) all = all && v.pass;
  CHECK(all);
  w = theorem_windows(sub2(), dp(2.4));
  CHECK_FALSE(w[1].pass);
  CHECK(w[1].detail == "q > p+α·max{1,(p−1)/(d−1)} violated: 2.4 ≤ 2.5");
  w = theorem_windows(sub2(), bdp());
  CHECK(w[1].pass);
  CHECK(w[1].detail == "3.2 > 1.7");
  CHECK(theorem_windows(sub2(), cont(0.8))[1].pass);
  CHECK_FALSE(theorem_windows(sub2(), cont(0.7))[1].pass);
  // super regime double phase window uses (p-1)/(d-1)
  Geometry s = super2();
  CHECK(theorem_windows(s, dp(3.0 + 2.0 + 0.01))[1].pass);
  CHECK_FALSE(theorem_windows(s, dp(3.0 + 2.0 - 0.01))[1].pass);
  // finiteness windows
  auto f = finiteness_windows(sub2(), dp(2.6));
  CHECK(f[0].pass);
  CHECK(f[1].pass);
  CHECK_FALSE(finiteness_windows(sub2(), dp(2.45))[0].pass);
  CHECK_FALSE(finiteness_windows(Geometry::make(Regime::Sub, 2, 1.5, -1.0), pw(1.5, 2.0))[1].pass);
  CHECK(finiteness_windows(Geometry::make(Regime::Sub, 2, 1.5, -3.0), pw(1.5, 2.0))[1].pass);
  CHECK(finiteness_windows(sub2(), pw(1.4, 2.0))[1].pass);
}

TEST_CASE("borderline convexity validation") {
  CHECK_FALSE(convex_on_grid({1.0, 1.05, -5.0}));
  CHECK(convex_on_grid({1.0, 1.5, -0.2}));
  ModelParams m = bdp();
  m.beta = 5.0;
  Geometry g = Geometry::make(Regime::Sub, 2, 1.05, -3.0);
  CHECK_THROWS_AS(Integrand(g, m), std::invalid_argument);
}
