#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fractal/energy.hpp"
#include "fractal/quadrature.hpp"

#include <cmath>
#include <vector>

using namespace flab;

namespace {

Geometry sub2(double gamma = -3.0) { return Geometry::make(Regime::Sub, 2, 1.5, gamma); }

ModelParams dp(double q) {
  ModelParams m;
  m.q = q;
  m.alpha = 1.0;
  return m;
}

LocalProvider of(const Integrand& I) {
  return [&I](double d, double h) { return I.local_reduced(d, h); };
}

// Pointwise F over the slab {2^{-k-1} <= height <= 2^{-k}} by composite Gauss in x_1 and the height.
double brute_shell_gradu(const Integrand& I, int k, bool super) {
  const Geometry& g = I.geometry();
  double lo = std::ldexp(1.0, -k - 1), hi = std::ldexp(1.0, -k);
  const int panels = 4000;
  double w = 2.0 / panels;
  auto slice = [&](double h) {
    double s = 0.0;
    for (int i = 0; i < panels; ++i) {
      s += gauss(
          [&](double y) {
            Point x = super ? Point{h, y} : Point{y, h};
            Point gu = grad_u(g, x);
            double n = std::hypot(gu[0], gu[1]);
            return n == 0.0 ? 0.0 : I.phi(x, n);
          },
          -1.0 + i * w, -1.0 + (i + 1) * w, 6);
    }
    return s;
  };
  return 2.0 * gauss(slice, lo, hi, 16);
}

}  // namespace

TEST_CASE("fitted tail matches a brute-force sum") {
  for (auto [A, B, S] : std::vector<std::array<double, 3>>{{0.0, -0.05, 1.0}, {1.0, -0.3, -2.0}, {0.5, 0.0, -2.5}}) {
    double brute = 0.0;
    for (int k = 41; k < 4000000; ++k) brute += std::exp(A + B * k + S * std::log(static_cast<double>(k)));
    double tail = fitted_tail(A, B, S, 40);
    CHECK(tail >= brute * (1 - 1e-9));
    CHECK(tail <= brute * 1.01);
  }
  CHECK(std::isinf(fitted_tail(0.0, 0.01, -3.0, 40)));
  CHECK(std::isinf(fitted_tail(0.0, 0.0, -0.5, 40)));
}

TEST_CASE("shell series verdicts on synthetic sequences") {
  auto seq = [](double B, double S, int n = 41) {
    std::vector<double> v;
    for (int k = 0; k < n; ++k) v.push_back(std::exp(B * k + S * std::log(k + 1.0)));
    return v;
  };
  auto probes = [](double B, double S) {
    std::vector<ShellProbe> p;
    for (int k : {80, 160, 320}) p.push_back({k, std::exp(B * k + S * std::log(k + 1.0))});
    return p;
  };
  CHECK(analyze_shells(seq(-0.2, 0.0), 0, probes(-0.2, 0.0)).verdict == Convergence::Convergent);
  SeriesAnalysis geo = analyze_shells(seq(0.3, 0.0), 0, {});
  CHECK(geo.verdict == Convergence::Divergent);
  CHECK(geo.gate);
  CHECK(analyze_shells(seq(0.0, 0.5), 0, probes(0.0, 0.5)).verdict == Convergence::Divergent);
  CHECK(analyze_shells(seq(0.0, 0.0), 0, probes(0.0, 0.0)).verdict == Convergence::Divergent);
  SeriesAnalysis lg = analyze_shells(seq(0.0, -2.5), 0, probes(0.0, -2.5));
  CHECK(lg.verdict == Convergence::Convergent);
  CHECK(lg.tail <= 0.5 * lg.value);
  CHECK(analyze_shells(seq(0.0, -1.0), 0, probes(0.0, -1.0)).verdict == Convergence::Inconclusive);
  std::vector<double> finite(41, 0.0);
  finite[3] = 1.0;
  SeriesAnalysis fs = analyze_shells(finite, 0, {});
  CHECK(fs.verdict == Convergence::Convergent);
  CHECK(fs.value == doctest::Approx(1.0));
}

TEST_CASE("reduced shell integral agrees with pointwise quadrature") {
  SUBCASE("sub regime") {
    Integrand I(sub2(), dp(2.6));
    for (int k : {2, 4}) {
      double reduced = shell_integral(I.geometry(), of(I), Field::GradU, 1.0, k, 8);
      double brute = brute_shell_gradu(I, k, false);
      CHECK(reduced == doctest::Approx(brute).epsilon(2e-4));
    }
  }
  SUBCASE("matching regime") {
    ModelParams mp;
    mp.family = Family::PiecewiseVarExp;
    mp.p_minus = 1.5;
    mp.p_plus = 2.5;
    Integrand I(Geometry::make(Regime::Matching, 2, 2.0, 0.0), mp);
    double reduced = shell_integral(I.geometry(), of(I), Field::GradU, 1.0, 3, 8);
    CHECK(reduced == doctest::Approx(brute_shell_gradu(I, 3, false)).epsilon(2e-4));
  }
  SUBCASE("super regime") {
    Integrand I(Geometry::make(Regime::Super, 2, 3.0, 2.0), dp(5.5));
    double reduced = shell_integral(I.geometry(), of(I), Field::GradU, 1.0, 3, 8);
    CHECK(reduced == doctest::Approx(brute_shell_gradu(I, 3, true)).epsilon(1e-3));
  }
}

TEST_CASE("auxiliary modular shell equals measure times the constant conjugate") {
  // on {dist <= t/2} both b and the weight depend on the height only
  Geometry g = sub2();
  Integrand I(g, dp(2.6));
  int k = 3;
  double lo = std::ldexp(1.0, -k - 1), hi = std::ldexp(1.0, -k);
  double oracle = 2.0 * gauss(
                            [&](double t) {
                              double vol = neighborhood_length(g.cantor, 200, 0.5 * t);
                              return vol * I.local_reduced(0.0, t).conjugate(b_reduced(g, 0.0, t));
                            },
                            lo, hi, 32);
  CHECK(shell_integral(g, of(I), Field::B, 1.0, k, 8) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("local super gradient matches the global competitor") {
  Geometry g = Geometry::make(Regime::Super, 2, 3.0, 2.0);
  for (double h : {0.3, 0.05, 0.01}) {
    int J = std::min(g.cantor.first_gap_at_most(h), g.cantor.depth() - 1);
    for (int i = 0; i < 50; ++i) {
      double z = -0.5 * h + (g.cantor.length(J) + h) * (i + 0.5) / 50.0;
      SuperGrad loc = super_grad_local(g.cantor, J, z, h, 1e-6);
      SuperU glob = u_super(g.cantor, 40, -0.5 + z, h);
      CHECK(loc.d_xd == doctest::Approx(glob.d_xd).epsilon(1e-6).scale(1.0 / h));
      CHECK(loc.d_h == doctest::Approx(glob.d_h).epsilon(1e-6).scale(1.0 / h));
      CHECK(loc.dist == doctest::Approx(distance1(g.cantor, 200, -0.5 + z)).epsilon(1e-9));
    }
  }
}

TEST_CASE("homogeneity of pure-power modulars") {
  Integrand I(sub2(), dp(2.6));
  for (int k : {5, 17}) {
    double base = shell_integral(I.geometry(), of(I), Field::GradU, 1.0, k, 8);
    for (double eta : {3.0, 1e4}) {
      double scaled = shell_integral(I.geometry(), of(I), Field::GradU, eta, k, 8);
      CHECK(scaled == doctest::Approx(std::pow(eta, 1.5) * base).epsilon(1e-10));
    }
  }
}

TEST_CASE("modular verdicts for the reference instances") {
  Integrand I(sub2(), dp(2.6));
  Mc1Result mc = check_mc1(I);
  CHECK(mc.fu.verdict == Convergence::Convergent);
  CHECK(mc.fb.verdict == Convergence::Convergent);
  CHECK(mc.holds);
  CHECK(mc.fu.tail <= 0.5 * mc.fu.value);

  Integrand low(sub2(), dp(2.2));
  EnergyReport fb = modular(low, Field::B, 1.0);
  CHECK(fb.verdict == Convergence::Divergent);
  CHECK(fb.analysis.gate);

  ModelParams pw;
  pw.family = Family::PiecewiseVarExp;
  pw.p_minus = 1.5;
  pw.p_plus = 2.0;
  Integrand pwI(sub2(-1.0), pw);
  CHECK(modular(pwI, Field::GradU, 1.0).verdict == Convergence::Divergent);

  Geometry zh = Geometry::make(Regime::Matching, 2, 2.0, 0.0);
  LocalProvider quad = [](double, double) {
    LocalPhi L;
    L.first = {0.5, 2.0, 0.0};
    return L;
  };
  CHECK(modular(zh, quad, Field::GradU, 1.0).verdict == Convergence::Divergent);
}

TEST_CASE("quadrature order and generation stability") {
  Integrand I(sub2(), dp(2.6));
  EnergyOptions o8, o16;
  o16.order = 16;
  for (Field f : {Field::GradU, Field::B}) {
    EnergyReport a = modular(I, f, 1.0, o8), b = modular(I, f, 1.0, o16);
    REQUIRE(a.verdict == Convergence::Convergent);
    double pa = a.analysis.partial, pb = b.analysis.partial;
    CHECK(std::abs(pa - pb) <= 1e-4 * pa);
  }
  Geometry g10 = Geometry::make(Regime::Sub, 2, 1.5, -3.0, 10);
  Integrand I10(g10, dp(2.6));
  EnergyReport a = modular(I, Field::GradU, 1.0), b = modular(I10, Field::GradU, 1.0);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-3));
}

TEST_CASE("certificates") {
  Integrand I(sub2(), dp(2.6));
  Mc1Result mc = check_mc1(I);
  double total = mc.fu.value + mc.fb.value;

  AssumptionCertificate big = find_certificate(I, 1.5 * total);
  CHECK(big.issued);
  CHECK(big.eta == 1.0);
  CHECK(big.trials == 1);

  AssumptionCertificate c = find_certificate(I, 1.0);
  REQUIRE(c.issued);
  CHECK(c.eta > 1.0);
  CHECK(c.s == doctest::Approx(std::pow(c.eta, 0.5 * (1.5 + 2.6) - 1.0)));
  CHECK(c.slack == doctest::Approx(c.kappa * c.eta * c.s - c.f_u - c.f_b));
  CHECK(c.slack > 0.0);
  CHECK(c.recheck_ok);

  ModelParams bl;
  bl.family = Family::BorderlineDoublePhase;
  bl.alpha = 3.0;
  bl.beta = 0.2;
  bl.kappa = 0.2;
  Integrand B(sub2(), bl);
  AssumptionCertificate cb = find_certificate(B, 0.01);
  REQUIRE(cb.issued);
  CHECK(cb.eta == 1.0);
  CHECK(cb.s == doctest::Approx(cb.sigma / cb.epsilon));
  CHECK(cb.slack > 0.0);
  CHECK(cb.recheck_ok);
}

TEST_CASE("Meyers indicators in the sub regime") {
  Geometry g = sub2();
  for (double delta : {2.5, 3.0, 4.0}) CHECK(meyers_trend_sub(g, {1.5, delta}).trend == Trend::Decreasing);
  for (double delta : {0.0, 0.5, 1.0}) CHECK(meyers_trend_sub(g, {1.5, delta}).trend == Trend::NonDecreasing);
  // deep regression against the asymptotic exponent (gamma nu + delta) / (1 - p0)
  MeyersSeries deep = meyers_trend_sub(g, {1.5, 0.0}, 40, 400);
  CHECK(deep.slope == doctest::Approx(deep.predicted).epsilon(0.1));
  CHECK_THROWS(meyers_condition_sub(g, {1.5, 0.0}, 0.3));
}

TEST_CASE("Meyers indicators in the super regime") {
  Geometry g = Geometry::make(Regime::Super, 2, 3.0, 2.0);
  for (double delta : {3.0, 4.0}) CHECK(meyers_trend_super(g, {3.0, delta}).trend == Trend::Decreasing);
  for (double delta : {0.0, 1.0}) CHECK(meyers_trend_super(g, {3.0, delta}).trend == Trend::NonDecreasing);
  Geometry flat = Geometry::make(Regime::Super, 2, 3.0, 0.0);
  MeyersSeries f = meyers_trend_super(flat, {3.0, 0.0});
  CHECK(f.trend == Trend::Inconclusive);
  for (std::size_t i = 1; i < f.g.size(); ++i) CHECK(f.g[i] == doctest::Approx(f.g[0]).epsilon(1e-9));
  Geometry meager = Geometry::make(Regime::Super, 2, 2.0, 2.0);
  MeyersSeries m = meyers_trend_super(meager, {2.0, 3.0}, 2, 12);
  REQUIRE(m.g.size() >= 4);
  for (std::size_t i = 1; i < m.g.size(); ++i) CHECK(m.g[i] < m.g[i - 1]);
}
