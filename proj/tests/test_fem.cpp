#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fractal/fem.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace flab;

namespace {

Geometry sub2() { return Geometry::make(Regime::Sub, 2, 1.5, -3.0); }

LocalPhi power_phi(double p) {
  LocalPhi l;
  l.first.coef = 1.0 / p;
  l.first.power = p;
  return l;
}

PhiField constant_phi(LocalPhi l) {
  return [l](const Point&) { return l; };
}

// Exact P1 minimizer of the Dirichlet energy: own stiffness assembly, sparse LU solve.
struct DirectSolve {
  std::vector<double> v;
  double energy;
  double residual;
};

DirectSolve dirichlet_oracle(const Mesh& m, const DataField& g, const std::vector<double>& trial) {
  std::size_t n = m.vertices.size();
  std::vector<bool> fixed(n);
  std::vector<double> val(n, 0.0);
  std::vector<int> idx(n, -1);
  int nf = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = m.vertices[i];
    fixed[i] = std::abs(p[0]) == 1.0 || std::abs(p[1]) == 1.0;
    if (fixed[i]) val[i] = g({p[0], p[1]});
    else idx[i] = nf++;
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
  std::vector<std::array<std::array<double, 3>, 3>> local(m.cells.size());
  for (std::size_t t = 0; t < m.cells.size(); ++t) {
    const auto& c = m.cells[t];
    double x[3], y[3];
    for (int i = 0; i < 3; ++i) {
      x[i] = m.vertices[c[i]][0];
      y[i] = m.vertices[c[i]][1];
    }
    double det = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
    double bx[3] = {y[1] - y[2], y[2] - y[0], y[0] - y[1]};
    double by[3] = {x[2] - x[1], x[0] - x[2], x[1] - x[0]};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double k = (bx[i] * bx[j] + by[i] * by[j]) / (2.0 * std::abs(det));
        local[t][i][j] = k;
        if (fixed[c[i]]) continue;
        if (fixed[c[j]]) rhs[idx[c[i]]] -= k * val[c[j]];
        else trip.emplace_back(idx[c[i]], idx[c[j]], k);
      }
  }
  Eigen::SparseMatrix<double> K(nf, nf);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(K);
  Eigen::VectorXd sol = lu.solve(rhs);
  DirectSolve out{val, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    if (!fixed[i]) out.v[i] = sol[idx[i]];
  Eigen::VectorXd w(nf);
  for (std::size_t i = 0; i < n; ++i)
    if (!fixed[i]) w[idx[i]] = trial[i];
  out.residual = (K * w - rhs).norm() / rhs.norm();
  for (std::size_t t = 0; t < m.cells.size(); ++t)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.energy += 0.5 * local[t][i][j] * out.v[m.cells[t][i]] * out.v[m.cells[t][j]];
  return out;
}

}  // namespace

TEST_CASE("mesh construction") {
  Mesh m = build_mesh(3);
  CHECK(m.cells.size() == 512);
  CHECK(m.vertices.size() == 17 * 17);
  CHECK(m.boundary_edge_count() == 64);
  CHECK(m.min_angle() == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
  double total = 0.0;
  for (double a : m.area) total += a;
  CHECK(total == doctest::Approx(4.0).epsilon(1e-13));
  CHECK_THROWS_AS(build_mesh(10), std::invalid_argument);

  for (Regime r : {Regime::Sub, Regime::Super}) {
    Grading gr;
    gr.extra = 4;
    gr.regime = r;
    Mesh g = build_mesh(3, gr);
    CHECK(g.min_edge_on_line() == doctest::Approx(std::ldexp(1.0, -3 - 4)));
    CHECK(g.min_angle() >= std::numbers::pi / 6);
    total = 0.0;
    for (double a : g.area) total += a;
    CHECK(total == doctest::Approx(4.0).epsilon(1e-13));
    // conformity: each edge borders two cells, or one on the boundary of the square
    bool conforming = true;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto &a = g.vertices[g.edges[e][0]], &b = g.vertices[g.edges[e][1]];
      bool outer = (a[0] == b[0] && std::abs(a[0]) == 1.0) || (a[1] == b[1] && std::abs(a[1]) == 1.0);
      conforming = conforming && ((g.edge_cells[e][1] < 0) == outer);
    }
    CHECK(conforming);
  }
}

TEST_CASE("linear data reproduces the interpolant") {
  Mesh m = build_mesh(3);
  DataField g = [](const Point& x) { return x[1]; };
  auto sol = minimize(m, Space::ConformingP1, constant_phi(power_phi(2.0)), 1.0, g);
  CHECK(sol.converged);
  CHECK(sol.energy == doctest::Approx(2.0).epsilon(1e-10));
  double err = 0.0;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) err = std::max(err, std::abs(sol.coef[i] - m.vertices[i][1]));
  CHECK(err < 1e-10);
  auto cr = minimize(m, Space::NonconformingCR, constant_phi(power_phi(2.0)), 1.0, g);
  CHECK(cr.energy == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("quadratic energy with the competitor datum matches a direct solve") {
  Geometry geo = sub2();
  Mesh m = build_mesh(4);
  DataField g = [&geo](const Point& x) { return u_eval(geo, x); };
  auto sol = minimize(m, Space::ConformingP1, constant_phi(power_phi(2.0)), 1.0, g);
  REQUIRE(sol.converged);
  auto oracle = dirichlet_oracle(m, g, sol.coef);
  CHECK(std::abs(sol.energy - oracle.energy) <= 1e-8 * oracle.energy);
  CHECK(oracle.residual <= 1e-10);
  for (std::size_t i = 1; i < sol.trace.size(); ++i) CHECK(sol.trace[i].energy <= sol.trace[i - 1].energy);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const auto& p = m.vertices[i];
    if (std::abs(p[0]) == 1.0 || std::abs(p[1]) == 1.0) CHECK(sol.coef[i] == g({p[0], p[1]}));
  }
}

TEST_CASE("p = 1.5 energy is stable under a doubled budget") {
  Mesh m = build_mesh(4);
  DataField g = [](const Point& x) { return std::exp(x[0]) * std::sin(x[1]); };
  SolverConfig base;
  auto a = minimize(m, Space::ConformingP1, constant_phi(power_phi(1.5)), 1.0, g, base);
  SolverConfig longer = base;
  longer.max_total *= 2;
  longer.max_newton *= 2;
  longer.tol = 1e-15;
  longer.delta_final = 1e-10;
  auto b = minimize(m, Space::ConformingP1, constant_phi(power_phi(1.5)), 1.0, g, longer);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(std::abs(a.energy - b.energy) <= 1e-6 * b.energy);
  CHECK(a.residual <= base.tol);
}

TEST_CASE("smooth harmonic data") {
  LocalPhi half = power_phi(2.0);
  DataField g = [](const Point& x) { return std::exp(x[0]) * std::sin(x[1]); };
  double exact = std::sinh(2.0);  // (1/2) int e^{2x} over the square
  std::vector<double> err, ratio;
  for (int level = 2; level <= 6; ++level) {
    Mesh m = build_mesh(level);
    auto c = minimize(m, Space::ConformingP1, constant_phi(half), 1.0, g);
    auto n = minimize(m, Space::NonconformingCR, constant_phi(half), 1.0, g);
    CHECK(n.energy <= c.energy);
    CHECK(c.energy >= exact);
    err.push_back(c.energy - exact);
    ratio.push_back(c.energy / n.energy);
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(std::log2(err[i - 1] / err[i]) >= 1.8);
  CHECK(std::abs(ratio.back() - 1.0) <= 0.02);

  // the continuous minimizer has no jumps, so sampled discrete traces close up under refinement
  Geometry geo = sub2();
  auto pts = sample_cantor_points(geo.cantor, geo.m, 8, 2);
  double previous = 1e300;
  for (int level : {3, 5}) {
    Mesh m = build_mesh(level);
    auto sol = minimize(m, Space::NonconformingCR, constant_phi(half), 1.0, g);
    auto rep = observe(m, sol, geo, pts, {1.4});
    double worst = 0.0;
    for (const auto& t : rep.traces) worst = std::max(worst, std::abs(t.jump));
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 0.05);
}

TEST_CASE("double phase instance: nesting, determinism, dumps") {
  Geometry geo = sub2();
  ModelParams mp;
  mp.q = 2.6;
  mp.alpha = 1.0;
  Integrand I(geo, mp);
  Grading gr;
  gr.extra = 3;
  auto a = gap_ratio(I, 4.295e9, {3}, gr);
  auto b = gap_ratio(I, 4.295e9, {3}, gr);
  REQUIRE(a[0].conf.converged);
  REQUIRE(a[0].noncf.converged);
  CHECK(a[0].e_noncf <= a[0].e_conf);
  CHECK(a[0].ratio == b[0].ratio);
  CHECK(a[0].conf.coef == b[0].conf.coef);

  Mesh m = build_mesh(3, Grading{3, 0.75, Regime::Sub});
  std::stringstream ms, ss;
  write_mesh(ms, m);
  Mesh m2 = read_mesh(ms);
  CHECK(m2.vertices == m.vertices);
  CHECK(m2.cells == m.cells);
  CHECK(m2.edges == m.edges);
  write_solution(ss, a[0].noncf);
  auto s2 = read_solution(ss);
  CHECK(s2.coef == a[0].noncf.coef);
  CHECK(s2.energy == a[0].noncf.energy);
  CHECK(s2.space == Space::NonconformingCR);
  DiscreteProblem p = make_problem(m2, [&I](const Point& x) { return I.local(x); }, s2.eta);
  CHECK(p.energy_scale * discrete_energy(p, s2.space, s2.coef) == doctest::Approx(s2.energy).epsilon(1e-13));

  std::stringstream bad("not a dump at all");
  CHECK_THROWS(read_mesh(bad));
}

TEST_CASE("sampled Cantor points lie on the generation-m set") {
  Geometry geo = sub2();
  auto pts = sample_cantor_points(geo.cantor, geo.m, 200, 9);
  CHECK(pts.size() == 200);
  for (double x : pts) CHECK(distance1(geo.cantor, geo.m, x) == 0.0);
  CHECK(sample_cantor_points(geo.cantor, geo.m, 5, 9) == std::vector<double>(pts.begin(), pts.begin() + 5));
}
