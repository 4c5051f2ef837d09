#include "fractal/riesz.hpp"

#include "fractal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace flab {

namespace {

constexpr double kPi = std::numbers::pi;

void require_planar(const Geometry& g, Regime regime, const char* who) {
  if (g.d != 2 || g.regime != regime)
    throw std::invalid_argument(std::string(who) + ": requires d = 2 and the " + regime_name(regime) +
                                " regime");
}

/// Left ends of the generation-J nodes whose window [a - margin, a + l_J + margin] meets [lo, hi].
void nodes_near(const CantorSpec& spec, int j, int J, double a, double lo, double hi, double margin,
                std::vector<double>& out) {
  double l = spec.length(j);
  if (a + l + margin < lo || a - margin > hi) return;
  if (j == J) {
    out.push_back(a);
    return;
  }
  double lc = spec.length(j + 1);
  nodes_near(spec, j + 1, J, a, lo, hi, margin, out);
  nodes_near(spec, j + 1, J, a + l - lc, lo, hi, margin, out);
}

/// Local endpoints (relative to the node's left end) of the descendants of a generation-J node.
void local_ends(const CantorSpec& spec, int j, int j_stop, double a, std::vector<double>& out) {
  double l = spec.length(j);
  out.push_back(a);
  out.push_back(a + l);
  if (j >= j_stop || l == 0.0) return;
  double lc = spec.length(j + 1);
  local_ends(spec, j + 1, j_stop, a, out);
  local_ends(spec, j + 1, j_stop, a + l - lc, out);
}

int window_generation(const CantorSpec& spec, int m, double width) {
  return std::min({m, spec.first_gap_at_most(width), spec.depth() - 1});
}

/// Heights at which windows of half width c t around nodes merge, plus dyadic heights.
std::vector<double> height_breaks(const CantorSpec& spec, int m, double c, double t_lo, double t_hi) {
  std::vector<double> out{t_lo, t_hi};
  for (int k = 0; k < 1100; ++k) {
    double t = std::ldexp(1.0, -k);
    if (t <= t_lo) break;
    if (t < t_hi) out.push_back(t);
  }
  for (int j = 0; j < std::min(m, spec.depth() - 1); ++j) {
    double t = spec.gap(j) / (2.0 * c);
    if (t > t_lo && t < t_hi) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Average of v over the disc of radius R around (cx, cy); normalizes by the same rule.
double disc_average(const ScalarField& v, double cx, double cy, double R, int order, const Profile& omega) {
  const GaussRule& gr = gauss_rule(order);
  int nt = 2 * order;
  double num = 0.0, den = 0.0;
  Point p(2);
  for (std::size_t i = 0; i < gr.x.size(); ++i) {
    double s = 0.5 * (gr.x[i] + 1.0);
    double wr = 0.5 * gr.w[i] * s;
    if (omega) wr *= omega(s);
    if (wr == 0.0) continue;
    for (int k = 0; k < nt; ++k) {
      double th = 2.0 * kPi * (k + 0.5) / nt;
      p[0] = cx + R * s * std::cos(th);
      p[1] = cy + R * s * std::sin(th);
      num += wr * v(p);
      den += wr;
    }
  }
  return num / den;
}

/// Limit of a sequence from its last increments, geometric when they contract.
TraceLimit extrapolate(std::vector<double> a) {
  TraceLimit out;
  out.averages = std::move(a);
  const std::vector<double>& v = out.averages;
  for (std::size_t i = 1; i < v.size(); ++i) out.increments.push_back(v[i] - v[i - 1]);
  out.value = v.back();
  const std::vector<double>& d = out.increments;
  if (d.empty()) return out;
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  double tiny = 1e-12 * std::max(scale, 1.0);
  out.error = std::abs(d.back());
  if (d.size() >= 2 && std::abs(d.back()) > tiny) {
    double q = d.back() / d[d.size() - 2];
    if (std::abs(q) < 0.9) {
      out.value += d.back() * q / (1.0 - q);
      out.error = std::abs(d.back() * q / (1.0 - q)) + 1e-3 * std::abs(d.back());
    }
  }
  out.cauchy = true;
  std::size_t from = d.size() / 2;
  for (std::size_t i = std::max<std::size_t>(from, 1); i < d.size(); ++i) {
    bool ok = std::abs(d[i]) <= tiny || std::abs(d[i]) <= 0.9 * std::abs(d[i - 1]);
    if (!ok) out.cauchy = false;
  }
  return out;
}

/// Kernel integral (s1^-2 - s2^-2) / 2 over the radii s for which (Delta, t) lies in the ball
/// B_{s/4}((0, s)), clipped to [r1, r2].
double radial_weight(double delta, double t, double r1, double r2) {
  double disc = t * t / 16.0 - 15.0 / 16.0 * delta * delta;
  if (disc <= 0.0) return 0.0;
  double sq = std::sqrt(disc);
  double s1 = std::max((t - sq) * 16.0 / 15.0, r1);
  double s2 = std::min((t + sq) * 16.0 / 15.0, r2);
  if (s2 <= s1) return 0.0;
  return 0.5 * (1.0 / (s1 * s1) - 1.0 / (s2 * s2));
}

/// b at (node left end + u, t > 0) from the mass of one generation-J node placed at 0.
std::array<double, 2> b_from_node(const CantorSpec& spec, int m, CantorNode node, double z, double t,
                                  double r1, double r2, double coarse, int order) {
  double w = t / std::sqrt(15.0);
  double c = coarse * w;
  double i0 = integrate_mu(
      spec, m, node, z - w, z + w, [&](double x) { return radial_weight(z - x, t, r1, r2); }, c, order);
  double i1 = integrate_mu(
      spec, m, node, z - w, z + w, [&](double x) { return (z - x) * radial_weight(z - x, t, r1, r2); }, c,
      order);
  double k = 16.0 / kPi;
  return {k * i1, k * t * i0};
}

double inner_radius(const Geometry& g, const BFieldOptions& opt) {
  return opt.r1 > 0.0 ? opt.r1 : g.cantor.length(g.m) / 8.0;
}

Convergence worst(Convergence a, Convergence b) {
  if (a == Convergence::Divergent || b == Convergence::Divergent) return Convergence::Divergent;
  if (a == Convergence::Inconclusive || b == Convergence::Inconclusive) return Convergence::Inconclusive;
  return Convergence::Convergent;
}

RieszValue one_sided(const ScalarField& f, const Point& x, int sign, const RieszOptions& opt) {
  double xb = x[0], xd = x[1];
  double s_max = 1.0 - sign * xd;
  const Box& box = opt.support;
  double y_lo = std::max(box.y_lo, -1.0), y_hi = std::min(box.y_hi, 1.0);
  double x_lo = std::max(box.x_lo, -1.0), x_hi = std::min(box.x_hi, 1.0);
  // s = sign (y_2 - x_2) over the box
  double s_lo = sign > 0 ? y_lo - xd : xd - y_hi;
  double s_hi = sign > 0 ? y_hi - xd : xd - y_lo;
  s_lo = std::max(s_lo, 0.0);
  s_hi = std::min(s_hi, s_max);

  auto shell = [&](double a, double b, int n) {
    if (b <= a) return 0.0;
    Point y(2);
    return gauss(
        [&](double s) {
          double lo = std::max(-0.5, (x_lo - xb) / s), hi = std::min(0.5, (x_hi - xb) / s);
          if (hi <= lo) return 0.0;
          return gauss(
              [&](double t) {
                y[0] = xb + s * t;
                y[1] = xd + sign * s;
                return std::abs(f(y)) / std::sqrt(1.0 + t * t);
              },
              lo, hi, n);
        },
        a, b, n);
  };

  std::vector<double> shells;
  double quad_err = 0.0;
  for (int k = 0; k < opt.shells; ++k) {
    double a = std::max(s_max * std::ldexp(1.0, -k - 1), s_lo);
    double b = std::min(s_max * std::ldexp(1.0, -k), s_hi);
    double lo_order = shell(a, b, opt.order);
    double hi_order = shell(a, b, 2 * opt.order);
    shells.push_back(hi_order);
    quad_err += std::abs(hi_order - lo_order);
  }
  SeriesAnalysis an = analyze_shells(shells, 0, {}, opt.series);
  RieszValue out;
  out.verdict = an.verdict;
  out.reason = an.reason;
  if (an.verdict == Convergence::Divergent) {
    out.value = std::numeric_limits<double>::infinity();
    out.error = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = an.partial + an.tail;
  out.error = quad_err + an.tail;
  return out;
}

}  // namespace

double Bump::operator()(const Point& x) const {
  double dx = x[0] - cx, dy = x[1] - cy;
  double q = (dx * dx + dy * dy) / (radius * radius);
  return q < 1.0 ? height * std::exp(-1.0 / (1.0 - q)) : 0.0;
}

std::array<double, 2> Bump::grad(const Point& x) const {
  double dx = x[0] - cx, dy = x[1] - cy;
  double q = (dx * dx + dy * dy) / (radius * radius);
  if (q >= 1.0) return {0.0, 0.0};
  double f = -2.0 * height * std::exp(-1.0 / (1.0 - q)) / ((1.0 - q) * (1.0 - q) * radius * radius);
  return {f * dx, f * dy};
}

Box Bump::box() const { return {cx - radius, cx + radius, cy - radius, cy + radius}; }

double Bump::grad_sup() const {
  double best = 0.0;
  for (int i = 1; i < 4000; ++i) {
    double rho = i / 4000.0, q = rho * rho;
    best = std::max(best, 2.0 * rho * std::exp(-1.0 / (1.0 - q)) / ((1.0 - q) * (1.0 - q)));
  }
  return height * best / radius;
}

std::vector<Bump> random_bumps(std::uint64_t seed, int n, const Box& centres, double r_min, double r_max) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Bump> out;
  for (int i = 0; i < n; ++i) {
    Bump b;
    b.cx = centres.x_lo + (centres.x_hi - centres.x_lo) * u(rng);
    b.cy = centres.y_lo + (centres.y_hi - centres.y_lo) * u(rng);
    b.radius = r_min + (r_max - r_min) * u(rng);
    out.push_back(b);
  }
  return out;
}

RieszValue restricted_riesz(const ScalarField& f, const Point& x, int sign, const RieszOptions& opt) {
  if (x.size() != 2) throw std::invalid_argument("restricted_riesz: planar points only");
  if (std::abs(x[0]) >= 1.0 || std::abs(x[1]) >= 1.0)
    throw std::domain_error("restricted_riesz: base point outside the square");
  if (sign != 0) return one_sided(f, x, sign > 0 ? 1 : -1, opt);
  RieszValue p = one_sided(f, x, 1, opt), m = one_sided(f, x, -1, opt);
  RieszValue out;
  out.value = p.value + m.value;
  out.error = p.error + m.error;
  out.verdict = worst(p.verdict, m.verdict);
  out.reason = "plus: " + p.reason + "; minus: " + m.reason;
  return out;
}

double cone_region_integral(const CantorSpec& spec, int m, double c, double t_lo, double t_hi, double lo,
                            double hi, const std::function<double(double, double)>& F, int order) {
  if (t_hi <= t_lo || hi <= lo) return 0.0;
  std::vector<double> br = height_breaks(spec, m, c, t_lo, t_hi);
  double total = 0.0;
  std::vector<double> nodes;
  for (std::size_t p = 0; p + 1 < br.size(); ++p) {
    total += gauss(
        [&](double t) {
          double w = c * t;
          int J = window_generation(spec, m, 2.0 * w);
          nodes.clear();
          nodes_near(spec, 0, J, -0.5, lo, hi, w, nodes);
          double lJ = spec.length(J), sum = 0.0;
          for (double a : nodes) {
            double s = std::max(a - w, lo), e = std::min(a + lJ + w, hi);
            if (e > s) sum += gauss([&](double y) { return F(y, t); }, s, e, order);
          }
          return sum;
        },
        br[p], br[p + 1], order);
  }
  return total;
}

RieszBound riesz_vs_b(const Geometry& g, const ScalarField& f, const RieszOptions& opt, double coarse) {
  require_planar(g, Regime::Sub, "riesz_vs_b");
  const Box& box = opt.support;
  double reach = std::max(std::abs(box.y_lo), std::abs(box.y_hi));
  reach = std::min(reach, 1.0);
  double lo = std::max(box.x_lo, -1.0) - 0.5 * reach, hi = std::min(box.x_hi, 1.0) + 0.5 * reach;

  RieszBound out;
  out.lhs = integrate_mu(
      g.cantor, g.m, lo, hi,
      [&](double xb) {
        RieszValue r = restricted_riesz(f, {xb, 0.0}, 0, opt);
        out.verdict = worst(out.verdict, r.verdict);
        return r.value;
      },
      coarse, 4);

  double t_floor = 1e-3 * g.cantor.length(g.m);
  for (int sign : {1, -1}) {
    double t_lo = sign > 0 ? std::max(box.y_lo, 0.0) : std::max(-box.y_hi, 0.0);
    double t_hi = sign > 0 ? std::min(box.y_hi, 1.0) : std::min(-box.y_lo, 1.0);
    t_lo = std::max(t_lo, t_floor);
    Point y(2);
    out.rhs += cone_region_integral(
        g.cantor, g.m, 0.5, t_lo, t_hi, std::max(box.x_lo, -1.0), std::min(box.x_hi, 1.0),
        [&](double yb, double t) {
          y[0] = yb;
          y[1] = sign * t;
          return std::abs(f(y)) * b_reduced(g, 0.0, t);
        },
        opt.order);
  }
  out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double trace_average(const ScalarField& v, double xbar, double r, int sign, int order, const Profile& omega) {
  double R = 0.25 * r;
  if (!(r > 0.0) || std::abs(xbar) + R >= 1.0 || r + R >= 1.0)
    throw std::domain_error("trace_average: ball leaves the square");
  return disc_average(v, xbar, sign >= 0 ? r : -r, R, order, omega);
}

double trace_jump(const ScalarField& v, double xbar, double r, int order) {
  return trace_average(v, xbar, r, 1, order) - trace_average(v, xbar, r, -1, order);
}

TraceLimit trace_limit(const ScalarField& v, double xbar, int sign, int k_from, int k_to, int order) {
  if (k_to <= k_from) throw std::invalid_argument("trace_limit: empty radius range");
  std::vector<double> a;
  for (int k = k_from; k <= k_to; ++k) a.push_back(trace_average(v, xbar, std::ldexp(1.0, -k), sign, order));
  return extrapolate(std::move(a));
}

TraceSample trace_sample(const ScalarField& v, double xbar, int k_from, int k_to) {
  TraceSample s;
  s.xbar = xbar;
  s.plus = trace_limit(v, xbar, 1, k_from, k_to);
  s.minus = trace_limit(v, xbar, -1, k_from, k_to);
  s.jump = s.plus.value - s.minus.value;
  return s;
}

ChainSample chain_sums(const Geometry& g, const ScalarField& v, int m, double eta, const ChainOptions& opt) {
  require_planar(g, Regime::Super, "chain_sums");
  if (m < 0 || m > 16) throw std::invalid_argument("chain_sums: generation must lie in [0, 16]");
  std::vector<Interval> iv = generation(g.cantor, m, 16).intervals;
  std::size_t n = iv.size();

  // value at x_2 = xi approached from side dir through a gap of the given length
  auto endpoint = [&](double xi, int dir, double gap) {
    std::vector<double> a;
    for (int k = 0; k < opt.k_steps; ++k) {
      double delta = 0.25 * gap * std::ldexp(1.0, -k);
      a.push_back(disc_average(v, 0.375 * delta, xi + dir * delta, opt.tau * delta, opt.order, {}));
    }
    return extrapolate(std::move(a)).value;
  };

  ChainSample out;
  out.m = m;
  std::vector<double> vals = parallel_map(2 * n, [&](std::size_t i) {
    std::size_t j = i / 2;
    if (i % 2 == 0) {
      double gap = j == 0 ? iv[0].a + 1.0 : iv[j].a - iv[j - 1].b;
      return endpoint(iv[j].a, -1, gap);
    }
    double gap = j + 1 == n ? 1.0 - iv[j].b : iv[j + 1].a - iv[j].b;
    return endpoint(iv[j].b, 1, gap);
  });
  out.left.resize(n);
  out.right.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.left[j] = vals[2 * j];
    out.right[j] = vals[2 * j + 1];
  }
  double lower = -0.5 * eta, upper = 0.5 * eta;
  out.boundary_jump = upper - lower;
  for (std::size_t j = 0; j < n; ++j) out.across += out.right[j] - out.left[j];
  for (std::size_t j = 0; j <= n; ++j) {
    double from = j == 0 ? lower : out.right[j - 1];
    double to = j == n ? upper : out.left[j];
    out.gaps_signed += to - from;
    out.gaps += std::abs(to - from);
  }
  out.residual = std::abs(out.across + out.gaps_signed - out.boundary_jump);
  double top = endpoint(1.0, -1, 1.0 - iv.back().b);
  double bottom = endpoint(-1.0, 1, iv.front().a + 1.0);
  out.seam = std::max(std::abs(top - upper), std::abs(bottom - lower));
  out.consistent = out.residual <= opt.tol * std::max(1.0, std::abs(eta));
  return out;
}

std::array<double, 2> vector_field_b(const Geometry& g, const Point& z, const BFieldOptions& opt) {
  require_planar(g, Regime::Sub, "vector_field_b");
  double lm = g.cantor.length(g.m);
  double dist = distance1(g.cantor, g.m, z[0]);
  if (std::hypot(dist, z[1]) < 0.25 * lm) throw std::domain_error("vector_field_b: point too close to the contact set");
  double t = std::abs(z[1]);
  if (t == 0.0) return {0.0, 0.0};
  std::array<double, 2> b =
      b_from_node(g.cantor, g.m, CantorNode{0, -0.5}, z[0], t, inner_radius(g, opt), opt.r2, opt.coarse, opt.order);
  if (z[1] < 0.0) b[0] = -b[0];
  return b;
}

double separating_functional(const Geometry& g, const VectorField& grad_f, const BFieldOptions& opt,
                             const Box& support, int order) {
  require_planar(g, Regime::Sub, "separating_functional");
  const CantorSpec& spec = g.cantor;
  double r1 = inner_radius(g, opt);
  double c = 1.0 / std::sqrt(15.0);
  double lo = std::max(support.x_lo, -1.0), hi = std::min(support.x_hi, 1.0);
  const GaussRule& gr = gauss_rule(order);

  // b . grad f summed over the windows of one height, with b tabulated once per height
  auto slice = [&](double t, int sign) {
    double w = c * t;
    int J = window_generation(spec, g.m, 2.0 * w);
    std::vector<double> ends;
    local_ends(spec, J, std::min(J + 3, g.m), 0.0, ends);
    std::vector<double> br;
    for (double e : ends) {
      br.push_back(e - w);
      br.push_back(e + w);
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    std::vector<double> u, wt, b1, b2;
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
      double a = br[p], b = br[p + 1];
      if (b - a <= 0.0) continue;
      for (std::size_t i = 0; i < gr.x.size(); ++i) {
        double x = 0.5 * (a + b) + 0.5 * (b - a) * gr.x[i];
        std::array<double, 2> v =
            b_from_node(spec, g.m, CantorNode{J, 0.0}, x, t, r1, opt.r2, opt.coarse, opt.order);
        u.push_back(x);
        wt.push_back(0.5 * (b - a) * gr.w[i]);
        b1.push_back(sign * v[0]);
        b2.push_back(v[1]);
      }
    }
    std::vector<double> nodes;
    nodes_near(spec, 0, J, -0.5, lo, hi, w, nodes);
    double sum = 0.0;
    Point z(2);
    z[1] = sign * t;
    for (double a : nodes) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        z[0] = a + u[i];
        if (z[0] < lo || z[0] > hi) continue;
        std::array<double, 2> df = grad_f(z);
        sum += wt[i] * (b1[i] * df[0] + b2[i] * df[1]);
      }
    }
    return sum;
  };

  double total = 0.0;
  for (int sign : {1, -1}) {
    double t_lo = sign > 0 ? std::max(support.y_lo, 0.0) : std::max(-support.y_hi, 0.0);
    double t_hi = sign > 0 ? std::min(support.y_hi, 1.0) : std::min(-support.y_lo, 1.0);
    t_lo = std::max(t_lo, 0.75 * r1);
    if (t_hi <= t_lo) continue;
    std::vector<double> br = height_breaks(spec, g.m, c, t_lo, t_hi);
    for (double e : {15.0 / 16.0 * r1, 1.25 * r1})
      if (e > t_lo && e < t_hi) br.push_back(e);
    std::sort(br.begin(), br.end());
    std::vector<double> parts(br.size() - 1);
    parts = parallel_map(br.size() - 1, [&](std::size_t p) {
      return gauss([&](double t) { return slice(t, sign); }, br[p], br[p + 1], order);
    });
    total += ordered_sum(parts);
  }
  return total;
}

}  // namespace flab
