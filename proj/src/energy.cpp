#include "fractal/energy.hpp"

#include "fractal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace flab {

const char* field_name(Field f) { return f == Field::GradU ? "grad_u" : "b"; }

const char* trend_name(Trend t) {
  switch (t) {
    case Trend::Decreasing: return "decreasing";
    case Trend::NonDecreasing: return "non-decreasing";
    case Trend::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

double unit_ball_volume(int k) {
  return std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

// Volume V(r) of the r-neighborhood of the cross-section of the contact set inside (-1, 1)^k.
class CrossSection {
 public:
  CrossSection(const Geometry& g, bool upper) : spec_(&g.cantor), upper_(upper) {
    if (g.regime == Regime::Matching) {
      ball_ = true;
      k_ = g.d - 1;
    } else {
      k_ = g.regime == Regime::Super ? 1 : g.d - 1;
      cap_ = std::max(0, spec_->depth() - 1);
    }
    scale_ = upper_ || ball_ ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k_));
  }

  double volume(double r) const {
    if (ball_) return ball_volume(r);
    return std::pow(v1(scale_ * r), k_);
  }

  double dvolume(double r) const {
    if (ball_) return ball_dvolume(r);
    double v = v1(scale_ * r);
    double dv = dv1(scale_ * r) * scale_;
    return k_ == 1 ? dv : k_ * std::pow(v, k_ - 1) * dv;
  }

  // Points in (lo, hi) where V is not smooth.
  void breaks(double lo, double hi, std::vector<double>& out) const {
    if (ball_) {
      if (1.0 > lo && 1.0 < hi) out.push_back(1.0);
      if (upper_) {
        double rs = 2.0 * std::pow(unit_ball_volume(k_), -1.0 / k_);
        if (rs > lo && rs < hi) out.push_back(rs);
      }
      return;
    }
    double sat = 0.5 / scale_;
    if (sat > lo && sat < hi) out.push_back(sat);
    int j = spec_->first_gap_at_most(2.0 * scale_ * hi);
    for (; j < cap_; ++j) {
      double r = 0.5 * spec_->gap(j) / scale_;
      if (r <= lo) break;
      if (r < hi) out.push_back(r);
    }
  }

 private:
  double v1(double r) const {
    int J = std::min(cap_, spec_->first_gap_at_most(2.0 * r));
    return std::min(std::ldexp(spec_->length(J) + 2.0 * r, J), 2.0);
  }
  double dv1(double r) const {
    int J = std::min(cap_, spec_->first_gap_at_most(2.0 * r));
    return std::ldexp(spec_->length(J) + 2.0 * r, J) < 2.0 ? std::ldexp(2.0, J) : 0.0;
  }
  double ball_volume(double r) const {
    double w = unit_ball_volume(k_);
    if (upper_) return std::min(w * std::pow(r, k_), std::pow(2.0, k_));
    return w * std::pow(std::min(r, 1.0), k_);
  }
  double ball_dvolume(double r) const {
    double w = unit_ball_volume(k_);
    if (upper_) return w * std::pow(r, k_) < std::pow(2.0, k_) ? w * k_ * std::pow(r, k_ - 1) : 0.0;
    return r < 1.0 ? w * k_ * std::pow(r, k_ - 1) : 0.0;
  }

  const CantorSpec* spec_;
  bool upper_;
  bool ball_ = false;
  int k_ = 1;
  int cap_ = 0;
  double scale_ = 1.0;
};

struct Band {
  double lo;
  double hi;
};

Band field_band(const Geometry& g, Field f) {
  if (f == Field::GradU) return {kCompetitorCone.tau1, kCompetitorCone.tau2};
  if (g.regime == Regime::Super) return {2.0, 4.0};
  return {0.0, 0.5};
}

// dist / height ratios where the integrand changes its smoothness class
std::vector<double> ratio_joints() {
  std::vector<double> r{1.0};
  for (ConePair c : {kCompetitorCone, kWeightCone}) {
    double span = 1.0 / c.tau1 - 1.0 / c.tau2;
    for (double s : {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}) r.push_back(1.0 / (1.0 / c.tau2 + span * s));
  }
  return r;
}

double reduced_integrand(const Geometry& g, const LocalProvider& local, Field f, double scale, double r,
                         double t) {
  if (f == Field::GradU) {
    RhoValue rho = rho_reduced(r, t, kCompetitorCone);
    double grad = 0.5 * std::hypot(rho.d_dist, rho.d_height);
    if (grad == 0.0) return 0.0;
    return local(r, t).value(scale * grad);
  }
  double b = b_reduced(g, r, t);
  if (b == 0.0) return 0.0;
  return local(r, t).conjugate(scale * b);
}

// Gauss over [a, b] with an order reduced on pieces that are tiny relative to the band.
double piece_gauss(const std::function<double(double)>& f, double a, double b, double band, int order) {
  double len = b - a;
  if (len <= 0.0) return 0.0;
  int n = order;
  if (len < 1e-4 * band) n = 1;
  else if (len < 1e-2 * band) n = std::min(order, 3);
  return gauss(f, a, b, n);
}

double inner_integral(const Geometry& g, const LocalProvider& local, Field f, double scale, double t,
                      const CrossSection& V, Band band, const std::vector<double>& joints, int order) {
  double lo = band.lo * t, hi = band.hi * t;
  double sum = 0.0;
  if (band.lo == 0.0) {
    double v0 = V.volume(0.0);
    if (v0 > 0.0) sum += v0 * reduced_integrand(g, local, f, scale, 0.0, t);
  }
  std::vector<double> br;
  V.breaks(lo, hi, br);
  for (double c : joints)
    if (c * t > lo && c * t < hi) br.push_back(c * t);
  br.push_back(lo);
  br.push_back(hi);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    // dV/dr is normalized by its midpoint value so that huge densities on tiny pieces do not overflow
    double dref = V.dvolume(0.5 * (br[i] + br[i + 1]));
    if (dref == 0.0) dref = 1.0;
    auto integrand = [&](double r) {
      double dv = V.dvolume(r);
      return dv == 0.0 ? 0.0 : (dv / dref) * reduced_integrand(g, local, f, scale, r, t);
    };
    sum += piece_gauss(integrand, br[i], br[i + 1], hi - lo, order) * dref;
  }
  return sum;
}

// Distance from z to the part of the set inside the generation-j node [0, l_j].
double local_distance(const CantorSpec& spec, int j, double z) {
  double a = 0.0;
  int cap = spec.depth() - 1;
  for (;; ++j) {
    double l = spec.length(j), b = a + l;
    if (z <= a) return a - z;
    if (z >= b) return z - b;
    if (j >= cap) return 0.0;
    double lc = spec.length(j + 1);
    if (z <= a + lc) continue;
    if (z >= b - lc) {
      a = b - lc;
      continue;
    }
    return std::min(z - (a + lc), (b - lc) - z);
  }
}

void grad_node(const CantorSpec& spec, int j, double a, double mass, double z, double h, double coarse,
               SuperGrad& acc) {
  double l = spec.length(j), b = a + l;
  if (z - b >= 0.5 * h || a - z >= 0.5 * h) return;
  if (std::max(std::abs(z - a), std::abs(z - b)) <= 0.25 * h) return;
  if (l <= coarse * h || j + 1 >= spec.depth()) {
    double zz = z - (a + 0.5 * l), s = std::abs(zz) / h, sg = zz > 0 ? 1.0 : -1.0;
    double tp = theta_prime(s);
    acc.d_xd += 0.5 * mass * tp / h;
    acc.d_h -= 0.5 * mass * sg * tp * s / h;
    return;
  }
  double lc = spec.length(j + 1);
  grad_node(spec, j + 1, a, 0.5 * mass, z, h, coarse, acc);
  grad_node(spec, j + 1, b - lc, 0.5 * mass, z, h, coarse, acc);
}

std::vector<double> shell_breaks(double lo, double hi, const CrossSection& V, Band band,
                                 const std::vector<double>& joints, const std::vector<double>& extra) {
  std::vector<double> out{lo, hi};
  std::vector<double> ratios;
  if (band.lo > 0.0) ratios.push_back(band.lo);
  ratios.push_back(band.hi);
  for (double c : joints)
    if (c > band.lo && c < band.hi) ratios.push_back(c);
  for (double c : ratios) {
    std::vector<double> rb;
    V.breaks(c * lo, c * hi, rb);
    for (double r : rb) out.push_back(r / c);
  }
  for (double e : extra)
    if (e > lo && e < hi) out.push_back(e);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double super_gradu_shell(const Geometry& g, const LocalProvider& local, double scale, int k, int order,
                         const std::vector<double>& extra) {
  const CantorSpec& spec = g.cantor;
  double lo = std::ldexp(1.0, -k - 1), hi = std::ldexp(1.0, -k);
  std::vector<double> br{lo, hi};
  for (int j = spec.first_gap_at_most(hi); j < spec.depth(); ++j) {
    double gj = spec.gap(j);
    if (gj <= lo) break;
    if (gj < hi) br.push_back(gj);
  }
  for (double e : extra)
    if (e > lo && e < hi) br.push_back(e);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  auto per_height = [&](double h) {
    int J = std::min(spec.first_gap_at_most(h), spec.depth() - 1);
    double lJ = spec.length(J);
    double mass = std::ldexp(1.0, -J);
    double a = -0.5 * h, b = lJ + 0.5 * h;
    int panels = static_cast<int>(std::ceil((b - a) / (h / 24.0)));
    double w = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) {
      s += gauss(
          [&](double z) {
            SuperGrad gr{0.0, 0.0, 0.0};
            grad_node(spec, J, 0.0, mass, z, h, 1e-3, gr);
            double gn = std::hypot(gr.d_xd, gr.d_h);
            if (gn == 0.0) return 0.0;
            return local(local_distance(spec, J, z), h).value(scale * gn);
          },
          a + i * w, a + (i + 1) * w, order);
    }
    return std::ldexp(s, J);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) total += gauss(per_height, br[i], br[i + 1], order);
  return 2.0 * total;
}

double shell_impl(const Geometry& g, const LocalProvider& local, Field f, double scale, int k, int order,
                  bool upper, const std::vector<double>& extra) {
  if (g.regime == Regime::Super && g.d != 2)
    throw std::invalid_argument("modular: the super regime is implemented for d = 2");
  if (g.regime == Regime::Super && f == Field::GradU) return super_gradu_shell(g, local, scale, k, order, extra);
  CrossSection V(g, upper);
  Band band = field_band(g, f);
  static const std::vector<double> joints = ratio_joints();
  double lo = std::ldexp(1.0, -k - 1), hi = std::ldexp(1.0, -k);
  std::vector<double> br = shell_breaks(lo, hi, V, band, joints, extra);
  auto outer = [&](double t) { return inner_integral(g, local, f, scale, t, V, band, joints, order); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) total += gauss(outer, br[i], br[i + 1], order);
  return 2.0 * total;
}

std::vector<int> probe_starts(const EnergyOptions& opt) {
  std::vector<int> starts = opt.probes;
  if (starts.empty())
    for (int f = 2; f <= 64; f *= 2) starts.push_back(f * opt.k_max);
  std::vector<int> out;
  for (int s : starts)
    if (s > opt.k_max && s + opt.probe_block - 1 <= opt.probe_limit) out.push_back(s);
  return out;
}

struct BracketRun {
  std::vector<double> shells;
  std::vector<ShellProbe> probes;
  SeriesAnalysis analysis;
};

BracketRun run_bracket(const Geometry& g, const LocalProvider& local, Field f, double scale,
                       const EnergyOptions& opt, bool upper, const std::vector<double>& extra) {
  BracketRun run;
  int n = opt.k_max - opt.k0 + 1;
  if (n < 1) throw std::invalid_argument("modular: k_max must be >= k0");
  std::vector<int> starts = probe_starts(opt);
  std::size_t block = static_cast<std::size_t>(std::max(1, opt.probe_block));
  std::size_t jobs = static_cast<std::size_t>(n) + starts.size() * block;
  std::vector<double> vals = parallel_map(jobs, [&](std::size_t i) {
    int k = i < static_cast<std::size_t>(n)
                ? opt.k0 + static_cast<int>(i)
                : starts[(i - n) / block] + static_cast<int>((i - n) % block);
    return shell_impl(g, local, f, scale, k, opt.order, upper, extra);
  });
  run.shells.assign(vals.begin(), vals.begin() + n);
  for (std::size_t p = 0; p < starts.size(); ++p) {
    double s = 0.0;
    for (std::size_t b = 0; b < block; ++b) s += vals[n + p * block + b];
    run.probes.push_back({starts[p] + static_cast<int>(block - 1) / 2, s / static_cast<double>(block)});
  }
  run.analysis = analyze_shells(run.shells, opt.k0, run.probes, opt.series);
  return run;
}

EnergyReport modular_impl(const Geometry& g, const LocalProvider& local, Field f, double scale,
                          const EnergyOptions& opt, const std::vector<double>& extra) {
  if (!(scale > 0.0)) throw std::invalid_argument("modular: scale must be positive");
  EnergyReport rep;
  rep.field = f;
  rep.scale = scale;
  BracketRun up = run_bracket(g, local, f, scale, opt, true, extra);
  rep.shells = up.shells;
  rep.probes = up.probes;
  rep.analysis = up.analysis;
  rep.value = up.analysis.value;
  rep.tail = up.analysis.tail;
  rep.verdict = up.analysis.verdict;
  rep.note = up.analysis.reason;
  bool bracketed = g.regime != Regime::Super && g.d > 2;
  if (bracketed) {
    BracketRun lo = run_bracket(g, local, f, scale, opt, false, extra);
    rep.bracket_gap = std::abs(up.analysis.value - lo.analysis.value);
    if (lo.analysis.verdict != up.analysis.verdict) {
      rep.verdict = Convergence::Inconclusive;
      rep.note = std::string("volume brackets disagree: ") + convergence_name(lo.analysis.verdict) + " vs " +
                 convergence_name(up.analysis.verdict);
    }
  }
  return rep;
}

std::vector<double> integrand_breaks(const Integrand& I) {
  if (I.params().family != Family::ContinuousVarExp) return {};
  return {0.5 * I.xi_support(), I.xi_support()};
}

LocalProvider provider(const Integrand& I) {
  return [&I](double dist, double h) { return I.local_reduced(dist, h); };
}

}  // namespace

SuperGrad super_grad_local(const CantorSpec& spec, int j, double z, double h, double coarse) {
  SuperGrad acc{0.0, 0.0, 0.0};
  grad_node(spec, j, 0.0, std::ldexp(1.0, -j), z, h, coarse, acc);
  acc.dist = local_distance(spec, j, z);
  return acc;
}

double shell_integral(const Geometry& g, const LocalProvider& local, Field field, double scale, int k,
                      int order, bool upper) {
  return shell_impl(g, local, field, scale, k, order, upper, {});
}

EnergyReport modular(const Geometry& g, const LocalProvider& local, Field field, double scale,
                     const EnergyOptions& opt) {
  return modular_impl(g, local, field, scale, opt, {});
}

EnergyReport modular(const Integrand& I, Field field, double scale, const EnergyOptions& opt) {
  return modular_impl(I.geometry(), provider(I), field, scale, opt, integrand_breaks(I));
}

Mc1Result check_mc1(const Integrand& I, const EnergyOptions& opt) {
  Mc1Result r{modular(I, Field::GradU, 1.0, opt), modular(I, Field::B, 1.0, opt), false};
  r.holds = r.fu.verdict == Convergence::Convergent && r.fb.verdict == Convergence::Convergent;
  return r;
}

Integrand with_epsilon(const Integrand& I, double epsilon) {
  ModelParams mp = I.params();
  mp.epsilon = epsilon;
  return Integrand(I.geometry(), mp);
}

namespace {

bool both_convergent(const EnergyReport& a, const EnergyReport& b) {
  return a.verdict == Convergence::Convergent && b.verdict == Convergence::Convergent;
}

void recheck(const Integrand& I, AssumptionCertificate& c, const EnergyOptions& opt) {
  EnergyOptions fine = opt;
  fine.order = std::min(2 * opt.order, 128);
  EnergyReport fu = modular(I, Field::GradU, c.eta, fine);
  EnergyReport fb = modular(I, Field::B, c.s, fine);
  c.recheck_slack = c.kappa * c.eta * c.s - fu.value - fb.value;
  c.recheck_ok = both_convergent(fu, fb) && c.recheck_slack > 0.0;
}

}  // namespace

AssumptionCertificate find_certificate(const Integrand& I, double kappa, const EnergyOptions& opt, int budget) {
  if (!(kappa > 0.0)) throw std::invalid_argument("find_certificate: kappa must be positive");
  AssumptionCertificate c;
  c.kappa = kappa;
  c.best_ratio = std::numeric_limits<double>::infinity();
  char buf[256];
  const ModelParams& mp = I.params();

  if (mp.family == Family::BorderlineDoublePhase) {
    const Geometry& g = I.geometry();
    // a(x) psi(t) alone, i.e. the second term at epsilon = 1
    LocalProvider psi = [&I, eps = mp.epsilon](double dist, double h) {
      LocalPhi L = I.local_reduced(dist, h);
      L.first = {};
      L.second.coef *= eps;
      return L;
    };
    double sigma = 1.0;
    bool found_sigma = false;
    for (int i = 0; i <= budget; ++i, sigma *= 0.5) {
      ++c.trials;
      EnergyReport P = modular(g, psi, Field::B, sigma, opt);
      if (P.verdict == Convergence::Convergent && P.value < 0.5 * kappa * sigma) {
        found_sigma = true;
        break;
      }
    }
    if (!found_sigma) {
      c.note = "no sigma with int psi*(sigma b) < kappa sigma / 2 within budget";
      return c;
    }
    c.sigma = sigma;
    double eps = 1.0;
    for (int j = 0; j <= budget; ++j, eps *= 0.5) {
      ++c.trials;
      Integrand Ie = with_epsilon(I, eps);
      EnergyReport fu = modular(Ie, Field::GradU, 1.0, opt);
      EnergyReport fb = modular(Ie, Field::B, sigma / eps, opt);
      double s = sigma / eps;
      double ratio = (fu.value + fb.value) / s;
      c.best_ratio = std::min(c.best_ratio, ratio);
      if (both_convergent(fu, fb) && ratio < kappa) {
        c.issued = true;
        c.eta = 1.0;
        c.s = s;
        c.epsilon = eps;
        c.f_u = fu.value;
        c.f_b = fb.value;
        c.slack = kappa * s - fu.value - fb.value;
        recheck(Ie, c, opt);
        std::snprintf(buf, sizeof buf, "sigma = %.4g, epsilon = %.4g", sigma, eps);
        c.note = buf;
        return c;
      }
    }
    c.note = "budget exhausted";
    return c;
  }

  double p1 = mp.family == Family::DoublePhase       ? 0.5 * (I.geometry().p0 + mp.q)
              : mp.family == Family::PiecewiseVarExp ? 0.5 * (mp.p_minus + mp.p_plus)
                                                     : I.geometry().p0;
  double eta = 1.0;
  for (int i = 0; i <= budget; ++i, eta *= 2.0) {
    ++c.trials;
    double s = std::pow(eta, p1 - 1.0);
    EnergyReport fu = modular(I, Field::GradU, eta, opt);
    EnergyReport fb = modular(I, Field::B, s, opt);
    if (!both_convergent(fu, fb)) {
      std::snprintf(buf, sizeof buf, "modular not Convergent at eta = %.4g (%s, %s)", eta,
                    convergence_name(fu.verdict), convergence_name(fb.verdict));
      c.note = buf;
      return c;
    }
    double ratio = (fu.value + fb.value) / (eta * s);
    c.best_ratio = std::min(c.best_ratio, ratio);
    if (ratio < kappa) {
      c.issued = true;
      c.eta = eta;
      c.s = s;
      c.f_u = fu.value;
      c.f_b = fb.value;
      c.slack = kappa * eta * s - fu.value - fb.value;
      recheck(I, c, opt);
      std::snprintf(buf, sizeof buf, "schedule s = eta^%.4g", p1 - 1.0);
      c.note = buf;
      return c;
    }
  }
  c.note = "budget exhausted";
  return c;
}

namespace {

double sub_volume(const Geometry& g, double r, bool upper) {
  if (g.regime == Regime::Super) throw std::invalid_argument("meyers_condition_sub: sub or matching regime");
  return CrossSection(g, upper).volume(r);
}

Trend classify(double slope, double tol) {
  if (slope < -tol) return Trend::Decreasing;
  if (slope > tol) return Trend::NonDecreasing;
  return Trend::Inconclusive;
}

}  // namespace

double meyers_condition_sub(const Geometry& g, const TestOrlicz& psi, double h, bool upper) {
  if (!(h > 0.0 && h < 0.25)) throw std::invalid_argument("meyers_condition_sub: need h in (0, 1/4)");
  double arg = std::pow(h, 1.0 - g.d + g.D) * std::pow(std::log(1.0 / h), -g.gamma * g.nu);
  return sub_volume(g, 0.5 * h, upper) * 4.0 * h * psi.conjugate(arg);
}

MeyersSeries meyers_trend_sub(const Geometry& g, const TestOrlicz& psi, int k_from, int k_to, double flat_tol) {
  MeyersSeries s;
  std::vector<double> lx, ly;
  for (int k = k_from; k <= k_to; ++k) {
    double h = std::ldexp(1.0, -k);
    double v = meyers_condition_sub(g, psi, h);
    s.x.push_back(h);
    s.g.push_back(v);
    lx.push_back(std::log(std::log(1.0 / h)));
    ly.push_back(std::log(v));
  }
  s.slope = fit_line(lx, ly).slope;
  s.predicted = (g.gamma * g.nu + psi.delta) / (1.0 - g.p0);
  s.trend = classify(s.slope, flat_tol);
  return s;
}

double meyers_condition_super(const Geometry& g, const TestOrlicz& psi, int m, double tube) {
  if (g.regime != Regime::Super) throw std::invalid_argument("meyers_condition_super: super regime");
  if (m < 0 || m >= g.cantor.depth()) throw std::invalid_argument("meyers_condition_super: m beyond the stored depth");
  double l = g.cantor.length(m);
  double cross = unit_ball_volume(g.d - 1) * std::pow(tube * l, g.d - 1);
  double along = l * (1.0 + 2.0 * tube);
  return std::ldexp(cross * along, m) * psi.conjugate(std::pow(l, 1.0 - g.d));
}

MeyersSeries meyers_trend_super(const Geometry& g, const TestOrlicz& psi, int m_from, int m_to, double flat_tol) {
  MeyersSeries s;
  std::vector<double> lx, ly;
  for (int m = std::max(m_from, 1); m <= m_to && m < g.cantor.depth(); ++m) {
    double v = meyers_condition_super(g, psi, m);
    if (!(v > 0.0) || !std::isfinite(v)) break;
    s.x.push_back(m);
    s.g.push_back(v);
    lx.push_back(std::log(static_cast<double>(m)));
    ly.push_back(std::log(v));
  }
  if (lx.size() >= 2) s.slope = fit_line(lx, ly).slope;
  s.predicted = g.lambda > 0.0 ? g.gamma * g.D + psi.delta / (1.0 - g.p0)
                               : -std::numeric_limits<double>::infinity();
  s.trend = classify(s.slope, flat_tol);
  return s;
}

}  // namespace flab
