#include "fractal/series.hpp"

#include "fractal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace flab {

const char* convergence_name(Convergence c) {
  switch (c) {
    case Convergence::Convergent: return "Convergent";
    case Convergence::Divergent: return "Divergent";
    case Convergence::Inconclusive: return "Inconclusive";
  }
  return "?";
}

double fitted_tail(double A, double B, double S, int k_last) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (B > 0.0 || (B == 0.0 && S >= -1.0)) return inf;
  double sum = 0.0;
  const int n_explicit = 200000;
  int k = k_last + 1;
  for (; k <= k_last + n_explicit; ++k) {
    double term = std::exp(A + B * k + S * std::log(static_cast<double>(k)));
    sum += term;
    if (term < 1e-17 * sum) return sum;
  }
  // remainder over [k, inf): geometric or power-law majorant
  double K = static_cast<double>(k);
  double head = std::exp(A + B * K + S * std::log(K));
  if (B < 0.0) {
    double ratio = std::exp(B) * std::pow((K + 1.0) / K, std::max(S, 0.0));
    if (ratio >= 1.0) return inf;
    return sum + head / (1.0 - ratio);
  }
  return sum + head * K / (-S - 1.0);
}

SeriesAnalysis analyze_shells(const std::vector<double>& shells, int k0,
                              const std::vector<ShellProbe>& probes, const SeriesOptions& opt) {
  SeriesAnalysis r;
  char buf[256];
  double acc = 0.0;
  for (double c : shells) {
    acc += c;
    r.partial_sums.push_back(acc);
  }
  r.partial = acc;
  if (!std::isfinite(acc)) {
    r.verdict = Convergence::Divergent;
    r.value = acc;
    r.tail = std::numeric_limits<double>::infinity();
    r.reason = "non-finite shell contribution";
    return r;
  }
  int run = 0;
  std::size_t gate_start = static_cast<std::size_t>(opt.gate_from * static_cast<double>(shells.size()));
  for (std::size_t i = std::max<std::size_t>(gate_start, 1); i < r.partial_sums.size(); ++i) {
    double prev = r.partial_sums[i - 1];
    run = (prev > 0.0 && r.partial_sums[i] >= opt.gate_factor * prev) ? run + 1 : 0;
    if (run >= opt.gate_run) {
      r.gate = true;
      r.verdict = Convergence::Divergent;
      r.value = acc;
      r.tail = std::numeric_limits<double>::infinity();
      std::snprintf(buf, sizeof buf, "partial sums grew by >= %.2f over %d shells ending at k=%d",
                    opt.gate_factor, opt.gate_run, k0 + static_cast<int>(i));
      r.reason = buf;
      return r;
    }
  }

  std::vector<std::vector<double>> X;
  std::vector<double> y;
  int k_last = k0 + static_cast<int>(shells.size()) - 1;
  bool tail_nonzero = false;
  for (std::size_t i = 0; i < shells.size(); ++i) {
    int k = k0 + static_cast<int>(i);
    if (k < std::max(opt.fit_from, 1) || !(shells[i] > 0.0)) continue;
    X.push_back({1.0, static_cast<double>(k), std::log(static_cast<double>(k))});
    y.push_back(std::log(shells[i]));
    if (k > k_last - 4) tail_nonzero = true;
  }
  for (const ShellProbe& p : probes) {
    if (!(p.value > 0.0) || p.k < 1) continue;
    X.push_back({1.0, static_cast<double>(p.k), std::log(static_cast<double>(p.k))});
    y.push_back(std::log(p.value));
    tail_nonzero = true;
  }
  if (!tail_nonzero) {
    r.verdict = Convergence::Convergent;
    r.value = acc;
    r.reason = "shell contributions vanish beyond the resolved depth";
    return r;
  }
  if (X.size() < 6) {
    r.value = acc;
    r.tail = std::numeric_limits<double>::infinity();
    r.reason = "too few positive shells for the asymptotic fit";
    return r;
  }
  LeastSquares ls = least_squares(X, y);
  r.intercept = ls.beta[0];
  r.rate = ls.beta[1];
  r.log_power = ls.beta[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    double fit = r.intercept + r.rate * X[i][1] + r.log_power * X[i][2];
    r.residual_max = std::max(r.residual_max, y[i] - fit);
  }

  double k_deep = 1.0;
  for (const auto& row : X) k_deep = std::max(k_deep, row[1]);
  // log-derivative of the fitted terms at the deepest sample
  double local_rate = r.rate + r.log_power / k_deep;
  bool convergent_shape = false;
  if (local_rate > opt.slope_tol) {
    r.verdict = Convergence::Divergent;
    std::snprintf(buf, sizeof buf, "fitted growth rate %.4g > 0 at k = %.0f (B = %.4g, S = %.3g)", local_rate,
                  k_deep, r.rate, r.log_power);
  } else if (local_rate < -opt.slope_tol) {
    convergent_shape = true;
  } else if (std::abs(r.rate) > opt.slope_tol) {
    std::snprintf(buf, sizeof buf, "fitted growth rate %.3g ~ 0 at k = %.0f with B = %.3g", local_rate, k_deep,
                  r.rate);
  } else if (r.log_power > -1.0 + opt.log_tol) {
    r.verdict = Convergence::Divergent;
    std::snprintf(buf, sizeof buf, "rate %.3g ~ 0 and log power %.3g > -1", r.rate, r.log_power);
  } else if (r.log_power < -1.0 - opt.log_tol) {
    convergent_shape = true;
  } else {
    std::snprintf(buf, sizeof buf, "rate %.3g ~ 0 and log power %.3g ~ -1", r.rate, r.log_power);
  }
  if (!convergent_shape) {
    r.reason = buf;
    r.value = acc;
    r.tail = std::numeric_limits<double>::infinity();
    return r;
  }
  // majorant: fitted constant raised by the largest positive residual
  double B = std::min(r.rate, 0.0);
  r.tail = fitted_tail(r.intercept + r.residual_max, B, r.log_power, k_last);
  r.value = acc + r.tail;
  if (r.tail <= opt.tail_tol * r.value) {
    r.verdict = Convergence::Convergent;
    std::snprintf(buf, sizeof buf, "rate %.4g, log power %.3g, tail/value %.3g", r.rate, r.log_power,
                  r.tail / r.value);
  } else {
    std::snprintf(buf, sizeof buf, "convergent shape but tail/value %.3g exceeds %.2g", r.tail / r.value,
                  opt.tail_tol);
  }
  r.reason = buf;
  return r;
}

}  // namespace flab
