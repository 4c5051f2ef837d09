#pragma once

#include <string>
#include <vector>

namespace flab {

enum class Convergence { Convergent, Divergent, Inconclusive };

const char* convergence_name(Convergence c);

/// Mean contribution of the shells k .. k + block - 1 (a deep probe).
struct ShellProbe {
  int k;
  double value;
};

struct SeriesOptions {
  int gate_run = 5;           // consecutive shells for the growth gate
  double gate_factor = 1.1;   // per-shell growth of the partial sums
  double gate_from = 0.5;     // the gate only looks at the deepest (1 - gate_from) of the shells
  int fit_from = 4;           // first shell entering the asymptotic fit
  double slope_tol = 0.005;   // |B| below this counts as zero geometric rate
  double log_tol = 0.25;      // margin around the critical log power -1
  double tail_tol = 0.5;      // Convergent needs tail <= tail_tol * value
};

/// Asymptotic analysis of shell contributions c_k ~ exp(A + B k) k^S.
struct SeriesAnalysis {
  Convergence verdict = Convergence::Inconclusive;
  std::vector<double> partial_sums;
  double partial = 0.0;
  double tail = 0.0;
  double value = 0.0;
  double intercept = 0.0;  // A
  double rate = 0.0;       // B
  double log_power = 0.0;  // S
  double residual_max = 0.0;
  bool gate = false;
  std::string reason;
};

/// shells[i] is the contribution of shell k0 + i; probes extend the fit beyond the last shell.
SeriesAnalysis analyze_shells(const std::vector<double>& shells, int k0,
                              const std::vector<ShellProbe>& probes, const SeriesOptions& opt = {});

/// Sum of exp(A + B k) k^S over k > k_last, with an integral bound for the remainder.
/// Infinite when B > 0 or (B == 0 and S >= -1).
double fitted_tail(double A, double B, double S, int k_last);

}  // namespace flab
