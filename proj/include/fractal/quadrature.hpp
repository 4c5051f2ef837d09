#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace flab {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

/// Cached rule with n nodes, 1 <= n <= 128.
const GaussRule& gauss_rule(int n);

/// Integral of f over [a, b] with an n-point Gauss rule.
double gauss(const std::function<double(double)>& f, double a, double b, int n);

/// Integral over [a, b] after splitting at the sorted breakpoints inside (a, b).
double gauss_split(const std::function<double(double)>& f, double a, double b,
                   std::vector<double> breaks, int n);

/// Ordinary least squares for y ~ X beta. Rows of X are samples.
struct LeastSquares {
  std::vector<double> beta;
  double residual_rms = 0.0;
  double condition = 0.0;  // ratio of extreme singular values of the scaled design
};
LeastSquares least_squares(const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y);

/// Slope and intercept of the line fit y ~ a + b x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Global worker cap used by parallel_map; 0 means hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_cap();

/// Evaluates f(i) for i in [0, n) and returns the results in index order.
/// Results do not depend on the number of workers.
std::vector<double> parallel_map(std::size_t n, const std::function<double(std::size_t)>& f);

/// Sum in index order.
double ordered_sum(const std::vector<double>& v);

}  // namespace flab
