#include "fractal/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace flab {

namespace {

GaussRule build_rule(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

std::atomic<unsigned> g_thread_cap{0};

}  // namespace

const GaussRule& gauss_rule(int n) {
  static std::array<GaussRule, 129> table;
  static std::array<std::once_flag, 129> flags;
  if (n < 1 || n > 128) throw std::invalid_argument("gauss_rule: n out of range");
  std::call_once(flags[n], [n] { table[n] = build_rule(n); });
  return table[n];
}

double gauss(const std::function<double(double)>& f, double a, double b, int n) {
  const GaussRule& r = gauss_rule(n);
  double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
  for (int i = 0; i < n; ++i) s += r.w[i] * f(c + h * r.x[i]);
  return s * h;
}

double gauss_split(const std::function<double(double)>& f, double a, double b,
                   std::vector<double> breaks, int n) {
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0, lo = a;
  for (double t : breaks) {
    if (t <= lo || t >= b) continue;
    s += gauss(f, lo, t, n);
    lo = t;
  }
  return s + gauss(f, lo, b, n);
}

LeastSquares least_squares(const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(X.size());
  if (n == 0) throw std::invalid_argument("least_squares: no samples");
  const Eigen::Index p = static_cast<Eigen::Index>(X[0].size());
  Eigen::MatrixXd A(n, p);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) A(i, j) = X[i][j];
    b(i) = y[i];
  }
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j)
    if (scale(j) > 0) A.col(j) /= scale(j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sol = svd.solve(b);
  LeastSquares out;
  out.beta.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) out.beta[j] = scale(j) > 0 ? sol(j) / scale(j) : 0.0;
  Eigen::VectorXd res = A * sol - b;
  out.residual_rms = std::sqrt(res.squaredNorm() / static_cast<double>(n));
  const auto& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<std::vector<double>> X;
  X.reserve(x.size());
  for (double v : x) X.push_back({1.0, v});
  LeastSquares ls = least_squares(X, y);
  return {ls.beta[1], ls.beta[0], ls.residual_rms};
}

void set_thread_cap(unsigned n) { g_thread_cap = n; }

unsigned thread_cap() {
  unsigned c = g_thread_cap.load();
  if (c == 0) c = std::max(1u, std::thread::hardware_concurrency());
  return c;
}

std::vector<double> parallel_map(std::size_t n, const std::function<double(std::size_t)>& f) {
  std::vector<double> out(n, 0.0);
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_cap(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace flab
