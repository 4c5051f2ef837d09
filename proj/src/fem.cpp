#include "fractal/fem.hpp"

#include "fractal/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace flab {

static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

/// Newest-vertex bisection on a cell list with an edge -> cells map.
class Bisector {
 public:
  Bisector(std::vector<std::array<double, 2>>& v, std::vector<std::array<int, 3>>& c) : v_(v), c_(c) {
    for (std::size_t t = 0; t < c_.size(); ++t)
      for (int i = 0; i < 3; ++i) attach(c_[t][(i + 1) % 3], c_[t][(i + 2) % 3], static_cast<int>(t));
  }

  void refine(int t) {
    for (int guard = 0; guard < 200; ++guard) {
      int a = c_[t][1], b = c_[t][2];
      int n = neighbour(a, b, t);
      if (n < 0 || edge_key(c_[n][1], c_[n][2]) == edge_key(a, b)) {
        int mid = static_cast<int>(v_.size());
        v_.push_back({0.5 * (v_[a][0] + v_[b][0]), 0.5 * (v_[a][1] + v_[b][1])});
        bisect(t, mid);
        if (n >= 0) bisect(n, mid);
        return;
      }
      refine(n);
    }
    throw std::logic_error("build_mesh: bisection closure did not terminate");
  }

 private:
  std::vector<std::array<double, 2>>& v_;
  std::vector<std::array<int, 3>>& c_;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edges_;

  void attach(int a, int b, int t) {
    auto [it, fresh] = edges_.try_emplace(edge_key(a, b), std::array<int, 2>{t, -1});
    if (!fresh) it->second[1] = t;
  }
  void detach(int a, int b, int t) {
    auto it = edges_.find(edge_key(a, b));
    if (it == edges_.end()) return;
    auto& s = it->second;
    if (s[0] == t) {
      s[0] = s[1];
      s[1] = -1;
    } else if (s[1] == t) {
      s[1] = -1;
    }
    if (s[0] < 0) edges_.erase(it);
  }
  int neighbour(int a, int b, int t) const {
    auto it = edges_.find(edge_key(a, b));
    if (it == edges_.end()) return -1;
    return it->second[0] == t ? it->second[1] : it->second[0];
  }
  void bisect(int t, int m) {
    auto [v0, v1, v2] = c_[t];
    int t2 = static_cast<int>(c_.size());
    detach(v1, v2, t);
    detach(v2, v0, t);
    c_[t] = {m, v0, v1};
    c_.push_back({m, v2, v0});
    attach(v1, m, t);
    attach(m, v0, t);
    attach(m, v0, t2);
    attach(v2, m, t2);
    attach(v2, v0, t2);
  }
};

double line_coord(const std::array<double, 2>& p, Regime r) { return r == Regime::Super ? p[0] : p[1]; }
double tangent_coord(const std::array<double, 2>& p, Regime r) { return r == Regime::Super ? p[1] : p[0]; }

void finalize(Mesh& m) {
  std::unordered_map<std::uint64_t, int> index;
  m.edges.clear();
  m.cell_edges.assign(m.cells.size(), {0, 0, 0});
  m.edge_cells.clear();
  m.area.resize(m.cells.size());
  m.barycenter.resize(m.cells.size());
  for (std::size_t t = 0; t < m.cells.size(); ++t) {
    const auto& c = m.cells[t];
    for (int i = 0; i < 3; ++i) {
      int a = c[(i + 1) % 3], b = c[(i + 2) % 3];
      auto [it, fresh] = index.try_emplace(edge_key(a, b), static_cast<int>(m.edges.size()));
      if (fresh) {
        m.edges.push_back({std::min(a, b), std::max(a, b)});
        m.edge_cells.push_back({static_cast<int>(t), -1});
      } else {
        m.edge_cells[it->second][1] = static_cast<int>(t);
      }
      m.cell_edges[t][i] = it->second;
    }
    const auto &p0 = m.vertices[c[0]], &p1 = m.vertices[c[1]], &p2 = m.vertices[c[2]];
    m.area[t] = 0.5 * std::abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
    m.barycenter[t] = {(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0};
  }
}

/// Gradients of the three local basis functions of the space on cell t.
std::array<std::array<double, 2>, 3> basis_gradients(const Mesh& m, Space s, std::size_t t) {
  const auto& c = m.cells[t];
  const auto &p0 = m.vertices[c[0]], &p1 = m.vertices[c[1]], &p2 = m.vertices[c[2]];
  double twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  std::array<std::array<double, 2>, 3> g{{{(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice},
                                          {(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice},
                                          {(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice}}};
  if (s == Space::NonconformingCR)
    for (auto& v : g) v = {-2.0 * v[0], -2.0 * v[1]};
  return g;
}

std::array<int, 3> local_dofs(const Mesh& m, Space s, std::size_t t) {
  return s == Space::ConformingP1 ? m.cells[t] : m.cell_edges[t];
}

std::size_t dof_count(const Mesh& m, Space s) {
  return s == Space::ConformingP1 ? m.vertices.size() : m.edges.size();
}

std::array<double, 2> dof_point(const Mesh& m, Space s, std::size_t i) {
  if (s == Space::ConformingP1) return m.vertices[i];
  const auto& e = m.edges[i];
  return {0.5 * (m.vertices[e[0]][0] + m.vertices[e[1]][0]), 0.5 * (m.vertices[e[0]][1] + m.vertices[e[1]][1])};
}

bool on_boundary(const std::array<double, 2>& p) {
  return std::abs(std::abs(p[0]) - 1.0) < 1e-14 || std::abs(std::abs(p[1]) - 1.0) < 1e-14;
}

/// phi~(t) = phi(eta t) / scale with derivatives in t.
struct Scaled {
  const LocalPhi* phi;
  double eta;
  double inv_scale;
  double value(double t) const { return phi->value(eta * t) * inv_scale; }
  double d1(double t) const { return eta * phi->d1(eta * t) * inv_scale; }
  double d2(double t) const { return eta * eta * phi->d2(eta * t) * inv_scale; }
};

double safe_eval(const DataField& f, const std::array<double, 2>& p) {
  try {
    return f({p[0], p[1]});
  } catch (const std::domain_error&) {
    return 0.0;
  }
}

std::uint64_t to_word(double x) { return std::bit_cast<std::uint64_t>(x); }
double from_word(std::uint64_t w) { return std::bit_cast<double>(w); }

void put(std::ostream& os, std::uint64_t w) {
  unsigned char b[8];
  std::memcpy(b, &w, 8);
  os.write(reinterpret_cast<const char*>(b), 8);
}
std::uint64_t get(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("binary dump: truncated input");
  std::uint64_t w;
  std::memcpy(&w, b, 8);
  return w;
}

constexpr std::uint64_t kMeshMagic = 0x314853454d42414cULL;  // "LABMESH1"
constexpr std::uint64_t kSolMagic = 0x314c4f5342414c46ULL;   // "FLABSOL1"

}  // namespace

const char* space_name(Space s) { return s == Space::ConformingP1 ? "conf" : "noncf"; }

std::size_t Mesh::boundary_edge_count() const {
  std::size_t n = 0;
  for (const auto& ec : edge_cells) n += ec[1] < 0;
  return n;
}

double Mesh::min_edge_on_line() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : edges) {
    const auto &a = vertices[e[0]], &b = vertices[e[1]];
    if (line_coord(a, grading.regime) == 0.0 && line_coord(b, grading.regime) == 0.0)
      best = std::min(best, std::hypot(a[0] - b[0], a[1] - b[1]));
  }
  return best;
}

double Mesh::min_angle() const {
  double best = std::numbers::pi;
  for (const auto& c : cells)
    for (int i = 0; i < 3; ++i) {
      const auto &p = vertices[c[i]], &q = vertices[c[(i + 1) % 3]], &r = vertices[c[(i + 2) % 3]];
      double ux = q[0] - p[0], uy = q[1] - p[1], vx = r[0] - p[0], vy = r[1] - p[1];
      best = std::min(best, std::acos((ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy))));
    }
  return best;
}

Mesh build_mesh(int level, const Grading& grading) {
  if (level < 0 || level > 9) throw std::invalid_argument("build_mesh: level must lie in [0, 9]");
  if (grading.extra < 0 || level + grading.extra > 16)
    throw std::invalid_argument("build_mesh: grading must satisfy 0 <= extra and level + extra <= 16");
  Mesh m;
  m.level = level;
  m.grading = grading;
  int n = 1 << (level + 1);
  double h = 2.0 / n;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) m.vertices.push_back({-1.0 + i * h, -1.0 + j * h});
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      double cx = -1.0 + (i + 0.5) * h, cy = -1.0 + (j + 0.5) * h;
      // diagonals point away from the origin, so the mesh is symmetric in both axes
      if (cx * cy > 0.0) {
        m.cells.push_back({p10, p00, p11});
        m.cells.push_back({p01, p11, p00});
      } else {
        m.cells.push_back({p00, p10, p01});
        m.cells.push_back({p11, p01, p10});
      }
    }
  if (grading.extra > 0) {
    double target = h * std::ldexp(1.0, -grading.extra) * (1.0 + 1e-9);
    Bisector bis(m.vertices, m.cells);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t t = 0; t < m.cells.size(); ++t) {
        const auto& c = m.cells[t];
        for (int i = 0; i < 3; ++i) {
          const auto &a = m.vertices[c[(i + 1) % 3]], &b = m.vertices[c[(i + 2) % 3]];
          if (line_coord(a, grading.regime) != 0.0 || line_coord(b, grading.regime) != 0.0) continue;
          double mid = 0.5 * (tangent_coord(a, grading.regime) + tangent_coord(b, grading.regime));
          if (std::abs(mid) > grading.reach) continue;
          if (std::hypot(a[0] - b[0], a[1] - b[1]) > target) {
            bis.refine(static_cast<int>(t));
            changed = true;
            break;
          }
        }
      }
    }
  }
  finalize(m);
  if (m.min_angle() < std::numbers::pi / 6.0) throw std::invalid_argument("build_mesh: shape regularity violated");
  return m;
}

DiscreteProblem make_problem(const Mesh& mesh, const PhiField& phi, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("make_problem: eta must be positive");
  DiscreteProblem p;
  p.mesh = &mesh;
  p.eta = eta;
  p.phi.reserve(mesh.cells.size());
  double pmin = std::numeric_limits<double>::infinity();
  for (const auto& b : mesh.barycenter) {
    p.phi.push_back(phi({b[0], b[1]}));
    const LocalPhi& l = p.phi.back();
    if (l.first.coef > 0.0) pmin = std::min(pmin, l.first.power);
    if (l.second.coef > 0.0) pmin = std::min(pmin, l.second.power);
  }
  p.energy_scale = std::isfinite(pmin) ? std::pow(eta, pmin) : 1.0;
  return p;
}

std::vector<double> boundary_values(const Mesh& mesh, Space space, const DataField& g) {
  std::size_t n = dof_count(mesh, space);
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  if (space == Space::ConformingP1) {
    for (std::size_t i = 0; i < n; ++i)
      if (on_boundary(mesh.vertices[i])) out[i] = safe_eval(g, mesh.vertices[i]);
  } else {
    // midpoint value of the conforming boundary interpolant, so that P1 sits inside CR
    for (std::size_t e = 0; e < n; ++e) {
      if (mesh.edge_cells[e][1] >= 0) continue;
      const auto& ed = mesh.edges[e];
      out[e] = 0.5 * (safe_eval(g, mesh.vertices[ed[0]]) + safe_eval(g, mesh.vertices[ed[1]]));
    }
  }
  return out;
}

std::array<double, 2> cell_gradient(const Mesh& mesh, Space space, const std::vector<double>& w, std::size_t t) {
  auto gr = basis_gradients(mesh, space, t);
  auto d = local_dofs(mesh, space, t);
  std::array<double, 2> g{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    g[0] += w[d[i]] * gr[i][0];
    g[1] += w[d[i]] * gr[i][1];
  }
  return g;
}

double discrete_energy(const DiscreteProblem& p, Space space, const std::vector<double>& w, double delta) {
  const Mesh& m = *p.mesh;
  double e = 0.0;
  for (std::size_t t = 0; t < m.cells.size(); ++t) {
    auto g = cell_gradient(m, space, w, t);
    double tau = std::sqrt(g[0] * g[0] + g[1] * g[1] + delta * delta);
    Scaled s{&p.phi[t], p.eta, 1.0 / p.energy_scale};
    e += m.area[t] * s.value(tau);
  }
  return e;
}

DiscreteSolution minimize(const Mesh& mesh, Space space, const PhiField& phi, double eta, const DataField& g,
                          const SolverConfig& cfg, const DataField& initial) {
  DiscreteProblem prob = make_problem(mesh, phi, eta);
  std::size_t n = dof_count(mesh, space);
  std::vector<double> bv = boundary_values(mesh, space, g);
  std::vector<int> free_index(n, -1);
  int nfree = 0;
  DiscreteSolution sol;
  sol.space = space;
  sol.eta = eta;
  sol.energy_scale = prob.energy_scale;
  sol.coef.assign(n, 0.0);
  const DataField& start = initial ? initial : g;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(bv[i])) {
      free_index[i] = nfree++;
      sol.coef[i] = safe_eval(start, dof_point(mesh, space, i)) / eta;
    } else {
      sol.coef[i] = bv[i] / eta;
    }
  }

  using SpMat = Eigen::SparseMatrix<double>;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd grad(nfree), dir(nfree);
  SpMat H(nfree, nfree);
  int total = 0;

  std::vector<double> deltas;
  for (double d = cfg.delta0;; d *= cfg.delta_factor) {
    deltas.push_back(d);
    if (d <= cfg.delta_final) break;
  }
  sol.converged = true;
  for (double delta : deltas) {
    bool stage_done = false;
    for (int it = 0; it < cfg.max_newton && !stage_done; ++it) {
      if (total >= cfg.max_total) {
        sol.budget_exhausted = true;
        sol.converged = false;
        sol.note = "iteration budget exhausted";
        break;
      }
      grad.setZero();
      trip.clear();
      double E = 0.0;
      for (std::size_t t = 0; t < mesh.cells.size(); ++t) {
        auto gr = basis_gradients(mesh, space, t);
        auto d = local_dofs(mesh, space, t);
        std::array<double, 2> gv{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
          gv[0] += sol.coef[d[i]] * gr[i][0];
          gv[1] += sol.coef[d[i]] * gr[i][1];
        }
        double tau = std::sqrt(gv[0] * gv[0] + gv[1] * gv[1] + delta * delta);
        Scaled s{&prob.phi[t], eta, 1.0 / prob.energy_scale};
        double A = mesh.area[t];
        E += A * s.value(tau);
        double f1 = s.d1(tau), f2 = s.d2(tau);
        double a = f1 / tau, b = (f2 - a) / (tau * tau);
        double proj[3];
        for (int i = 0; i < 3; ++i) proj[i] = gv[0] * gr[i][0] + gv[1] * gr[i][1];
        for (int i = 0; i < 3; ++i) {
          int fi = free_index[d[i]];
          if (fi < 0) continue;
          grad[fi] += A * a * proj[i];
          for (int j = 0; j < 3; ++j) {
            int fj = free_index[d[j]];
            if (fj < 0) continue;
            double hij = A * (a * (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1]) + b * proj[i] * proj[j]);
            trip.emplace_back(fi, fj, hij);
          }
        }
      }
      H.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed) {
        ldlt.analyzePattern(H);
        analyzed = true;
      }
      ldlt.factorize(H);
      if (ldlt.info() != Eigen::Success) {
        sol.converged = false;
        sol.note = "Hessian factorization failed";
        break;
      }
      dir = ldlt.solve(-grad);
      double slope = grad.dot(dir);
      double rel = -slope / (2.0 * std::max(std::abs(E), std::numeric_limits<double>::min()));
      sol.residual = rel;
      if (nfree == 0 || rel <= cfg.tol) {
        stage_done = true;
        break;
      }
      std::vector<double> trial = sol.coef;
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i)
          if (free_index[i] >= 0) trial[i] = sol.coef[i] + alpha * dir[free_index[i]];
        double En = discrete_energy(prob, space, trial, delta);
        if (En <= E + cfg.armijo * alpha * slope) {
          sol.coef = trial;
          sol.trace.push_back({delta, En, rel, alpha});
          accepted = true;
          break;
        }
      }
      ++total;
      if (!accepted) {
        // below roundoff the line search cannot resolve a decrease
        if (rel <= 1e-9) {
          stage_done = true;
        } else {
          sol.converged = false;
          sol.note = "line search failed to decrease the energy";
        }
        break;
      }
    }
    if (!sol.converged) break;
  }
  sol.energy = prob.energy_scale * discrete_energy(prob, space, sol.coef, 0.0);
  return sol;
}

FemField::FemField(const Mesh& mesh, const DiscreteSolution& sol) : mesh_(&mesh), sol_(&sol) {
  nb_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.cells.size()) / 2.0)));
  buckets_.assign(static_cast<std::size_t>(nb_) * nb_, {});
  auto cell_of = [this](double x) {
    return std::clamp(static_cast<int>((x + 1.0) / 2.0 * nb_), 0, nb_ - 1);
  };
  for (std::size_t t = 0; t < mesh.cells.size(); ++t) {
    double x0 = 2.0, x1 = -2.0, y0 = 2.0, y1 = -2.0;
    for (int v : mesh.cells[t]) {
      x0 = std::min(x0, mesh.vertices[v][0]);
      x1 = std::max(x1, mesh.vertices[v][0]);
      y0 = std::min(y0, mesh.vertices[v][1]);
      y1 = std::max(y1, mesh.vertices[v][1]);
    }
    for (int j = cell_of(y0); j <= cell_of(y1); ++j)
      for (int i = cell_of(x0); i <= cell_of(x1); ++i) buckets_[j * nb_ + i].push_back(static_cast<int>(t));
  }
}

int FemField::locate(const Point& x) const {
  if (std::abs(x[0]) > 1.0 || std::abs(x[1]) > 1.0) return -1;
  int i = std::clamp(static_cast<int>((x[0] + 1.0) / 2.0 * nb_), 0, nb_ - 1);
  int j = std::clamp(static_cast<int>((x[1] + 1.0) / 2.0 * nb_), 0, nb_ - 1);
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int t : buckets_[j * nb_ + i]) {
    const auto& c = mesh_->cells[t];
    const auto &p0 = mesh_->vertices[c[0]], &p1 = mesh_->vertices[c[1]], &p2 = mesh_->vertices[c[2]];
    double twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    double l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / twice;
    double l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / twice;
    double lo = std::min({1.0 - l1 - l2, l1, l2});
    if (lo >= 0.0) return t;
    if (lo > best_min) {
      best_min = lo;
      best = t;
    }
  }
  return best_min > -1e-10 ? best : -1;
}

double FemField::operator()(const Point& x) const {
  int t = locate(x);
  if (t < 0) throw std::domain_error("FemField: point outside the mesh");
  const auto& c = mesh_->cells[t];
  const auto &p0 = mesh_->vertices[c[0]], &p1 = mesh_->vertices[c[1]], &p2 = mesh_->vertices[c[2]];
  double twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  double l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / twice;
  double l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / twice;
  double lam[3] = {1.0 - l1 - l2, l1, l2};
  auto d = local_dofs(*mesh_, sol_->space, t);
  double v = 0.0;
  for (int i = 0; i < 3; ++i) {
    double basis = sol_->space == Space::ConformingP1 ? lam[i] : 1.0 - 2.0 * lam[i];
    v += basis * sol_->coef[d[i]];
  }
  return sol_->eta * v;
}

std::vector<GapLevel> gap_ratio(const Integrand& I, double eta, const std::vector<int>& levels,
                                const Grading& grading, const SolverConfig& cfg) {
  const Geometry& g = I.geometry();
  if (g.d != 2) throw std::invalid_argument("gap_ratio: d = 2 only");
  PhiField phi = [&I](const Point& x) { return I.local(x); };
  DataField data = [&g, eta](const Point& x) { return eta * u_eval(g, x); };
  // starting guess vanishes within 1/8 of the contact set and equals the datum beyond 1/4
  DataField cut = [&g, eta](const Point& x) {
    double dist = g.regime == Regime::Super ? std::hypot(x[0], distance1(g.cantor, g.m, x[1]))
                                            : std::hypot(distance1(g.cantor, g.m, x[0]), x[1]);
    double keep = theta(dist * 2.0);
    if (keep == 0.0) return 0.0;
    return eta * keep * u_eval(g, x);
  };
  std::vector<GapLevel> out;
  for (int level : levels) {
    Grading gr = grading;
    gr.regime = g.regime;
    Mesh mesh = build_mesh(level, gr);
    GapLevel L;
    L.level = level;
    L.conf = minimize(mesh, Space::ConformingP1, phi, eta, data, cfg, cut);
    L.noncf = minimize(mesh, Space::NonconformingCR, phi, eta, data, cfg, data);
    L.e_conf = L.conf.energy;
    L.e_noncf = L.noncf.energy;
    L.ratio = L.e_conf / L.e_noncf;
    out.push_back(std::move(L));
  }
  return out;
}

double gradient_norm(const Mesh& mesh, const DiscreteSolution& sol, double s) {
  double acc = 0.0;
  for (std::size_t t = 0; t < mesh.cells.size(); ++t) {
    auto g = cell_gradient(mesh, sol.space, sol.coef, t);
    acc += mesh.area[t] * std::pow(sol.eta * std::hypot(g[0], g[1]), s);
  }
  return std::pow(acc, 1.0 / s);
}

std::vector<double> sample_cantor_points(const CantorSpec& spec, int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out;
  for (int k = 0; k < n; ++k) {
    double a = -0.5;
    for (int j = 0; j < m; ++j)
      if (rng() & 1ULL) a += spec.length(j) - spec.length(j + 1);
    out.push_back(a + u(rng) * spec.length(m));
  }
  return out;
}

ObservableReport observe(const Mesh& mesh, const DiscreteSolution& sol, const Geometry& g,
                         const std::vector<double>& points, const std::vector<double>& exponents) {
  ObservableReport r;
  r.level = mesh.level;
  r.space = sol.space;
  r.energy = sol.energy;
  FemField v(mesh, sol);
  ScalarField field = [&v](const Point& x) { return v(x); };
  if (g.regime != Regime::Super) {
    int big = 0;
    for (double x : points) {
      r.traces.push_back(trace_sample(field, x, 4, 12));
      big += std::abs(r.traces.back().jump) > 0.5 * sol.eta;
    }
    r.jump_fraction = points.empty() ? 0.0 : static_cast<double>(big) / points.size();
  }
  for (double s : exponents) r.norms.push_back({s, gradient_norm(mesh, sol, s)});

  // cells whose oscillation exceeds eta / 4, box-counted over dyadic scales down to the mesh size
  std::vector<std::array<double, 2>> hot;
  double hmin = 2.0;
  for (std::size_t t = 0; t < mesh.cells.size(); ++t) {
    auto gr = cell_gradient(mesh, sol.space, sol.coef, t);
    double diam = std::sqrt(2.0 * mesh.area[t]) * std::sqrt(2.0);
    hmin = std::min(hmin, diam);
    if (std::hypot(gr[0], gr[1]) * diam > 0.25) hot.push_back(mesh.barycenter[t]);
  }
  r.oscillation_cells = static_cast<int>(hot.size());
  std::vector<double> lx, ly;
  for (int k = 1; std::ldexp(1.0, -k) >= 2.0 * hmin; ++k) {
    double eps = std::ldexp(1.0, -k);
    std::set<std::pair<long, long>> boxes;
    for (const auto& p : hot)
      boxes.insert({static_cast<long>(std::floor((p[0] + 1.0) / eps)), static_cast<long>(std::floor((p[1] + 1.0) / eps))});
    if (boxes.empty()) continue;
    lx.push_back(k * std::numbers::ln2);
    ly.push_back(std::log(static_cast<double>(boxes.size())));
  }
  if (lx.size() >= 3) r.oscillation_dimension = fit_line(lx, ly).slope;

  if (g.regime == Regime::Super) {
    // sup of |v(0, x + rho) - v(0, x)| over x in [-1/2, 1/2]
    std::vector<double> lr, lw;
    for (int k = 2; std::ldexp(1.0, -k) >= hmin; ++k) {
      double rho = std::ldexp(1.0, -k), w = 0.0;
      int n = std::max(64, static_cast<int>(4.0 / hmin));
      for (int i = 0; i <= n; ++i) {
        double x = -0.5 + static_cast<double>(i) / n;
        if (x + rho > 1.0) break;
        w = std::max(w, std::abs(v({1e-12, x + rho}) - v({1e-12, x})));
      }
      if (w <= 0.0) continue;
      lr.push_back(std::log(rho));
      lw.push_back(std::log(w));
    }
    if (lr.size() >= 3) r.modulus_exponent = fit_line(lr, lw).slope;
    r.modulus_predicted = g.D;
  }
  return r;
}

void write_mesh(std::ostream& os, const Mesh& m) {
  put(os, kMeshMagic);
  put(os, m.vertices.size());
  put(os, m.cells.size());
  put(os, static_cast<std::uint64_t>(m.level));
  put(os, static_cast<std::uint64_t>(m.grading.extra));
  put(os, static_cast<std::uint64_t>(m.grading.regime));
  put(os, to_word(m.grading.reach));
  for (const auto& v : m.vertices) {
    put(os, to_word(v[0]));
    put(os, to_word(v[1]));
  }
  for (const auto& c : m.cells)
    for (int v : c) put(os, static_cast<std::uint64_t>(v));
}

Mesh read_mesh(std::istream& is) {
  if (get(is) != kMeshMagic) throw std::runtime_error("read_mesh: bad magic");
  Mesh m;
  std::uint64_t nv = get(is), nc = get(is);
  m.level = static_cast<int>(get(is));
  m.grading.extra = static_cast<int>(get(is));
  m.grading.regime = static_cast<Regime>(get(is));
  m.grading.reach = from_word(get(is));
  m.vertices.resize(nv);
  for (auto& v : m.vertices) v = {from_word(get(is)), from_word(get(is))};
  m.cells.resize(nc);
  for (auto& c : m.cells)
    for (int& v : c) {
      std::uint64_t w = get(is);
      if (w >= nv) throw std::runtime_error("read_mesh: vertex index out of range");
      v = static_cast<int>(w);
    }
  finalize(m);
  return m;
}

void write_solution(std::ostream& os, const DiscreteSolution& s) {
  put(os, kSolMagic);
  put(os, static_cast<std::uint64_t>(s.space));
  put(os, s.coef.size());
  put(os, to_word(s.eta));
  put(os, to_word(s.energy_scale));
  put(os, to_word(s.energy));
  put(os, to_word(s.residual));
  put(os, static_cast<std::uint64_t>(s.converged));
  for (double c : s.coef) put(os, to_word(c));
}

DiscreteSolution read_solution(std::istream& is) {
  if (get(is) != kSolMagic) throw std::runtime_error("read_solution: bad magic");
  DiscreteSolution s;
  s.space = static_cast<Space>(get(is));
  std::uint64_t n = get(is);
  s.eta = from_word(get(is));
  s.energy_scale = from_word(get(is));
  s.energy = from_word(get(is));
  s.residual = from_word(get(is));
  s.converged = get(is) != 0;
  s.coef.resize(n);
  for (double& c : s.coef) c = from_word(get(is));
  return s;
}

}  // namespace flab
