#pragma once

#include "fractal/models.hpp"
#include "fractal/riesz.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace flab {

/// Refinement toward the contact set: `extra` double bisections of the cells touching the
/// line x_2 = 0 (Sub) or x_1 = 0 (Super) within |tangential coordinate| <= reach.
struct Grading {
  int extra = 0;
  double reach = 0.75;
  Regime regime = Regime::Sub;
};

/// Conforming triangulation of (-1, 1)^2. Triangle (v0, v1, v2) has its refinement edge v1-v2.
struct Mesh {
  int level = 0;
  Grading grading;
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<std::array<int, 2>> edges;        // sorted vertex pairs
  std::vector<std::array<int, 3>> cell_edges;   // edge opposite local vertex i
  std::vector<std::array<int, 2>> edge_cells;   // -1 marks the boundary side
  std::vector<double> area;
  std::vector<std::array<double, 2>> barycenter;

  std::size_t boundary_edge_count() const;
  double min_edge_on_line() const;  // shortest edge on the graded line
  double min_angle() const;         // smallest interior angle in radians
};

/// Level l: 2^{l+1} squares per side, two right triangles each (2 * 4^{l+1} cells).
/// Throws std::invalid_argument for level > 9 or a shape-regularity violation.
Mesh build_mesh(int level, const Grading& grading = {});

enum class Space { ConformingP1, NonconformingCR };

const char* space_name(Space s);

using PhiField = std::function<LocalPhi(const Point&)>;
using DataField = std::function<double(const Point&)>;

struct SolverConfig {
  double delta0 = 1e-2;
  double delta_factor = 0.25;
  double delta_final = 1e-8;
  double tol = 1e-12;        // relative Newton decrement per stage
  int max_newton = 60;       // per stage
  int max_total = 2000;
  double armijo = 1e-4;

  bool operator==(const SolverConfig&) const = default;
};

struct SolverStep {
  double delta;
  double energy;     // regularized energy after the step
  double decrement;  // relative Newton decrement before the step
  double step;       // accepted line-search length
};

struct DiscreteSolution {
  Space space = Space::ConformingP1;
  double eta = 1.0;
  double energy_scale = 1.0;   // energies are reported as energy_scale * sum |T| phi~
  std::vector<double> coef;    // dof values of w = v / eta
  double energy = 0.0;         // unregularized energy of v = eta w
  double residual = 0.0;       // final relative decrement
  bool converged = false;
  bool budget_exhausted = false;
  std::vector<SolverStep> trace;
  std::string note;
};

/// Cellwise data of the discrete problem.
struct DiscreteProblem {
  const Mesh* mesh = nullptr;
  std::vector<LocalPhi> phi;   // per cell, at the barycentre
  double eta = 1.0;
  double energy_scale = 1.0;
};

DiscreteProblem make_problem(const Mesh& mesh, const PhiField& phi, double eta);

/// Boundary values of the data on the dofs of the space; NaN marks free dofs.
std::vector<double> boundary_values(const Mesh& mesh, Space space, const DataField& g);

/// Discrete energy sum |T| phi(x_T, eta |grad w_T|) with optional regularization delta.
double discrete_energy(const DiscreteProblem& p, Space space, const std::vector<double>& w, double delta = 0.0);

/// Cellwise gradient of w.
std::array<double, 2> cell_gradient(const Mesh& mesh, Space space, const std::vector<double>& w, std::size_t cell);

/// Minimizes the discrete energy with Dirichlet data g (the physical datum; w = v / eta).
/// `initial` supplies the starting interior values (defaults to the interpolated datum).
DiscreteSolution minimize(const Mesh& mesh, Space space, const PhiField& phi, double eta, const DataField& g,
                          const SolverConfig& cfg = {}, const DataField& initial = {});

/// Point evaluation of v = eta w; locates the cell through a bucket grid.
class FemField {
 public:
  FemField(const Mesh& mesh, const DiscreteSolution& sol);
  double operator()(const Point& x) const;
  /// Cell containing x, or -1 outside the square.
  int locate(const Point& x) const;

 private:
  const Mesh* mesh_;
  const DiscreteSolution* sol_;
  int nb_ = 1;
  std::vector<std::vector<int>> buckets_;
};

struct GapLevel {
  int level = 0;
  double e_conf = 0.0;
  double e_noncf = 0.0;
  double ratio = 0.0;  // e_conf / e_noncf
  DiscreteSolution conf;
  DiscreteSolution noncf;
};

/// Both spaces on each level. The conforming run uses the datum with its cut-off near the
/// contact set for the starting guess; boundary values of both data coincide.
std::vector<GapLevel> gap_ratio(const Integrand& I, double eta, const std::vector<int>& levels,
                                const Grading& grading, const SolverConfig& cfg = {});

struct NormSample {
  double s;
  double value;  // || grad v_h ||_{L^s}
};

struct ObservableReport {
  int level = 0;
  Space space = Space::ConformingP1;
  double energy = 0.0;
  std::vector<TraceSample> traces;
  double jump_fraction = 0.0;    // |jump| > eta / 2
  std::vector<NormSample> norms;
  double oscillation_dimension = 0.0;  // box-count slope of high-oscillation cells
  int oscillation_cells = 0;
  double modulus_exponent = 0.0;       // super regime: fitted exponent of the axis modulus
  double modulus_predicted = 0.0;
};

/// Observables of one solution. `points` are the sampled Cantor points.
ObservableReport observe(const Mesh& mesh, const DiscreteSolution& sol, const Geometry& g,
                         const std::vector<double>& points, const std::vector<double>& exponents);

/// n points of the generation-m set: a uniform node, then a uniform position inside it.
std::vector<double> sample_cantor_points(const CantorSpec& spec, int m, int n, std::uint64_t seed);

/// L^s norm of the cellwise gradient of v = eta w.
double gradient_norm(const Mesh& mesh, const DiscreteSolution& sol, double s);

/// Flat little-endian dumps: header (magic, counts, level), then coordinates, incidence,
/// coefficients, all as 64-bit words.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void write_solution(std::ostream& os, const DiscreteSolution& sol);
DiscreteSolution read_solution(std::istream& is);

}  // namespace flab
