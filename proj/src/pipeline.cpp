#include "fractal/pipeline.hpp"

#include "fractal/energy.hpp"
#include "fractal/quadrature.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

namespace flab {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

struct VerbFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Csv {
 public:
  explicit Csv(std::string header) { text_ = header + "\n"; }
  template <class... T>
  void row(const T&... cells) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + cell(cells)), ...);
    text_ += line + "\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& s) { return one_line(s); }
  static std::string cell(const char* s) { return one_line(s); }
};

struct State {
  const PipelineOptions& opt;
  InstanceConfig config;
  std::unique_ptr<Geometry> geometry;
  std::unique_ptr<Integrand> integrand;
  AssumptionCertificate certificate;
  VerbRecord* current = nullptr;

  explicit State(const PipelineOptions& o) : opt(o) {}

  EnergyOptions energy_options() const {
    EnergyOptions e;
    e.k_max = config.k_max;
    e.order = config.order;
    return e;
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream f(opt.out / name, std::ios::binary);
    f << bytes;
    if (!f) throw VerbFailure("cannot write " + (opt.out / name).string());
    current->files.push_back(name);
  }

  void say(const std::string& line) const {
    if (opt.echo) std::cout << line << "\n";
  }

  const Geometry& geo() const { return *geometry; }
  const Integrand& integ() const { return *integrand; }
};

std::string mesh_file(int level) { return "mesh_L" + std::to_string(level) + ".bin"; }
std::string solution_file(int level, Space s) {
  return "solution_L" + std::to_string(level) + "_" + space_name(s) + ".bin";
}

std::string verb_validate(State& st) {
  try {
    st.config = parse_config(st.opt.config_text);
  } catch (const ConfigError& e) {
    throw VerbFailure(std::string("parse error: ") + e.what());
  }
  InstanceConfig& c = st.config;
  if (st.opt.seed) c.seed = *st.opt.seed;
  if (st.opt.tol) c.solver.tol = *st.opt.tol;
  if (st.opt.kappa) c.kappa = *st.opt.kappa;
  if (st.opt.level) c.levels = {*st.opt.level};
  if (st.opt.space) c.space = *st.opt.space;
  try {
    st.geometry = std::make_unique<Geometry>(c.geometry());
    st.integrand = std::make_unique<Integrand>(*st.geometry, c.model);
  } catch (const std::invalid_argument& e) {
    throw VerbFailure(e.what());
  }
  Csv csv("name,inequality,pass,detail");
  int failed = 0;
  for (const auto& v : validate_config(c)) {
    csv.row(v.name, v.inequality, v.pass, v.detail);
    st.say(std::string(v.pass ? "PASS " : "FAIL ") + v.name + ": " + v.detail);
    failed += !v.pass;
  }
  st.write("validate.csv", csv.text());
  st.write("instance.ini", serialize_config(c));
  if (failed) throw VerbFailure(std::to_string(failed) + " hypothesis window(s) violated");
  return "all hypothesis windows hold";
}

std::string verb_check(State& st) {
  const Geometry& g = st.geo();
  Csv csv("item,value,verdict");
  if (g.cantor.kind() == CantorKind::LambdaGamma) {
    BoxCount bc = boxcount_dimension(CantorSpec::build(g.cantor.kind(), g.cantor.lambda(), g.cantor.gamma()),
                                     st.config.box_m_max);
    csv.row("box_dimension", bc.dimension, bc.ill_conditioned ? "ill_conditioned" : "ok");
    csv.row("dimension", g.cantor.dimension(), "closed_form");
  }
  csv.row("mu_mass", measure_box(g.cantor, g.m, std::vector<double>(g.cantor.power(), -1.0),
                                 std::vector<double>(g.cantor.power(), 1.0)),
          "exact");
  Mc1Result r = check_mc1(st.integ(), st.energy_options());
  csv.row("F(u)", r.fu.value, convergence_name(r.fu.verdict));
  csv.row("F*(b)", r.fb.value, convergence_name(r.fb.verdict));
  st.write("check.csv", csv.text());
  st.say(std::string("F(u) ") + convergence_name(r.fu.verdict) + ", F*(b) " + convergence_name(r.fb.verdict));
  if (!r.holds) throw VerbFailure("finite-modular assumption not established");
  return "F(u) = " + num(r.fu.value) + ", F*(b) = " + num(r.fb.value);
}

std::string verb_certify(State& st) {
  AssumptionCertificate c = find_certificate(st.integ(), st.config.kappa, st.energy_options());
  st.certificate = c;
  Csv csv("kappa,issued,eta,s,sigma,epsilon,f_u,f_b,slack,recheck_slack,recheck_ok,trials,note");
  csv.row(c.kappa, c.issued, c.eta, c.s, c.sigma, c.epsilon, c.f_u, c.f_b, c.slack, c.recheck_slack, c.recheck_ok,
          c.trials, c.note);
  st.write("certificate.csv", csv.text());
  if (!c.issued) throw VerbFailure("no certificate within budget: " + c.note);
  if (!c.recheck_ok) throw VerbFailure("re-check at doubled order lost the slack");
  return "eta = " + num(c.eta) + ", s = " + num(c.s) + ", slack = " + num(c.slack);
}

std::string verb_energy(State& st) {
  Csv shells("field,k,contribution");
  Csv summary("field,value,tail,verdict,note");
  std::string detail;
  for (Field f : {Field::GradU, Field::B}) {
    EnergyReport r = modular(st.integ(), f, 1.0, st.energy_options());
    for (std::size_t i = 0; i < r.shells.size(); ++i)
      shells.row(field_name(f), static_cast<int>(i) + st.energy_options().k0, r.shells[i]);
    summary.row(field_name(f), r.value, r.tail, convergence_name(r.verdict), r.note);
    detail += std::string(detail.empty() ? "" : ", ") + field_name(f) + " " + convergence_name(r.verdict);
  }
  st.write("energy_shells.csv", shells.text());
  st.write("energy.csv", summary.text());
  return detail;
}

std::string verb_meyers(State& st) {
  const Geometry& g = st.geo();
  TestOrlicz psi{g.p0, st.config.meyers_delta};
  MeyersSeries s;
  if (g.regime == Regime::Sub) s = meyers_trend_sub(g, psi);
  else if (g.regime == Regime::Super) s = meyers_trend_super(g, psi);
  else throw VerbFailure("no Meyers test for the matching regime");
  Csv csv("x,G");
  for (std::size_t i = 0; i < s.x.size(); ++i) csv.row(s.x[i], s.g[i]);
  st.write("meyers.csv", csv.text());
  return std::string("trend ") + trend_name(s.trend) + ", slope " + num(s.slope) + " (predicted " +
         num(s.predicted) + ")";
}

std::string verb_traces(State& st) {
  const Geometry& g = st.geo();
  if (g.regime != Regime::Sub || g.d != 2) throw VerbFailure("traces need the planar sub regime");
  ScalarField v = [&g](const Point& x) { return u_eval(g, x); };
  auto pts = sample_cantor_points(g.cantor, g.m, st.config.trace_points, st.config.seed);
  Csv csv("xbar,r,plus,minus,jump");
  int cauchy = 0;
  std::vector<TraceSample> samples(pts.size());
  parallel_map(pts.size(), [&](std::size_t i) {
    samples[i] = trace_sample(v, pts[i]);
    return 0.0;
  });
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < s.plus.averages.size(); ++k)
      csv.row(s.xbar, std::ldexp(1.0, -static_cast<int>(k) - 4), s.plus.averages[k], s.minus.averages[k],
              s.plus.averages[k] - s.minus.averages[k]);
    csv.row(s.xbar, 0.0, s.plus.value, s.minus.value, s.jump);
    cauchy += s.plus.cauchy && s.minus.cauchy;
  }
  st.write("traces.csv", csv.text());
  return std::to_string(cauchy) + "/" + std::to_string(samples.size()) + " samples Cauchy on both sides";
}

std::string verb_chain(State& st) {
  const Geometry& g = st.geo();
  ScalarField v = [&g](const Point& x) { return u_eval(g, x); };
  ChainSample c;
  try {
    c = chain_sums(g, v, st.config.chain_m, 1.0);
  } catch (const std::invalid_argument& e) {
    throw VerbFailure(e.what());
  }
  Csv csv("m,j,left,right");
  for (std::size_t j = 0; j < c.left.size(); ++j) csv.row(c.m, static_cast<int>(j + 1), c.left[j], c.right[j]);
  st.write("chain.csv", csv.text());
  Csv sum("m,across,gaps,gaps_signed,boundary_jump,residual,seam,consistent");
  sum.row(c.m, c.across, c.gaps, c.gaps_signed, c.boundary_jump, c.residual, c.seam, c.consistent);
  st.write("chain_summary.csv", sum.text());
  if (!c.consistent) throw VerbFailure("telescoping residual " + num(c.residual));
  return "S = " + num(c.across) + ", residual " + num(c.residual);
}

std::string verb_bfield(State& st) {
  const Geometry& g = st.geo();
  if (g.regime != Regime::Sub || g.d != 2) throw VerbFailure("the separating field needs the planar sub regime");
  std::vector<Point> pts;
  for (int i = -3; i <= 3; ++i)
    for (double y : {-0.5, -0.25, -0.125, 0.125, 0.25, 0.5}) pts.push_back({0.25 * i, y});
  std::vector<std::array<double, 2>> b(pts.size());
  parallel_map(pts.size(), [&](std::size_t i) {
    b[i] = vector_field_b(g, pts[i]);
    return 0.0;
  });
  Csv csv("x1,x2,b1,b2");
  for (std::size_t i = 0; i < pts.size(); ++i) csv.row(pts[i][0], pts[i][1], b[i][0], b[i][1]);
  st.write("bfield.csv", csv.text());
  return std::to_string(pts.size()) + " points";
}

PhiField phi_of(const Integrand& I) {
  return [&I](const Point& x) { return I.local(x); };
}

std::string verb_minimize(State& st) {
  const Geometry& g = st.geo();
  if (g.d != 2) throw VerbFailure("finite elements are planar");
  double eta = st.certificate.eta;
  DataField data = [&g, eta](const Point& x) { return eta * u_eval(g, x); };
  Csv csv("level,space,cells,dofs,energy,residual,converged,newton_steps,note");
  int failed = 0;
  for (int level : st.config.levels) {
    Mesh mesh = build_mesh(level, st.config.grading());
    DiscreteSolution sol = minimize(mesh, st.config.space, phi_of(st.integ()), eta, data, st.config.solver);
    std::ostringstream ms, ss;
    write_mesh(ms, mesh);
    write_solution(ss, sol);
    st.write(mesh_file(level), ms.str());
    st.write(solution_file(level, sol.space), ss.str());
    csv.row(level, space_name(sol.space), mesh.cells.size(), sol.coef.size(), sol.energy, sol.residual,
            sol.converged, sol.trace.size(), sol.note);
    st.say("level " + std::to_string(level) + " " + space_name(sol.space) + " energy " + num(sol.energy) +
           (sol.converged ? "" : " (not converged: " + sol.note + ")"));
    failed += !sol.converged;
  }
  st.write("minimize.csv", csv.text());
  if (failed) throw VerbFailure(std::to_string(failed) + " level(s) did not converge");
  return std::to_string(st.config.levels.size()) + " level(s) converged";
}

std::string verb_gap(State& st) {
  auto levels = gap_ratio(st.integ(), st.certificate.eta, st.config.levels, st.config.grading(), st.config.solver);
  Csv csv("level,e_conf,e_noncf,ratio,conf_converged,noncf_converged");
  bool ok = true;
  std::string detail = "ratios";
  for (const auto& L : levels) {
    csv.row(L.level, L.e_conf, L.e_noncf, L.ratio, L.conf.converged, L.noncf.converged);
    ok = ok && L.conf.converged && L.noncf.converged && L.e_noncf <= L.e_conf;
    detail += " " + num(L.ratio);
  }
  st.write("gap.csv", csv.text());
  if (!ok) throw VerbFailure("solver failure or E_noncf > E_conf; " + detail);
  return detail;
}

std::string verb_observe(State& st) {
  const Geometry& g = st.geo();
  std::vector<double> pts;
  if (g.regime == Regime::Sub) pts = sample_cantor_points(g.cantor, g.m, st.config.trace_points, st.config.seed);
  auto ex = st.config.exponents();
  std::string header = "level,space,energy,jump_fraction,oscillation_dimension,oscillation_cells,modulus_exponent,modulus_predicted";
  for (double s : ex) header += ",grad_norm_" + num(s);
  std::string body;
  Csv traces("level,xbar,plus,minus,jump");
  for (int level : st.config.levels) {
    std::ifstream mf(st.opt.out / mesh_file(level), std::ios::binary);
    std::ifstream sf(st.opt.out / solution_file(level, st.config.space), std::ios::binary);
    if (!mf || !sf) throw VerbFailure("stored solution for level " + std::to_string(level) + " not found");
    Mesh mesh = read_mesh(mf);
    DiscreteSolution sol = read_solution(sf);
    ObservableReport r = observe(mesh, sol, g, pts, ex);
    std::string line = std::to_string(level) + "," + space_name(r.space) + "," + num(r.energy) + "," +
                       num(r.jump_fraction) + "," + num(r.oscillation_dimension) + "," +
                       std::to_string(r.oscillation_cells) + "," + num(r.modulus_exponent) + "," +
                       num(r.modulus_predicted);
    for (const auto& n : r.norms) line += "," + num(n.value);
    body += line + "\n";
    for (const auto& t : r.traces) traces.row(level, t.xbar, t.plus.value, t.minus.value, t.jump);
    st.say("level " + std::to_string(level) + " jump fraction " + num(r.jump_fraction));
  }
  st.write("observe.csv", header + "\n" + body);
  st.write("observe_traces.csv", traces.text());
  return std::to_string(st.config.levels.size()) + " level(s) observed";
}

const std::vector<std::vector<int>>& dependencies() {
  // indices into verb_names()
  static const std::vector<std::vector<int>> deps = {
      {}, {0}, {1}, {0}, {0}, {0}, {0}, {0}, {2}, {2}, {8}, {},
  };
  return deps;
}

}  // namespace

const std::vector<std::string>& verb_names() {
  static const std::vector<std::string> v = {"validate", "check",  "certify",  "energy", "meyers",  "traces",
                                             "chain",    "bfield", "minimize", "gap",    "observe", "report"};
  return v;
}

const std::vector<std::string>& default_verbs() {
  static const std::vector<std::string> v = {"validate", "check", "certify", "minimize", "observe", "report"};
  return v;
}

const char* status_name(VerbStatus s) {
  switch (s) {
    case VerbStatus::Pass: return "pass";
    case VerbStatus::Fail: return "fail";
    case VerbStatus::Skipped: return "skipped";
  }
  return "?";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunReport run_pipeline(const PipelineOptions& opt) {
  const auto& names = verb_names();
  std::vector<std::string> requested = opt.verbs.empty() ? default_verbs() : opt.verbs;
  std::vector<bool> wanted(names.size(), false);
  std::function<void(int)> want = [&](int i) {
    if (wanted[i]) return;
    wanted[i] = true;
    for (int d : dependencies()[i]) want(d);
  };
  for (const auto& v : requested) {
    auto it = std::find(names.begin(), names.end(), v);
    if (it == names.end()) throw std::invalid_argument("unknown verb '" + v + "'");
    want(static_cast<int>(it - names.begin()));
  }
  if (opt.threads) set_thread_cap(opt.threads);
  std::filesystem::create_directories(opt.out);

  using Fn = std::string (*)(State&);
  static const Fn fns[] = {verb_validate, verb_check,  verb_certify,  verb_energy, verb_meyers, verb_traces,
                           verb_chain,    verb_bfield, verb_minimize, verb_gap,    verb_observe, nullptr};
  State st(opt);
  RunReport rep;
  std::vector<VerbStatus> status(names.size(), VerbStatus::Skipped);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!wanted[i]) continue;
    VerbRecord rec;
    rec.verb = names[i];
    bool blocked = false;
    for (int d : dependencies()[i]) blocked = blocked || status[d] != VerbStatus::Pass;
    if (blocked) {
      rec.detail = "prerequisite failed";
      rep.records.push_back(rec);
      continue;
    }
    auto t0 = std::chrono::steady_clock::now();
    st.current = &rec;
    if (fns[i] == nullptr) {
      Csv csv("verb,status,detail");
      for (const auto& r : rep.records) csv.row(r.verb, status_name(r.status), r.detail);
      st.write("summary.csv", csv.text());
      rec.status = VerbStatus::Pass;
      rec.detail = std::to_string(rep.records.size()) + " earlier record(s)";
    } else {
      try {
        rec.detail = fns[i](st);
        rec.status = VerbStatus::Pass;
      } catch (const std::exception& e) {
        rec.status = VerbStatus::Fail;
        rec.detail = e.what();
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    status[i] = rec.status;
    st.say(rec.verb + ": " + status_name(rec.status) + " (" + one_line(rec.detail) + ")");
    rep.records.push_back(std::move(rec));
  }

  rep.exit_code = 0;
  for (const auto& r : rep.records)
    if (r.status != VerbStatus::Pass) {
      rep.exit_code = 10 + static_cast<int>(std::find(names.begin(), names.end(), r.verb) - names.begin());
      break;
    }

  auto& m = rep.manifest;
  m["config.label"] = opt.config_label;
  m["config.checksum"] = fnv1a_hex(opt.config_text);
  m["run.seed"] = std::to_string(st.config.seed);
  m["run.version"] = "fractal-lab 1.0.0";
  std::string req;
  for (const auto& v : requested) req += (req.empty() ? "" : " ") + v;
  m["run.verbs"] = req;
  m["run.exit_code"] = std::to_string(rep.exit_code);
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const auto& r = rep.records[i];
    char idx[8];
    std::snprintf(idx, sizeof idx, "%02zu", i);
    std::string key = std::string("verb.") + idx + "." + r.verb;
    m[key + ".status"] = status_name(r.status);
    m[key + ".detail"] = one_line(r.detail);
    m["time." + r.verb] = num(std::round(r.seconds * 1000.0) / 1000.0);
    for (const auto& f : r.files) {
      std::ifstream in(opt.out / f, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      m["file." + f] = fnv1a_hex(buf.str());
    }
  }
  std::string hashed;
  for (const auto& [k, v] : m)
    if (k.rfind("time.", 0) != 0) hashed += k + " = " + v + "\n";
  rep.manifest_hash = fnv1a_hex(hashed);
  m["manifest.hash"] = rep.manifest_hash;
  std::ofstream mf(opt.out / "run.manifest", std::ios::binary);
  for (const auto& [k, v] : m) mf << k << " = " << v << "\n";
  return rep;
}

}  // namespace flab
