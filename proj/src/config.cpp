#include "fractal/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace flab {

ConfigError::ConfigError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
  return out;
}

template <class T, class F>
std::vector<T> split(const std::string& s, F f) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(f(item));
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const InstanceConfig&)> get;
  std::function<void(InstanceConfig&, const std::string&)> set;
};

#define DOUBLE_KEY(sec, name, member)                                         \
  Key {                                                                       \
    sec, name, [](const InstanceConfig& c) { return fmt_double(c.member); }, \
        [](InstanceConfig& c, const std::string& v) { c.member = to_double(v); } \
  }
#define INT_KEY(sec, name, member)                                                 \
  Key {                                                                            \
    sec, name, [](const InstanceConfig& c) { return std::to_string(c.member); },  \
        [](InstanceConfig& c, const std::string& v) {                              \
          c.member = static_cast<decltype(c.member)>(to_int(v));                   \
        }                                                                          \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"", "version", [](const InstanceConfig& c) { return std::to_string(c.version); },
          [](InstanceConfig& c, const std::string& v) {
            c.version = static_cast<int>(to_int(v));
            if (c.version != 1) throw std::invalid_argument("unsupported version " + v);
          }},
      Key{"geometry", "regime", [](const InstanceConfig& c) { return std::string(regime_name(c.regime)); },
          [](InstanceConfig& c, const std::string& v) { c.regime = parse_regime(v); }},
      INT_KEY("geometry", "d", d),
      DOUBLE_KEY("geometry", "p0", p0),
      DOUBLE_KEY("geometry", "gamma", gamma),
      INT_KEY("geometry", "m", m),
      INT_KEY("cantor", "box_m_max", box_m_max),
      INT_KEY("cantor", "law_samples", law_samples),
      Key{"model", "family", [](const InstanceConfig& c) { return std::string(family_name(c.model.family)); },
          [](InstanceConfig& c, const std::string& v) { c.model.family = parse_family(v); }},
      DOUBLE_KEY("model", "q", model.q),
      DOUBLE_KEY("model", "alpha", model.alpha),
      DOUBLE_KEY("model", "beta", model.beta),
      DOUBLE_KEY("model", "kappa", model.kappa),
      DOUBLE_KEY("model", "epsilon", model.epsilon),
      DOUBLE_KEY("model", "p_minus", model.p_minus),
      DOUBLE_KEY("model", "p_plus", model.p_plus),
      INT_KEY("quadrature", "k_max", k_max),
      INT_KEY("quadrature", "order", order),
      Key{"run", "seed", [](const InstanceConfig& c) { return std::to_string(c.seed); },
          [](InstanceConfig& c, const std::string& v) {
            long long s = to_int(v);
            if (s < 0) throw std::invalid_argument("seed must be nonnegative");
            c.seed = static_cast<std::uint64_t>(s);
          }},
      DOUBLE_KEY("run", "kappa", kappa),
      DOUBLE_KEY("run", "meyers_delta", meyers_delta),
      INT_KEY("run", "bumps", bumps),
      INT_KEY("run", "trace_points", trace_points),
      INT_KEY("run", "chain_m", chain_m),
      Key{"fem", "levels",
          [](const InstanceConfig& c) { return join(c.levels, [](int l) { return std::to_string(l); }); },
          [](InstanceConfig& c, const std::string& v) {
            c.levels = split<int>(v, [](const std::string& s) { return static_cast<int>(to_int(s)); });
          }},
      INT_KEY("fem", "grading_extra", grading_extra),
      DOUBLE_KEY("fem", "grading_reach", grading_reach),
      Key{"fem", "space", [](const InstanceConfig& c) { return std::string(space_name(c.space)); },
          [](InstanceConfig& c, const std::string& v) { c.space = parse_space(v); }},
      Key{"fem", "norm_exponents", [](const InstanceConfig& c) { return join(c.norm_exponents, fmt_double); },
          [](InstanceConfig& c, const std::string& v) { c.norm_exponents = split<double>(v, to_double); }},
      DOUBLE_KEY("solver", "delta0", solver.delta0),
      DOUBLE_KEY("solver", "delta_factor", solver.delta_factor),
      DOUBLE_KEY("solver", "delta_final", solver.delta_final),
      DOUBLE_KEY("solver", "tol", solver.tol),
      INT_KEY("solver", "max_newton", solver.max_newton),
      INT_KEY("solver", "max_total", solver.max_total),
      DOUBLE_KEY("solver", "armijo", solver.armijo),
  };
  return table;
}

#undef DOUBLE_KEY
#undef INT_KEY

}  // namespace

Regime parse_regime(const std::string& s) {
  for (Regime r : {Regime::Sub, Regime::Matching, Regime::Super})
    if (s == regime_name(r)) return r;
  throw std::invalid_argument("unknown regime '" + s + "'");
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::DoublePhase, Family::BorderlineDoublePhase, Family::PiecewiseVarExp, Family::ContinuousVarExp})
    if (s == family_name(f)) return f;
  throw std::invalid_argument("unknown family '" + s + "'");
}

Space parse_space(const std::string& s) {
  for (Space sp : {Space::ConformingP1, Space::NonconformingCR})
    if (s == space_name(sp)) return sp;
  throw std::invalid_argument("unknown space '" + s + "' (expected conf or noncf)");
}

Geometry InstanceConfig::geometry() const { return Geometry::make(regime, d, p0, gamma, m); }

Grading InstanceConfig::grading() const { return Grading{grading_extra, grading_reach, regime}; }

std::vector<double> InstanceConfig::exponents() const {
  if (!norm_exponents.empty()) return norm_exponents;
  return {p0 - 0.1, p0 + 0.25};
}

InstanceConfig parse_config(const std::string& text) {
  InstanceConfig c;
  std::map<std::string, const Key*> lookup;
  std::set<std::string> sections;
  for (const auto& k : keys()) {
    lookup[std::string(k.section) + "." + k.name] = &k;
    sections.insert(k.section);
  }
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty() || !sections.count(section)) throw ConfigError(line, "unknown section [" + section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    std::string name = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (name.empty()) throw ConfigError(line, "missing key");
    std::string full = section + "." + name;
    auto it = lookup.find(full);
    if (it == lookup.end())
      throw ConfigError(line, "unknown key '" + name + "'" + (section.empty() ? "" : " in [" + section + "]"));
    if (!seen.insert(full).second) throw ConfigError(line, "duplicate key '" + name + "'");
    try {
      it->second->set(c, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line, std::string(name) + ": " + e.what());
    }
  }
  if (c.levels.empty()) throw ConfigError(0, "fem.levels must list at least one level");
  return c;
}

std::string serialize_config(const InstanceConfig& c) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      section = k.section;
      out += "\n[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(c) + "\n";
  }
  return out;
}

std::vector<Verdict> validate_config(const InstanceConfig& c) {
  Geometry g = c.geometry();
  std::vector<Verdict> out = theorem_windows(g, c.model);
  for (auto& v : finiteness_windows(g, c.model)) out.push_back(std::move(v));
  return out;
}

}  // namespace flab
