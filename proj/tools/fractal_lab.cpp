#include "fractal/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"Lavrentiev-gap laboratory: fractal contact sets, energies, traces and finite elements"};
  std::vector<std::string> verbs;
  std::string config_path, space;
  std::string out = "out";
  flab::PipelineOptions opt;
  std::uint64_t seed = 0;
  double tol = 0.0, kappa = 0.0;
  int level = 0;
  unsigned threads = 0;

  std::string verb_list;
  for (const auto& v : flab::verb_names()) verb_list += (verb_list.empty() ? "" : ", ") + v;
  app.add_option("verbs", verbs, "Verbs to run (" + verb_list + "); default: validate check certify minimize observe report")
      ->check(CLI::IsMember(flab::verb_names()));
  app.add_option("--config", config_path, "Instance file (INI); built-in defaults when omitted")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random sample");
  app.add_option("--threads", threads, "Worker cap (0 = all cores)");
  app.add_option("--out", out, "Output directory");
  auto* tol_opt = app.add_option("--tol", tol, "Newton tolerance")->check(CLI::PositiveNumber);
  auto* kappa_opt = app.add_option("--kappa", kappa, "Certificate constant")->check(CLI::PositiveNumber);
  auto* level_opt = app.add_option("--level", level, "Single mesh level")->check(CLI::Range(0, 9));
  auto* space_opt = app.add_option("--space", space, "Finite element space")->check(CLI::IsMember({"conf", "noncf"}));
  CLI11_PARSE(app, argc, argv);

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    opt.config_text = buf.str();
    opt.config_label = config_path;
  } else {
    opt.config_text = flab::serialize_config({});
    opt.config_label = "<defaults>";
  }
  opt.verbs = verbs;
  opt.out = out;
  opt.threads = threads;
  opt.echo = true;
  if (*seed_opt) opt.seed = seed;
  if (*tol_opt) opt.tol = tol;
  if (*kappa_opt) opt.kappa = kappa;
  if (*level_opt) opt.level = level;
  if (*space_opt) opt.space = flab::parse_space(space);

  try {
    flab::RunReport rep = flab::run_pipeline(opt);
    std::cout << "manifest " << (opt.out / "run.manifest").string() << " hash " << rep.manifest_hash << "\n";
    return rep.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
