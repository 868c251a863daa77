// Command-line driver: prodisc <mode> --config <path> [options].
#include <iostream>

#include <CLI11.hpp>

#include "prodisc/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Discrete projective-minimal and Demoulin lattices: evolution, envelopes, transforms, checks"};
  prodisc::RunOptions o;
  double tol = 0, lambda = 0, lambda0 = 0;
  uint64_t seed = 0;
  app.add_option("mode", o.mode, "evolve | demoulin | tzitzeica | envelopes | backlund | verify | limit | export")
      ->required()
      ->check(CLI::IsMember(prodisc::known_modes()));
  app.add_option("--config", o.config_path, "JSON run configuration")->required();
  app.add_option("--out", o.out_dir, "output directory (default: current directory)");
  auto* t = app.add_option("--tol", tol, "residual tolerance");
  auto* s = app.add_option("--seed", seed, "random seed");
  auto* l = app.add_option("--lambda", lambda, "spectral / scaling parameter");
  auto* l0 = app.add_option("--lambda0", lambda0, "eigenfunction parameter for the transform");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*t) o.tol = tol;
  if (*s) o.seed = seed;
  if (*l) o.lambda = lambda;
  if (*l0) o.lambda0 = lambda0;

  prodisc::RunArtifacts a;
  int code;
  try {
    code = prodisc::run(o, &a);
  } catch (const prodisc::Error& e) {
    std::cerr << "prodisc: " << e.what() << "\n";
    return prodisc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "prodisc: " << e.what() << "\n";
    return 1;
  }
  const auto& r = a.report;
  for (const auto& c : r.checks)
    std::cout << (c.passed() ? "ok   " : "FAIL ") << c.name << "  max " << c.stat.max
              << (c.gating ? "" : "  (diagnostic)") << "\n";
  if (r.error) std::cerr << "prodisc: " << r.error->what() << "\n";
  if (a.mesh && !a.mesh->skipped.empty())
    std::cerr << "prodisc: warning: " << a.mesh->skipped.size() << " vertices skipped (chart coordinate vanishes)\n";
  return code;
}
