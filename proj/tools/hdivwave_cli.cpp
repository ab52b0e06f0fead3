// hdivwave: lumped H(div) solver for u_tt + d u_t - grad div u = 0 on (0,1)^2.
//
//   hdivwave run          one level, energy trace, errors, snapshots
//   hdivwave convergence  error table over several levels
//   hdivwave verify       element and scheme property checks
//   hdivwave export-mesh  write a generated mesh in the plain-text format
//
// Exit status: 0 success, 1 failed assertion or check, 2 bad configuration,
// 3 unstable time step.

#include <hdivwave/hdivwave.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hdivwave;

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kUnstable = 3 };

struct Config {
  std::string mesh_family = "structured-triangle";
  std::string sizing = "diameter";
  std::string levels = "4";
  std::string mesh_file;
  std::string tau = "0.001";
  double final_time = 2.0;
  double damping = 0.0;
  std::string benchmark = "planewave";
  std::string out_dir = "out";
  int snapshot_every = 0;
  bool dump_matrices = false;
  bool assert_rates = false;
  double min_rate = 1.8;
  double perturbation = 0.2;
  std::string output;
  double perturb_beta = 0.0;
};

// "3-6" or "3,4,6" or "5".
std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  if (const auto dash = s.find('-'); dash != std::string::npos) {
    const int a = std::stoi(s.substr(0, dash)), b = std::stoi(s.substr(dash + 1));
    if (a > b) throw Error("empty level range '" + s + "'");
    for (int l = a; l <= b; ++l) out.push_back(l);
  } else {
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const std::size_t comma = std::min(s.find(',', pos), s.size());
      out.push_back(std::stoi(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  for (int l : out)
    if (l < 0) throw Error("levels must be non-negative");
  if (out.empty()) throw Error("no levels given");
  return out;
}

MeshFamily make_family(const Config& cfg) {
  MeshFamily f;
  f.kind = parse_mesh_kind(cfg.mesh_family);
  f.perturbation = cfg.perturbation;
  if (cfg.sizing == "diameter") {
    f.sizing = MeshSizing::diameter;
  } else if (cfg.sizing == "side") {
    f.sizing = MeshSizing::side;
  } else {
    throw Error("unknown sizing '" + cfg.sizing + "' (side or diameter)");
  }
  return f;
}

RunOptions make_options(const Config& cfg) {
  RunOptions opt;
  if (!(cfg.final_time > 0.0)) throw Error("--T must be positive");
  opt.final_time = cfg.final_time;
  opt.damping = cfg.damping;
  opt.snapshot_every = cfg.snapshot_every;
  if (cfg.tau == "auto") {
    opt.tau = 0.0;
  } else {
    opt.tau = std::stod(cfg.tau);
    if (!(opt.tau > 0.0)) throw Error("--tau must be positive or 'auto'");
  }
  return opt;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

void print_table(const std::vector<ErrorReport>& table) {
  std::printf("%12s %14s %14s %10s %10s\n", "h", "energy_err", "discrete_err", "eoc_E", "eoc_D");
  auto rate = [](const std::optional<double>& r) { return r ? std::to_string(*r).substr(0, 6) : std::string("-"); };
  for (const auto& r : table)
    std::printf("%12.6g %14.6e %14.6e %10s %10s\n", r.h, r.energy_error, r.discrete_error, rate(r.eoc_energy).c_str(),
                rate(r.eoc_discrete).c_str());
}

int cmd_run(const Config& cfg) {
  const Benchmark bench = benchmark_by_name(cfg.benchmark);
  const RunOptions opt = make_options(cfg);
  HybridMesh mesh;
  if (!cfg.mesh_file.empty()) {
    mesh = read_mesh_file(cfg.mesh_file);
  } else {
    const auto levels = parse_levels(cfg.levels);
    if (levels.size() != 1) throw Error("run takes a single level; use 'convergence' for several");
    mesh = generate(make_family(cfg), levels.front());
  }
  if (cfg.damping != 0.0 && bench.name == "planewave")
    std::cerr << "note: the plane wave is an exact solution only for d = 0\n";

  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const DofMap dofmap(mesh);
  if (cfg.dump_matrices) {
    auto m = open_out(out / "mass.coo.csv");
    write_coo(m, assemble_lumped_mass(mesh, dofmap).to_sparse());
    auto k = open_out(out / "stiffness.coo.csv");
    write_coo(k, assemble_stiffness(mesh, dofmap).matrix());
  }

  SnapshotHook hook;
  std::optional<PointLocator> locator;
  if (cfg.snapshot_every > 0) {
    fs::create_directories(out / "snapshots");
    locator.emplace(mesh);
    hook = [&](Index step, double, const VectorX& u) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%07ld.csv", static_cast<long>(step));
      auto os = open_out(out / "snapshots" / name);
      write_snapshot(os, mesh, dofmap, *locator, u);
    };
  }

  std::printf("mesh: %ld vertices, %ld cells, %ld edges, %ld dofs (%ld free), h = %g\n",
              static_cast<long>(mesh.num_vertices()), static_cast<long>(mesh.num_cells()),
              static_cast<long>(mesh.num_edges()), static_cast<long>(dofmap.size()),
              static_cast<long>(dofmap.num_free()), mesh.nominal_h());
  const RunResult res = run_benchmark(mesh, bench, opt, hook);
  std::printf("tau = %g (%ld steps), stable bound %g\n", res.tau, static_cast<long>(res.steps), res.stability.tau_max);

  auto energy = open_out(out / "energy.csv");
  write_energy_csv(energy, res.energy);
  auto errors = open_out(out / "errors.csv");
  const ErrorReport& e = res.errors;
  errors << "h,tau,steps,energy_error,velocity_error,div_error,discrete_error\n" << std::setprecision(12);
  errors << e.h << ',' << res.tau << ',' << res.steps << ',' << e.energy_error << ',' << e.velocity_error << ','
         << e.div_error << ',' << e.discrete_error << '\n';
  std::printf("energy error %.6e (velocity %.6e, div %.6e), discrete error %.6e\n", e.energy_error, e.velocity_error,
              e.div_error, e.discrete_error);
  return kOk;
}

int cmd_convergence(const Config& cfg) {
  if (!cfg.mesh_file.empty()) throw Error("convergence generates its meshes; --mesh-file is not accepted");
  const auto levels = parse_levels(cfg.levels);
  const Benchmark bench = benchmark_by_name(cfg.benchmark);
  const RunOptions opt = make_options(cfg);
  const MeshFamily family = make_family(cfg);

  std::vector<ErrorReport> table;
  for (int level : levels) {
    table.push_back(run_benchmark(generate(family, level), bench, opt).errors);
    std::fprintf(stderr, "level %d done\n", level);
  }
  fill_rates(table);
  print_table(table);
  fs::create_directories(cfg.out_dir);
  auto os = open_out(fs::path(cfg.out_dir) / "convergence.csv");
  write_convergence_csv(os, table);

  if (!cfg.assert_rates) return kOk;
  std::vector<std::optional<double>> re, rd;
  for (const auto& r : table) re.push_back(r.eoc_energy), rd.push_back(r.eoc_discrete);
  const auto me = mean_rate(re), md = mean_rate(rd);
  const bool ok = me && md && *me >= cfg.min_rate && *md >= cfg.min_rate;
  std::printf("mean eoc: energy %s, discrete %s (required >= %g): %s\n", me ? std::to_string(*me).c_str() : "-",
              md ? std::to_string(*md).c_str() : "-", cfg.min_rate, ok ? "ok" : "FAILED");
  return ok ? kOk : kFailed;
}

int cmd_verify(const Config& cfg) {
  const double beta = cfg.perturb_beta > 0.0 ? cfg.perturb_beta : 1.0 / 12.0;
  if (cfg.perturb_beta > 0.0) std::printf("triangle vertex weight perturbed to %g\n", beta);
  bool all = true;
  for (const CheckResult& c : run_property_suite(beta)) {
    std::printf("%s  %-24s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.passed;
  }
  return all ? kOk : kFailed;
}

int cmd_export_mesh(const Config& cfg) {
  const auto levels = parse_levels(cfg.levels);
  if (levels.size() != 1) throw Error("export-mesh takes a single level");
  const HybridMesh mesh = generate(make_family(cfg), levels.front());
  const fs::path path = cfg.output.empty() ? fs::path(cfg.out_dir) / "mesh.txt" : fs::path(cfg.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto os = open_out(path);
  write_mesh(os, mesh);
  std::printf("wrote %s (%ld vertices, %ld cells)\n", path.string().c_str(), static_cast<long>(mesh.num_vertices()),
              static_cast<long>(mesh.num_cells()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-lumped H(div) finite elements for the damped wave equation"};
  app.set_config("--config", "", "flat 'key = value' file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  Config cfg;
  app.add_option("--mesh-family", cfg.mesh_family, "structured-triangle | structured-quad | hybrid | perturbed")
      ->capture_default_str();
  app.add_option("--sizing", cfg.sizing, "level l means cell diameter <= 2^-l (diameter) or side 2^-l (side)")
      ->capture_default_str();
  app.add_option("--levels", cfg.levels, "level, list '3,4,5' or range '3-6'")->capture_default_str();
  app.add_option("--mesh-file", cfg.mesh_file, "read the mesh instead of generating it (run only)");
  app.add_option("--tau", cfg.tau, "time step or 'auto' for the estimated stable step")->capture_default_str();
  app.add_option("--T", cfg.final_time, "final time")->capture_default_str();
  app.add_option("--damping", cfg.damping, "damping coefficient d")->capture_default_str();
  app.add_option("--benchmark", cfg.benchmark, "planewave | zero")->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "output directory")->capture_default_str();
  app.add_option("--snapshot-every", cfg.snapshot_every, "write a field snapshot every k steps (0: never)")
      ->capture_default_str();
  app.add_flag("--dump-matrices", cfg.dump_matrices, "write mass and stiffness in coordinate format");
  app.add_flag("--assert", cfg.assert_rates, "fail unless the mean convergence rates reach --min-rate");
  app.add_option("--min-rate", cfg.min_rate, "threshold for --assert")->capture_default_str();
  app.add_option("--perturbation", cfg.perturbation, "vertex jitter of the perturbed family, fraction of the cell side")
      ->capture_default_str();
  app.add_option("--output", cfg.output, "mesh file written by export-mesh (default <out-dir>/mesh.txt)");
  app.add_option("--perturb-beta", cfg.perturb_beta, "verify: replace the triangle vertex weight (negative control)");

  auto* run = app.add_subcommand("run", "solve one benchmark on one mesh");
  auto* conv = app.add_subcommand("convergence", "error table and rates over mesh levels");
  auto* verify = app.add_subcommand("verify", "run the property checks");
  auto* export_mesh = app.add_subcommand("export-mesh", "write a generated mesh");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(cfg);
    if (*conv) return cmd_convergence(cfg);
    if (*verify) return cmd_verify(cfg);
    if (*export_mesh) return cmd_export_mesh(cfg);
  } catch (const StabilityBoundError& e) {
    std::cerr << "error: " << e.what() << "; reduce --tau or use --tau auto\n";
    return kUnstable;
  } catch (const InstabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnstable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
