#pragma once

#include <chrono>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/io.hpp"
#include "rbfcpm/parallel.hpp"
#include "rbfcpm/problems.hpp"
#include "rbfcpm/surfaces.hpp"
#include "rbfcpm/trimesh.hpp"

namespace rbfcpm {

enum ExitCode { exit_ok = 0, exit_failure = 1, exit_diverged = 2, exit_config = 3 };

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  return os;
}

inline FieldDump projected_dump(const Discretization& d, const SolverState& state) {
  FieldDump out;
  out.dim = d.surface->dim();
  out.t = state.t;
  out.points = d.points();
  for (std::size_t c = 0; c < state.fields.size(); ++c) {
    out.names.push_back(state.fields.size() == 2 ? (c == 0 ? "u" : "v") : "u");
    const Vector v = d.P.matrix * state.fields[c];
    out.values.emplace_back(v.data(), v.data() + v.size());
  }
  return out;
}

inline std::shared_ptr<const Surface> surface_for(const RunConfig& cfg) {
  if (cfg.mesh.empty()) return nullptr;
  return std::make_shared<TriMeshSurface>(load_obj(cfg.mesh));
}

inline void write_report(const RunConfig& cfg, const ConvergenceReport& rep) {
  rep.write_csv(std::cout, cfg.timing);
  if (!cfg.out.empty()) {
    auto os = open_output(std::filesystem::path(cfg.out) / "report.csv");
    rep.write_csv(os, cfg.timing);
  }
}

inline int cmd_run(RunConfig cfg) {
  cfg.spec.surface = surface_for(cfg);
  const ExperimentSpec spec = resolve(cfg.spec);
  if (spec.surface->kind() == SurfaceKind::trimesh && spec.problem != ProblemId::gray_scott)
    throw ConfigError("--mesh is only supported for gray_scott");

  const auto start = std::chrono::steady_clock::now();
  const Discretization d = discretize(spec);
  const std::filesystem::path out = cfg.out;
  ProgressCallback progress = [&](const SolverState& st) {
    if (cfg.verbosity > 1) {
      const Vector& u = st.fields.front();
      std::cerr << "t=" << st.t << " step=" << st.step << " min=" << u.minCoeff()
                << " max=" << u.maxCoeff() << '\n';
    }
    if (cfg.dump_every > 0 && !out.empty() && st.step % cfg.dump_every == 0) {
      auto os = open_output(out / ("field_" + std::to_string(st.step) + ".csv"));
      write_field_csv(os, projected_dump(d, st));
    }
  };
  long every = cfg.dump_every;
  if (every == 0 && cfg.verbosity > 1) every = 100;
  RunResult r = run_experiment(spec, d, progress, every);
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ConvergenceReport rep;
  rep.problem = spec.problem;
  rep.rows.push_back(to_row(r));
  write_report(cfg, rep);
  if (cfg.verbosity > 0) {
    std::cerr << to_string(spec.problem) << ": N=" << r.N << " steps=" << r.steps
              << " distinct stencils=" << r.distinct_signatures;
    if (!has_exact_solution(spec.problem))
      std::cerr << " initial[min,max,var]=[" << r.initial.min << ',' << r.initial.max << ','
                << r.initial.variance << "] final=[" << r.final.min << ',' << r.final.max << ','
                << r.final.variance << "] std=" << r.final.stddev();
    std::cerr << '\n';
  }
  if (!out.empty()) {
    const FieldDump dump = projected_dump(d, r.state);
    auto csv = open_output(out / "field.csv");
    write_field_csv(csv, dump);
    auto vtk = open_output(out / "field.vtk");
    write_vtk(vtk, dump);
  }
  return exit_ok;
}

inline int cmd_converge(RunConfig cfg) {
  if (cfg.levels.empty()) throw ConfigError("converge needs --levels");
  check_halving(cfg.levels);
  cfg.spec.surface = surface_for(cfg);
  const ExperimentSpec spec = resolve(cfg.spec);
  const ConvergenceReport rep = convergence_study(spec, cfg.levels);
  write_report(cfg, rep);
  for (const auto& row : rep.rows)
    if (!row.failure.empty()) std::cerr << "dx=" << row.dx << " failed: " << row.failure << '\n';
  if (spec.surface->kind() != SurfaceKind::trimesh) {
    std::cout << "# tube size vs classical closest point method (degree 3)\n";
    std::cout << "# dx,N_rbf,N_classical,reduction\n";
    for (double dx : cfg.levels) {
      const TubeComparison c = compare_tube_sizes(*spec.surface, dx, spec.m, 3, spec.alignment);
      std::cout << "# " << dx << ',' << c.rbf_nodes << ',' << c.classical_nodes << ','
                << c.reduction() << '\n';
    }
  }
  for (const auto& row : rep.rows)
    if (!row.failure.empty()) return exit_failure;
  return exit_ok;
}

inline int cmd_spectrum(const RunConfig& cfg) {
  const ExperimentSpec& s = cfg.spec;
  const int m = s.m == 0 ? 13 : s.m;
  const SpectrumResult r = spectrum_check(s.dx, m, cfg.spectrum_dt, s.eps, s.alignment);
  std::cout << std::setprecision(17) << "N=" << r.N << "\nradius(P+dtW)=" << r.radius_projection
            << "\nradius(I+dtW)=" << r.radius_identity << '\n';
  if (!cfg.out.empty()) {
    auto os = open_output(std::filesystem::path(cfg.out) / "eigenvalues.csv");
    os << std::setprecision(17) << "re_P,im_P,re_I,im_I\n";
    for (Eigen::Index i = 0; i < r.eig_projection.size(); ++i)
      os << r.eig_projection[i].real() << ',' << r.eig_projection[i].imag() << ','
         << r.eig_identity[i].real() << ',' << r.eig_identity[i].imag() << '\n';
  }
  return exit_ok;
}

inline int cmd_mesh_info(const RunConfig& cfg, int icosphere) {
  TriMesh mesh;
  if (icosphere >= 0) {
    mesh = make_icosphere(icosphere, 1.0);
    if (!cfg.out.empty()) {
      auto os = open_output(cfg.out);
      write_obj(os, mesh);
    }
  } else {
    if (cfg.mesh.empty()) throw ConfigError("mesh-info needs --mesh or --icosphere");
    mesh = load_obj(cfg.mesh);
  }
  const Box b = mesh.bounding_box();
  std::cout << "vertices=" << mesh.vertices().size() << "\ntriangles=" << mesh.triangles().size()
            << "\ndropped_degenerate=" << mesh.dropped_degenerate() << "\nbbox=[" << b.lo[0]
            << ',' << b.lo[1] << ',' << b.lo[2] << "]..[" << b.hi[0] << ',' << b.hi[1] << ','
            << b.hi[2] << "]\n";
  return exit_ok;
}

}  // namespace detail

/// Entry point of the rbfcpm tool; returns the process exit code.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"RBF-FD closest point method solver"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  ConfigMap flags;
  int icosphere = -1;

  // Flags share names with config keys ('-' instead of '_').
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    const std::vector<std::pair<std::string, std::string>> opts = {
        {"problem", "problem id"},
        {"dx", "grid spacing"},
        {"levels", "comma separated grid spacings, each half the previous"},
        {"m", "stencil size"},
        {"eps", "Gaussian shape parameter"},
        {"dt_rule", "diffusive:C, advective:C or scaled:C"},
        {"t_final", "final time"},
        {"seed", "random seed"},
        {"mesh", "OBJ mesh (gray_scott)"},
        {"out", "output directory"},
        {"threads", "worker threads"},
        {"dump_every", "field dump cadence in steps"},
        {"F", "Gray-Scott feed rate"},
        {"k", "Gray-Scott kill rate"},
        {"Du", "Gray-Scott diffusion of u"},
        {"Dv", "Gray-Scott diffusion of v"},
        {"lambda", "Perona-Malik edge threshold"},
        {"steps", "Perona-Malik step count"},
        {"noise", "Perona-Malik noise level"},
        {"decay", "advection-diffusion decay: squared or printed"},
        {"alignment", "lattice alignment: cell or node"},
        {"verbosity", "0, 1 or 2"},
        {"timing", "write runtimes (true/false)"},
        {"dt", "time step for the spectrum command"},
    };
    for (const auto& [key, help] : opts) {
      std::string flag = "--" + key;
      for (char& c : flag)
        if (c == '_') c = '-';
      sub->add_option_function<std::string>(
          flag, [&flags, key = key](const std::string& v) { flags[key] = v; }, help);
    }
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  CLI::App* converge = app.add_subcommand("converge", "grid refinement study");
  CLI::App* spectrum = app.add_subcommand("spectrum", "eigenvalues of P + dt W and I + dt W");
  CLI::App* mesh_info = app.add_subcommand("mesh-info", "summarize or generate a mesh");
  for (CLI::App* sub : {run, converge, spectrum, mesh_info}) add_common(sub);
  mesh_info->add_option("--icosphere", icosphere, "write a unit icosphere with this subdivision");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    RunConfig cfg;
    if (spectrum->parsed()) cfg.spec.dx = 0.025;
    ConfigMap merged = config_path.empty() ? ConfigMap{} : read_config_file(config_path);
    for (const auto& [k, v] : flags) merged[k] = v;
    apply_config(merged, cfg);
    set_thread_count(cfg.threads);
    if (run->parsed()) return detail::cmd_run(cfg);
    if (converge->parsed()) return detail::cmd_converge(cfg);
    if (spectrum->parsed()) return detail::cmd_spectrum(cfg);
    return detail::cmd_mesh_info(cfg, icosphere);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return exit_config;
  } catch (const UnsupportedStencilSize& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const Diverged& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return exit_diverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace rbfcpm
