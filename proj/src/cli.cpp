#include "aet/cli.hpp"

#include "aet/config.hpp"
#include "aet/io.hpp"
#include "aet/metrics.hpp"
#include "aet/phantom.hpp"
#include "aet/reconstruction.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

namespace aet::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "aet 1.0.0";

fs::path data_file(const fs::path& dir, int flux) { return dir / ("data_f" + std::to_string(flux) + ".aet"); }

ExperimentConfig load_experiment(const std::string& config_path, const std::vector<std::string>& overrides,
                                 int threads) {
  KeyValueConfig kv = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
  for (const auto& o : overrides) kv.set(o);
  if (threads > 0) kv.set("recon.threads", std::to_string(threads));
  return ExperimentConfig::from(kv);
}

Mesh mesh_from(const std::string& path, double h) { return path.empty() ? generate_disk_mesh(h) : read_msh(path); }

void write_manifest(const fs::path& path, const std::string& command, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "command = " << command << "\n";
  out << "version = " << kVersion << "\n";
  out << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  out << "noise_seed = " << cfg.noise.seed << "\n";
  out << "recon_seed = " << cfg.recon.seed << "\n";
  out << "[config]\n" << cfg.echo();
}

int cmd_mesh(double h, const std::string& out_path, std::ostream& out) {
  const Mesh mesh = generate_disk_mesh(h);
  write_msh(mesh, out_path);
  out << "nodes " << mesh.num_nodes() << "\ntriangles " << mesh.num_triangles() << "\nh " << format_double(mesh.h())
      << "\n";
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.output_dir;
  const Mesh fine = mesh_from(cfg.fine_path, cfg.fine_h);
  const Mesh recon = mesh_from(cfg.recon_path, cfg.recon_h);
  const Phantom phantom = make_phantom(cfg.phantom, fine);
  const ElementField mask = make_mask(cfg.mask, recon);
  SimulationOptions opts;
  opts.noise = cfg.noise;
  opts.noise_stage = cfg.noise_stage;
  opts.box = cfg.recon.box();
  opts.solver = cfg.recon.solver();
  const auto sims = simulate_datasets(fine, recon, phantom, cfg.fluxes, mask, opts);

  fs::create_directories(dir);
  write_msh(fine, dir / "fine.msh");
  write_msh(recon, dir / "recon.msh");
  write_field(fine, phantom.sigma, dir / "truth_fine.aet");
  const NodalField truth_recon = interpolate_p1(fine, phantom.sigma, recon);
  write_field(recon, truth_recon, dir / "truth_recon.aet");
  export_vtk(fine, {{"sigma", phantom.sigma}}, dir / "phantom.vtk");
  std::vector<NamedField> coarse_fields{{"sigma", truth_recon}};
  for (const auto& s : sims) {
    const int f = s.dataset.flux_index;
    write_field(recon, s.dataset.z, data_file(dir, f));
    export_vtk(fine, {{"H" + std::to_string(f), s.H_fine}}, dir / ("H_fine_f" + std::to_string(f) + ".vtk"));
    coarse_fields.emplace_back("z" + std::to_string(f), s.dataset.z);
    out << "flux f" << f << ": max H " << format_double(s.H_fine.maxCoeff()) << " -> " << data_file(dir, f).string()
        << "\n";
  }
  export_vtk(recon, coarse_fields, dir / "data.vtk");
  write_manifest(dir / "simulate_manifest.txt", "simulate", cfg);
  out << "fine mesh: " << fine.num_nodes() << " nodes, recon mesh: " << recon.num_nodes() << " nodes\n";
  return kExitOk;
}

int cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path data_dir = cfg.effective_data_dir();
  const fs::path mesh_path = cfg.recon_path.empty() ? data_dir / "recon.msh" : fs::path(cfg.recon_path);
  // Check inputs before anything is written.
  if (!fs::exists(mesh_path)) throw IoError("missing mesh file " + mesh_path.string());
  for (int f : cfg.fluxes) {
    if (!fs::exists(data_file(data_dir, f))) throw IoError("missing data file " + data_file(data_dir, f).string());
  }
  const Mesh mesh = read_msh(mesh_path);
  const ElementField mask = make_mask(cfg.mask, mesh);
  std::vector<Dataset> datasets;
  for (int f : cfg.fluxes) {
    datasets.push_back(Dataset{f, boundary_flux(f), read_field_for(mesh, data_file(data_dir, f)), mask});
  }
  std::optional<NodalField> truth;
  if (fs::exists(data_dir / "truth_recon.aet")) truth = read_field_for(mesh, data_dir / "truth_recon.aet");

  const NodalField sigma0 = NodalField::Constant(mesh.num_nodes(), cfg.sigma0);
  const ReconResult res = reconstruct(mesh, datasets, sigma0, cfg.recon, truth ? &*truth : nullptr);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_field(mesh, res.sigma, dir / "sigma.aet");
  std::vector<NamedField> fields{{"sigma", res.sigma}};
  if (truth) fields.emplace_back("truth", *truth);
  export_vtk(mesh, fields, dir / "sigma.vtk");
  export_history(res.history, dir / "history.csv");
  write_manifest(dir / "manifest.txt", "reconstruct", cfg);

  out << "J_beta(sigma_0) = " << format_double(res.history.initial.value) << "\n";
  if (!res.history.rows.empty()) {
    const auto& last = res.history.rows.back();
    out << "J_beta(sigma_" << last.k << ") = " << format_double(last.J_beta) << "\n";
    if (truth) out << "e_L1 = " << format_double(last.e_L1) << "\n";
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string sigma;
  std::string sigma_mesh;
  std::string truth;
  std::string truth_mesh;
  bool interpolate = false;
  std::string out_path;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const Mesh sigma_mesh = read_msh(a.sigma_mesh);
  const std::unique_ptr<Mesh> separate =
      a.truth_mesh.empty() ? nullptr : std::make_unique<Mesh>(read_msh(a.truth_mesh));
  const Mesh& truth_mesh = separate ? *separate : sigma_mesh;
  StoredField sigma = read_field(a.sigma);
  StoredField truth = read_field(a.truth);
  if (sigma.mesh_hash != sigma_mesh.hash() || sigma.values.size() != sigma_mesh.num_nodes()) {
    err << "error: " << a.sigma << " does not belong to mesh " << a.sigma_mesh << "\n";
    return kExitUsage;
  }
  if (truth.mesh_hash != truth_mesh.hash() || truth.values.size() != truth_mesh.num_nodes()) {
    err << "error: " << a.truth << " does not belong to its mesh\n";
    return kExitUsage;
  }
  NodalField sigma_on_truth;
  if (sigma.mesh_hash == truth.mesh_hash) {
    sigma_on_truth = std::move(sigma.values);
  } else if (a.interpolate) {
    sigma_on_truth = interpolate_p1(sigma_mesh, sigma.values, truth_mesh);
  } else {
    err << "error: sigma and truth live on different meshes (" << hex64(sigma.mesh_hash) << " vs "
        << hex64(truth.mesh_hash) << "); pass --interpolate\n";
    return kExitUsage;
  }
  const ErrorTriple e = error_metrics(truth_mesh, sigma_on_truth, truth.values);
  out << "e_L1 = " << format_double(e.e_L1) << "\ne_TV = " << format_double(e.e_TV)
      << "\ne_dBV = " << format_double(e.e_dBV) << "\n";
  if (!a.out_path.empty()) {
    std::ofstream f(a.out_path);
    if (!f) throw IoError("cannot write " + a.out_path);
    f << "e_L1,e_TV,e_dBV\n"
      << format_double(e.e_L1) << ',' << format_double(e.e_TV) << ',' << format_double(e.e_dBV) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conductivity reconstruction from interior power density data", "aet"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  double h = 0.0;
  std::string mesh_out;
  auto* mesh_cmd = app.add_subcommand("mesh", "Generate a disk mesh and write it as MSH 2.2");
  mesh_cmd->set_help_flag("--help", "Print this help message and exit");
  mesh_cmd->add_option("--h", h, "Target mesh size in (0, 1)")->required();
  mesh_cmd->add_option("--out", mesh_out, "Output .msh path")->required();

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  auto add_experiment = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (key = value)");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set recon.beta=0.7");
    cmd->add_option("--threads", threads, "Worker threads for per-dataset solves (1 = deterministic)")
        ->check(CLI::PositiveNumber);
  };
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate power density data for a phantom");
  add_experiment(sim_cmd);
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct the conductivity from simulated data");
  add_experiment(rec_cmd);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Error metrics of a reconstruction against the truth");
  eval_cmd->add_option("--sigma", ev.sigma, "Reconstructed field (AETFIELD)")->required();
  eval_cmd->add_option("--sigma-mesh", ev.sigma_mesh, "Mesh of the reconstruction")->required();
  eval_cmd->add_option("--truth", ev.truth, "Reference field (AETFIELD)")->required();
  eval_cmd->add_option("--truth-mesh", ev.truth_mesh, "Mesh of the reference field (default: sigma mesh)");
  eval_cmd->add_flag("--interpolate", ev.interpolate, "Interpolate sigma onto the truth mesh if meshes differ");
  eval_cmd->add_option("--out", ev.out_path, "Write metrics as CSV");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*mesh_cmd) {
      if (!(h > 0.0 && h < 1.0)) {
        err << "error: --h must lie in (0, 1)\n";
        return kExitUsage;
      }
      return cmd_mesh(h, mesh_out, out);
    }
    if (*sim_cmd || *rec_cmd) {
      ExperimentConfig cfg;
      try {
        cfg = load_experiment(config_path, overrides, threads);
      } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
      }
      return *sim_cmd ? cmd_simulate(cfg, out) : cmd_reconstruct(cfg, out);
    }
    return cmd_evaluate(ev, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace aet::cli
