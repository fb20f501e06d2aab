#include "aet/cli.hpp"
#include "aet/io.hpp"
#include "aet/metrics.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aet;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "aet");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aet_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> small_experiment(const fs::path& dir) {
  return {"--set", "mesh.fine_h=0.1", "--set", "mesh.recon_h=0.2", "--set", "output.dir=" + dir.string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("mesh subcommand") {
  const fs::path dir = scratch("mesh");
  fs::create_directories(dir);
  const Run ok = run({"mesh", "--h", "0.2", "--out", (dir / "d.msh").string()});
  CHECK(ok.code == cli::kExitOk);
  CHECK(read_msh(dir / "d.msh").num_nodes() == generate_disk_mesh(0.2).num_nodes());
  CHECK(run({"mesh", "--h", "1.5", "--out", (dir / "e.msh").string()}).code == cli::kExitUsage);
  CHECK(run({"mesh", "--h", "0", "--out", (dir / "e.msh").string()}).code == cli::kExitUsage);
  CHECK(run({"mesh", "--out", (dir / "e.msh").string()}).code == cli::kExitUsage);
  CHECK(run({"mesh", "--h", "0.2", "--out", "/nonexistent/dir/x.msh"}).code == cli::kExitRuntime);
  CHECK(run({"mesh", "--help"}).code == cli::kExitOk);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  fs::remove_all(dir);
}

TEST_CASE("simulate subcommand") {
  SUBCASE("homogeneous phantom, four fluxes") {
    const fs::path dir = scratch("sim_const");
    const Run r = run(cat({"simulate", "--set", "phantom.name=constant", "--set", "data.fluxes=[1,2,3,4]", "--set",
                           "noise.delta_e=0"},
                          small_experiment(dir)));
    REQUIRE(r.code == cli::kExitOk);
    const Mesh recon = read_msh(dir / "recon.msh");
    for (int f = 1; f <= 4; ++f) {
      const NodalField z = read_field_for(recon, dir / ("data_f" + std::to_string(f) + ".aet"));
      CHECK((z.array() - 1.0).abs().maxCoeff() <= 3.0 * 0.15);
    }
    CHECK(fs::exists(dir / "phantom.vtk"));
    CHECK(fs::exists(dir / "simulate_manifest.txt"));
    fs::remove_all(dir);
  }

  SUBCASE("fixed seed reruns are bit-identical") {
    const fs::path a = scratch("sim_a");
    const fs::path b = scratch("sim_b");
    REQUIRE(run(cat({"simulate", "--set", "noise.seed=5"}, small_experiment(a))).code == cli::kExitOk);
    REQUIRE(run(cat({"simulate", "--set", "noise.seed=5"}, small_experiment(b))).code == cli::kExitOk);
    for (const char* f : {"data_f1.aet", "data_f2.aet", "data_f3.aet", "truth_recon.aet", "data.vtk"}) {
      CHECK(slurp(a / f) == slurp(b / f));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }

  SUBCASE("config errors are usage errors and write nothing") {
    const fs::path dir = scratch("sim_bad");
    CHECK(run(cat({"simulate", "--set", "noise.bogus=1"}, small_experiment(dir))).code == cli::kExitUsage);
    CHECK(run(cat({"simulate", "--set", "phantom.name=brain"}, small_experiment(dir))).code == cli::kExitUsage);
    CHECK(run(cat({"simulate", "--set", "data.fluxes=[1,9]"}, small_experiment(dir))).code == cli::kExitUsage);
    CHECK(run({"simulate", "--config", "/nonexistent/cfg.toml"}).code == cli::kExitUsage);
    CHECK(!fs::exists(dir));
  }

  SUBCASE("config file with sections") {
    const fs::path dir = scratch("sim_file");
    fs::create_directories(dir);
    std::ofstream(dir / "exp.toml") << "# test\n[mesh]\nfine_h = 0.1\nrecon_h = 0.2\n[data]\nfluxes = [2]\n"
                                    << "[output]\ndir = \"" << (dir / "out").string() << "\"\n";
    CHECK(run({"simulate", "--config", (dir / "exp.toml").string()}).code == cli::kExitOk);
    CHECK(fs::exists(dir / "out" / "data_f2.aet"));
    CHECK(!fs::exists(dir / "out" / "data_f1.aet"));
    fs::remove_all(dir);
  }
}

TEST_CASE("reconstruct subcommand") {
  const fs::path data = scratch("rec_data");
  REQUIRE(run(cat({"simulate"}, small_experiment(data))).code == cli::kExitOk);

  SUBCASE("short run writes outputs and a decreasing objective") {
    const fs::path out = scratch("rec_out");
    const auto start = std::chrono::steady_clock::now();
    const Run r = run(cat({"reconstruct", "--set", "data.dir=" + data.string(), "--set", "recon.outer_iters=3", "--set",
                           "recon.stop_tol_outer=0"},
                          small_experiment(out)));
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 10.0);
    REQUIRE(r.code == cli::kExitOk);
    const ReconHistory h = import_history(out / "history.csv");
    REQUIRE(h.rows.size() == 3);
    CHECK(h.rows[2].J_beta < h.rows[0].J_beta);
    CHECK(!std::isnan(h.rows[2].e_L1));
    CHECK(fs::exists(out / "sigma.aet"));
    CHECK(fs::exists(out / "sigma.vtk"));
    CHECK(slurp(out / "manifest.txt").find("noise_seed") != std::string::npos);
    fs::remove_all(out);
  }

  SUBCASE("missing data file is a runtime error and writes nothing") {
    const fs::path out = scratch("rec_missing");
    const Run r = run(cat({"reconstruct", "--set", "data.dir=" + data.string(), "--set", "data.fluxes=[1,4]"},
                          small_experiment(out)));
    CHECK(r.code == cli::kExitRuntime);
    CHECK(r.err.find("data_f4.aet") != std::string::npos);
    CHECK(!fs::exists(out));
  }

  fs::remove_all(data);
}

TEST_CASE("evaluate subcommand") {
  const fs::path dir = scratch("eval");
  fs::create_directories(dir);
  const Mesh coarse = generate_disk_mesh(0.2);
  const Mesh fine = generate_disk_mesh(0.1);
  write_msh(coarse, dir / "coarse.msh");
  write_msh(fine, dir / "fine.msh");
  NodalField xc(coarse.num_nodes()), xf(fine.num_nodes());
  for (int i = 0; i < coarse.num_nodes(); ++i) xc[i] = 1.0 + 0.2 * coarse.node(i).x();
  for (int i = 0; i < fine.num_nodes(); ++i) xf[i] = 1.0 + 0.1 * fine.node(i).y();
  write_field(coarse, xc, dir / "c.aet");
  write_field(fine, xf, dir / "f.aet");

  const Run same = run({"evaluate", "--sigma", (dir / "c.aet").string(), "--sigma-mesh", (dir / "coarse.msh").string(),
                        "--truth", (dir / "c.aet").string(), "--out", (dir / "m.csv").string()});
  CHECK(same.code == cli::kExitOk);
  CHECK(slurp(dir / "m.csv") == "e_L1,e_TV,e_dBV\n0,0,0\n");

  const std::vector<std::string> cross{"evaluate", "--sigma", (dir / "c.aet").string(), "--sigma-mesh",
                                       (dir / "coarse.msh").string(), "--truth", (dir / "f.aet").string(),
                                       "--truth-mesh", (dir / "fine.msh").string()};
  CHECK(run(cross).code == cli::kExitUsage);

  const Run interp = run(cat(cross, {"--interpolate", "--out", (dir / "i.csv").string()}));
  CHECK(interp.code == cli::kExitOk);
  const ErrorTriple e = error_metrics(fine, interpolate_p1(coarse, xc, fine), xf);
  CHECK(slurp(dir / "i.csv") ==
        "e_L1,e_TV,e_dBV\n" + format_double(e.e_L1) + "," + format_double(e.e_TV) + "," + format_double(e.e_dBV) + "\n");

  CHECK(run({"evaluate", "--sigma", (dir / "nope.aet").string(), "--sigma-mesh", (dir / "coarse.msh").string(),
             "--truth", (dir / "c.aet").string()})
            .code == cli::kExitRuntime);
  fs::remove_all(dir);
}
