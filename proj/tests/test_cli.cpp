#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli = EVPIX_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("evpix_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli: stream produces the expected artifacts") {
  const fs::path dir = fresh_dir("stream");
  const int rc = run("stream --omega 5 --rho 0.002 --theta-minus 0.96 --theta-plus 0.94 "
                     "--n 2000 --seed 1 --out " + dir.string());
  REQUIRE(rc == 0);
  for (const char* f : {"stream.jsonl", "stream.csv", "summary.json", "summary.txt",
                        "isi_histograms.csv", "manifest.ini"}) {
    INFO(f);
    CHECK(fs::exists(dir / f));
  }
  const std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"n_events\": 2000") != std::string::npos);
}

TEST_CASE("cli: identical invocations are byte-identical") {
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  const std::string args = "stream --omega 5 --rho 0.002 --theta-minus 0.96 "
                           "--theta-plus 0.94 --n 1500 --seed 7 --out ";
  REQUIRE(run(args + d1.string()) == 0);
  REQUIRE(run(args + d2.string()) == 0);
  for (const char* f : {"stream.jsonl", "stream.csv", "summary.json", "isi_histograms.csv"}) {
    INFO(f);
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
}

TEST_CASE("cli: manifest rerun reproduces outputs byte-identically") {
  const fs::path dir = fresh_dir("manifest");
  REQUIRE(run("stream --omega 5 --rho 0.002 --theta-minus 0.96 --theta-plus 0.94 "
              "--n 1200 --seed 3 --out " + dir.string()) == 0);
  const std::string stream_before = slurp(dir / "stream.jsonl");
  const std::string summary_before = slurp(dir / "summary.json");
  const std::string manifest = slurp(dir / "manifest.ini");
  REQUIRE(!manifest.empty());

  // rerun purely from the manifest
  const fs::path copy = dir / "manifest_copy.ini";
  fs::copy_file(dir / "manifest.ini", copy);
  fs::remove(dir / "stream.jsonl");
  fs::remove(dir / "summary.json");
  REQUIRE(run("--config " + copy.string()) == 0);
  CHECK(slurp(dir / "stream.jsonl") == stream_before);
  CHECK(slurp(dir / "summary.json") == summary_before);
  CHECK(slurp(dir / "manifest.ini") == manifest);
}

TEST_CASE("cli: front-end route normalizes thresholds") {
  const fs::path dir = fresh_dir("frontend");
  const int rc = run("stream --omega 5 --rho 0.002 --beta1 1 --beta2 10 --beta3 0 "
                     "--noise-sigma 0.05 --xi1 1 --xi2 10 --radiance 0 "
                     "--threshold-minus-volts 0.1 --threshold-plus-volts 0.1 "
                     "--n 500 --seed 2 --out " + dir.string());
  REQUIRE(rc == 0);
  const std::string csv = slurp(dir / "stream.csv");
  CHECK(csv.find("theta_minus=") != std::string::npos);
}

TEST_CASE("cli: validation failures exit with code 2") {
  CHECK(run("stream --omega -1 --theta-minus 0.9 --theta-plus 0.9 --n 10 --out /tmp/evpix_bad") == 2);
  // both routes given at once
  CHECK(run("stream --omega 5 --theta-minus 0.9 --theta-plus 0.9 --radiance 5 "
            "--threshold-minus-volts 0.1 --threshold-plus-volts 0.1 --n 10 "
            "--out /tmp/evpix_bad") == 2);
  // neither route given
  CHECK(run("stream --omega 5 --n 10 --out /tmp/evpix_bad") == 2);
  // malformed flag
  CHECK(run("stream --no-such-flag") == 2);
  // no subcommand
  CHECK(run("") == 2);
}

TEST_CASE("cli: exit-stats reproduces the validation problem") {
  const fs::path dir = fresh_dir("exitstats");
  const int rc = run("exit-stats --omega 2 --lower -0.5 --upper 1 --x0 0 "
                     "--n 20000 --seed 5 --sampler-check --out " + dir.string());
  REQUIRE(rc == 0);
  const std::string json = slurp(dir / "exit_stats.json");
  CHECK(json.find("\"expected_exit_time_s\": 0.6918") != std::string::npos);
  CHECK(fs::exists(dir / "pde_solution.csv"));
  CHECK(fs::exists(dir / "conditional_densities.csv"));

  // boundary start: immediate exit report
  const fs::path dir2 = fresh_dir("exitstats_boundary");
  REQUIRE(run("exit-stats --omega 2 --lower -0.5 --upper 1 --x0 1 --n 100 --out " +
              dir2.string()) == 0);
  const std::string json2 = slurp(dir2 / "exit_stats.json");
  CHECK(json2.find("\"pathfree_mean_s\": 0") != std::string::npos);
}

TEST_CASE("cli: conditionals emits the grid and critical point") {
  const fs::path dir = fresh_dir("cond");
  const int rc = run("conditionals --omega 5 --rho 0.002 --theta-minus 0.96 "
                     "--theta-plus 0.94 --z-points 101 --out " + dir.string());
  REQUIRE(rc == 0);
  const std::string json = slurp(dir / "critical_point.json");
  CHECK(json.find("\"z_star\": 0.01") != std::string::npos);
  const std::string grid = slurp(dir / "conditionals.csv");
  CHECK(grid.find("z,p_on,p_off,expected_isi_s,expected_z_next") == 0);
}

TEST_CASE("cli: dynamics reports the limit cycle and fixed point") {
  const fs::path dir = fresh_dir("dyn");
  REQUIRE(run("dynamics --omega 5 --rho 0.002 --theta-minus 0.96 --theta-plus 0.94 "
              "--z0 0 --iters 50 --out " + dir.string()) == 0);
  const std::string rep = slurp(dir / "report.json");
  CHECK(rep.find("\"classification\": \"limit_cycle\"") != std::string::npos);
  CHECK(rep.find("\"stable\": false") != std::string::npos);
  CHECK(fs::exists(dir / "cobweb.csv"));
  CHECK(fs::exists(dir / "iterates.csv"));

  const fs::path dir2 = fresh_dir("dyn_slow");
  REQUIRE(run("dynamics --omega 5 --rho 0.39 --theta-minus 0.96 --theta-plus 0.94 "
              "--z0 0.2 --iters 80 --out " + dir2.string()) == 0);
  const std::string rep2 = slurp(dir2 / "report.json");
  CHECK(rep2.find("\"classification\": \"fixed_point\"") != std::string::npos);
}

TEST_CASE("cli: mstep writes one KDE per m") {
  const fs::path dir = fresh_dir("mstep");
  REQUIRE(run("mstep --omega 5 --rho 0.002 --theta-minus 0.96 --theta-plus 0.94 "
              "--start -0.5 --m 0 --m 1 --m 5 --replicas 20000 --threads 2 --out " +
              dir.string()) == 0);
  const std::string csv = slurp(dir / "mstep_kde.csv");
  CHECK(csv.find("m,z,density") == 0);
  CHECK(csv.find("\n5,") != std::string::npos);
  CHECK(fs::exists(dir / "zstar.json"));
}
