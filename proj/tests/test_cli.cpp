// End-to-end checks of the command-line tool: exit codes, determinism and
// output files. Runs the built binary through std::system.

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "specvs/cloud.hpp"
#include "specvs/run_config.hpp"

namespace {

const char* kTool = SPECVS_TOOL_PATH;

int run(const std::string& args, std::string* out = nullptr) {
  const std::string redirect = " > /tmp/specvs_cli_out.txt 2>&1";
  const int rc = std::system((std::string(kTool) + " " + args + redirect).c_str());
  if (out) {
    std::ifstream f("/tmp/specvs_cli_out.txt");
    std::ostringstream buf;
    buf << f.rdbuf();
    *out = buf.str();
  }
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("gen writes deterministic cloud files") {
  CHECK(run("gen --shape sphere --radius 0.05 --n 2000 --seed 7 --out /tmp/specvs_a.cloud") == 0);
  CHECK(run("gen --shape sphere --radius 0.05 --n 2000 --seed 7 --out /tmp/specvs_b.cloud") == 0);
  const specvs::PointCloud a = specvs::load_cloud("/tmp/specvs_a.cloud");
  CHECK(a.size() == 2000);
  CHECK(slurp("/tmp/specvs_a.cloud") == slurp("/tmp/specvs_b.cloud"));

  // Usage errors exit with the validation code.
  CHECK(run("gen --shape sphere --n 0 --out /tmp/specvs_c.cloud") == 3);
  CHECK(run("gen --shape pyramid --n 10 --out /tmp/specvs_c.cloud") == 3);
  std::remove("/tmp/specvs_a.cloud");
  std::remove("/tmp/specvs_b.cloud");
}

TEST_CASE("register on identical files converges immediately") {
  REQUIRE(run("gen --shape box --size 0.06,0.05,0.04 --n 1500 --seed 3 --out /tmp/specvs_reg.cloud") == 0);
  std::string out;
  const int rc = run(
      "register --reference /tmp/specvs_reg.cloud --target /tmp/specvs_reg.cloud "
      "--out /tmp/specvs_reg_out",
      &out);
  CHECK(rc == 0);
  CHECK(out.find("converged: true") != std::string::npos);
  CHECK(out.find("iterations: 1") != std::string::npos);

  const std::string j = slurp("/tmp/specvs_reg_out/transform.json");
  CHECK(j.find("\"converged\": true") != std::string::npos);
  const std::string trace = slurp("/tmp/specvs_reg_out/trace.csv");
  CHECK(trace.rfind("iter,Jt,Jr,", 0) == 0);
  CHECK(!slurp("/tmp/specvs_reg_out/resolved.config").empty());
  std::remove("/tmp/specvs_reg.cloud");
}

TEST_CASE("register with a missing file exits with the io code") {
  CHECK(run("register --reference /nonexistent.cloud --target /nonexistent.cloud "
            "--out /tmp/specvs_reg_out2") == 4);
}

TEST_CASE("dump egi of a single-normal cloud has one nonzero bin") {
  {
    std::ofstream f("/tmp/specvs_one.cloud");
    f << "0 0 0 0 0 1\n";
  }
  std::string out;
  CHECK(run("dump --cloud /tmp/specvs_one.cloud --what egi --bandwidth 4", &out) == 0);
  long total = 0;
  std::istringstream is(out);
  std::string line;
  std::getline(is, line);
  CHECK(line == "4");
  long v;
  while (is >> v) total += v;
  CHECK(total == 1);

  CHECK(run("dump --cloud /tmp/specvs_one.cloud --what nothing") == 3);
  CHECK(run("dump --cloud /tmp/specvs_one.cloud") == 3);  // missing --what
  std::remove("/tmp/specvs_one.cloud");
}

TEST_CASE("dump sh of a sphere is degree-0 dominant") {
  REQUIRE(run("gen --shape sphere --radius 0.05 --n 4000 --seed 5 --out /tmp/specvs_sph.cloud") == 0);
  std::string out;
  CHECK(run("dump --cloud /tmp/specvs_sph.cloud --what sh --bandwidth 8", &out) == 0);
  std::istringstream is(out);
  int l, m;
  double value, dc = 0.0, biggest_rest = 0.0;
  while (is >> l >> m >> value) {
    if (l == 0) {
      dc = std::abs(value);
    } else {
      biggest_rest = std::max(biggest_rest, std::abs(value));
    }
  }
  // Node counts of a uniform sphere scale with the node solid angle, so
  // higher even degrees are present; degree 0 still dominates.
  CHECK(dc > 2.0 * biggest_rest);
  std::remove("/tmp/specvs_sph.cloud");
}

TEST_CASE("servo usage errors") {
  CHECK(run("servo --scene /nonexistent.cloud --goal 0,0,0.4,0,0,0 --start bad") == 4);
  {
    std::ofstream f("/tmp/specvs_scene.cloud");
    f << "0 0 0 0 0 1\n";
  }
  CHECK(run("servo --scene /tmp/specvs_scene.cloud --goal 0,0,0.4,0,0,0 --start bad,pose") == 3);
  std::remove("/tmp/specvs_scene.cloud");
}

TEST_CASE("bench rejects n = 0 and reports a breakdown") {
  CHECK(run("bench --n 0") == 3);
  std::string out;
  CHECK(run("bench --n 2 --max-iters 5", &out) == 0);
  CHECK(out.find("mean_ms_per_iteration:") != std::string::npos);
  CHECK(out.find("stage_fft_ms:") != std::string::npos);
  CHECK(out.find("stage_sh_ms:") != std::string::npos);
  CHECK(out.find("stage_voxelize_egi_ms:") != std::string::npos);
  CHECK(out.find("stage_gradient_ms:") != std::string::npos);
}
