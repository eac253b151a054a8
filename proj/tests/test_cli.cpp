#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_binary() {
  const char* env = std::getenv("ZRP_CLI");
  REQUIRE(env != nullptr);
  return env;
}

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "zrp_cli_test";
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  fs::path log = work_dir() / "last_output.txt";
  std::string command =
      "\"" + cli_binary() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  int raw = std::system(command.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string write_file(const std::string& name, const std::string& body) {
  fs::path p = work_dir() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string linear_config(const std::string& out_sub, int replicas = 16,
                          std::uint64_t seed = 42) {
  std::ostringstream os;
  os << R"({
  "model": {"family": "linear", "species": 1, "cap": 30},
  "kernel": {"alpha": 0.75, "c_plus": 0.5, "c_minus": 0.5},
  "lattice": {"sites": 32},
  "density": {"values": [0.8]},
  "sim": {"horizon": 0.25, "replicas": )"
     << replicas << R"(, "seed": )" << seed << R"(, "grid_dt": 0.03125},
  "output": {"directory": ")"
     << (work_dir() / out_sub).string() << R"("}
})";
  return os.str();
}

}  // namespace

TEST_CASE("validate passes the linear config and reports a unit jacobian") {
  std::string cfg = write_file("linear.json", linear_config("out_lin"));
  RunResult r = run_cli("validate --config \"" + cfg + "\"");
  CHECK(r.code == 0);
  CHECK(contains(r.output, "check compatibility: PASS"));
  CHECK(contains(r.output, "diag = (1)"));
  CHECK(contains(r.output, "validate: OK"));

  json report = json::parse(slurp(work_dir() / "out_lin" / "validate.json"));
  CHECK(report.at("result") == "OK");
  CHECK(report.at("rate_mean")[0].get<double>() == doctest::Approx(0.8));

  json manifest =
      json::parse(slurp(work_dir() / "out_lin" / "validate_manifest.json"));
  CHECK(manifest.at("command") == "validate");
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
}

TEST_CASE("unknown configuration keys are rejected with the offending name") {
  std::string cfg =
      write_file("badkey.json", R"({"model": {"family": "linear", "speces": 1}})");
  RunResult r = run_cli("validate --config \"" + cfg + "\"");
  CHECK(r.code == 1);
  CHECK(contains(r.output, "unknown key 'speces'"));

  std::string cfg2 = write_file(
      "badest.json",
      R"({"estimators": {"qv": {"h": [[1, 1.0]], "radii": [1]}}})");
  RunResult r2 = run_cli("validate --config \"" + cfg2 + "\"");
  CHECK(r2.code == 1);
  CHECK(contains(r2.output, "unknown key 'radii'"));
}

TEST_CASE("incompatible custom rates fail validation with a counterexample") {
  // g_0(k) = k_0 (1 + 0.5 k_1) crossed with g_1(k) = k_1 breaks the
  // compatibility identity at k = (1, 1)
  std::string cfg = write_file("incompat.json", R"({
  "model": {"family": "custom", "species": 2, "cap": 2,
    "rates": [[0, 0, 0, 1, 1.5, 2, 2, 3, 4], [0, 1, 2, 0, 1, 2, 0, 1, 2]]},
  "kernel": {"alpha": 1.0, "c_plus": 0.5, "c_minus": 0.5},
  "lattice": {"sites": 8},
  "output": {"directory": ")" +
                                                     (work_dir() / "out_inc").string() +
                                                     R"("}
})");
  RunResult r = run_cli("validate --config \"" + cfg + "\"");
  CHECK(r.code == 1);
  CHECK(contains(r.output, "check compatibility: FAIL"));
  CHECK(contains(r.output, "k=(1,1)"));
  CHECK(contains(r.output, "validate: FAIL"));

  // but simulation commands refuse the family outright
  RunResult r2 = run_cli("simulate --config \"" + cfg + "\"");
  CHECK(r2.code == 1);
  CHECK(contains(r2.output, "only 'validate'"));
}

TEST_CASE("non-scalar jacobian with a drifting kernel warns but passes") {
  std::string cfg = write_file("frame.json", R"({
  "model": {"family": "potential_coupled", "species": 2, "cap": 20, "coupling": 0.1},
  "kernel": {"alpha": 1.2, "c_plus": 0.7, "c_minus": 0.3},
  "lattice": {"sites": 32},
  "density": {"values": [0.4, 0.8]},
  "output": {"directory": ")" +
                                                  (work_dir() / "out_frame").string() +
                                                  R"("}
})");
  RunResult r = run_cli("validate --config \"" + cfg + "\"");
  CHECK(r.code == 0);
  CHECK(contains(r.output, "check moving frame: WARN"));
  CHECK(contains(r.output, "frame-dependent estimators are disabled"));
  CHECK(contains(r.output, "validate: OK"));
}

TEST_CASE("reruns are byte-identical; seed and replica overrides take effect") {
  std::string cfg = write_file("det.json", linear_config("out_det_a", 12));

  RunResult a = run_cli("simulate --config \"" + cfg + "\"");
  REQUIRE(a.code == 0);
  std::string csv_a = slurp(work_dir() / "out_det_a" / "simulate.csv");
  std::string man_a = slurp(work_dir() / "out_det_a" / "simulate_manifest.json");

  fs::path out_b = work_dir() / "out_det_b";
  RunResult b =
      run_cli("simulate --config \"" + cfg + "\" --out \"" + out_b.string() + "\"");
  REQUIRE(b.code == 0);
  CHECK(slurp(out_b / "simulate.csv") == csv_a);
  CHECK(slurp(out_b / "simulate_manifest.json") == man_a);

  fs::path out_t = work_dir() / "out_det_t";
  RunResult t = run_cli("simulate --config \"" + cfg + "\" --threads 3 --out \"" +
                        out_t.string() + "\"");
  REQUIRE(t.code == 0);
  CHECK(slurp(out_t / "simulate.csv") == csv_a);

  fs::path out_s = work_dir() / "out_det_s";
  RunResult s = run_cli("simulate --config \"" + cfg + "\" --seed 43 --out \"" +
                        out_s.string() + "\"");
  REQUIRE(s.code == 0);
  CHECK(slurp(out_s / "simulate.csv") != csv_a);

  fs::path out_r = work_dir() / "out_det_r";
  RunResult rr = run_cli("simulate --config \"" + cfg + "\" --replicas 5 --out \"" +
                         out_r.string() + "\"");
  REQUIRE(rr.code == 0);
  json manifest = json::parse(slurp(out_r / "simulate_manifest.json"));
  CHECK(manifest.at("stream_ids").size() == 5);
  // the canonical hash covers the physics, and the replica count is part of it
  CHECK(manifest.at("config_hash") !=
        json::parse(man_a).at("config_hash"));
}

TEST_CASE("qv closes on the exact rate and the sampler passes its gate") {
  std::string cfg = write_file("qv.json", linear_config("out_qv", 24));
  RunResult q = run_cli("qv --config \"" + cfg + "\"");
  CHECK(q.code == 0);
  CHECK(contains(q.output, "qv: OK"));

  RunResult s = run_cli("sample --config \"" + cfg + "\"");
  CHECK(s.code == 0);
  CHECK(contains(s.output, "sample: OK"));

  RunResult d = run_cli("decompose --config \"" + cfg + "\"");
  CHECK(d.code == 0);
  // the two drift accumulators agree to rounding, so the split is exact
  std::size_t at = d.output.find("drift| = ");
  REQUIRE(at != std::string::npos);
  CHECK(std::strtod(d.output.c_str() + at + 9, nullptr) <= 1e-10);
}

TEST_CASE("gap writes the relaxation table and its fitted slopes") {
  std::string cfg = write_file("gap.json", linear_config("out_gap"));
  RunResult r = run_cli("gap --config \"" + cfg + "\"");
  CHECK(r.code == 0);

  std::istringstream csv(slurp(work_dir() / "out_gap" / "gap.csv"));
  std::string line;
  int rows = 0;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "ell,sites,relaxation_time");
  double last = 0.0;
  while (std::getline(csv, line)) {
    ++rows;
    double w = std::strtod(line.substr(line.rfind(',') + 1).c_str(), nullptr);
    CHECK(w > last);  // relaxation time grows with the box
    last = w;
  }
  CHECK(rows == 4);

  json manifest = json::parse(slurp(work_dir() / "out_gap" / "gap_manifest.json"));
  double slope = manifest.at("slope_radius").get<double>();
  CHECK(slope > 0.3);
  CHECK(slope < 0.9);
}

TEST_CASE("sweep runs matched replicas across the axis") {
  std::ostringstream os;
  os << R"({
  "model": {"family": "linear", "species": 1, "cap": 30},
  "kernel": {"alpha": 0.75, "c_plus": 0.5, "c_minus": 0.5},
  "lattice": {"sites": 32},
  "density": {"values": [0.8]},
  "sim": {"horizon": 0.2, "replicas": 8, "seed": 5, "grid_dt": 0.025},
  "output": {"directory": ")"
     << (work_dir() / "out_sweep").string() << R"("},
  "estimators": {"sweep": {"axis": "sites", "values": [16, 32],
                           "estimator": "qv", "fit_slope": true}}
})";
  std::string cfg = write_file("sweep.json", os.str());
  RunResult r = run_cli("sweep --config \"" + cfg + "\"");
  CHECK(r.code == 0);

  std::istringstream csv(slurp(work_dir() / "out_sweep" / "sweep.csv"));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "axis,value,estimator,mean,stderr,replicas");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(contains(line, "sites,"));
    CHECK(contains(line, ",qv,"));
    CHECK(line.substr(line.rfind(',') + 1) == "8");
  }
  CHECK(rows == 2);
  json manifest =
      json::parse(slurp(work_dir() / "out_sweep" / "sweep_manifest.json"));
  CHECK(manifest.contains("slope"));
}

TEST_CASE("compare separates equal-law runs from a doubled noise floor") {
  auto ou_config = [&](const std::string& out_sub, double noise_factor,
                       std::uint64_t seed) {
    std::ostringstream os;
    os << R"({
  "model": {"family": "linear", "species": 1, "cap": 30},
  "kernel": {"alpha": 0.75, "c_plus": 0.5, "c_minus": 0.5},
  "lattice": {"sites": 32},
  "density": {"values": [0.8]},
  "sim": {"horizon": 0.1, "replicas": 200, "seed": )"
       << seed << R"(, "grid_dt": 0.025},
  "output": {"directory": ")"
       << (work_dir() / out_sub).string() << R"("},
  "estimators": {"ou": {"h": [[1, 1.0, 0.0]], "noise_factor": )"
       << noise_factor << R"(}}
})";
    return write_file(out_sub + ".json", os.str());
  };

  REQUIRE(run_cli("ou --config \"" + ou_config("out_cmp_a", 2.0, 11) + "\"").code == 0);
  REQUIRE(run_cli("ou --config \"" + ou_config("out_cmp_b", 2.0, 12) + "\"").code == 0);
  REQUIRE(run_cli("ou --config \"" + ou_config("out_cmp_c", 4.0, 13) + "\"").code == 0);

  std::string a = (work_dir() / "out_cmp_a" / "ou.csv").string();
  std::string b = (work_dir() / "out_cmp_b" / "ou.csv").string();
  std::string c = (work_dir() / "out_cmp_c" / "ou.csv").string();

  RunResult same = run_cli("compare \"" + a + "\" \"" + b + "\"");
  CHECK(same.code == 0);
  CHECK(contains(same.output, "compare: OK"));

  RunResult diff = run_cli("compare \"" + a + "\" \"" + c + "\"");
  CHECK(diff.code == 3);
  CHECK(contains(diff.output, "compare: MISMATCH"));
  CHECK(contains(diff.output, "second moment"));
}

TEST_CASE("missing inputs map to the validation exit code") {
  RunResult r = run_cli("qv");
  CHECK(r.code == 1);
  CHECK(contains(r.output, "--config is required"));

  RunResult r2 = run_cli("qv --config /nonexistent/nope.json");
  CHECK(r2.code == 1);

  RunResult r3 = run_cli("compare /nonexistent/a.csv /nonexistent/b.csv");
  CHECK(r3.code == 1);
}
