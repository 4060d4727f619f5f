#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "aimdq/engine.hpp"
#include "aimdq/io.hpp"
#include "aimdq/model.hpp"
#include "test_util.hpp"

using namespace aimdq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string table1_path = std::string(AIMDQ_CONFIG_DIR) + "/table1.cfg";
const std::string tool_path = AIMDQ_TOOL_PATH;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = tool_path + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("aimdq_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("the bundled config parses to the reference setup") {
  const auto loaded = io::load_config_file(table1_path);
  const SystemConfig& cfg = loaded.config;
  CHECK(cfg.lambda == 100.0);
  CHECK(cfg.max_cycles == 200);
  CHECK(cfg.negative_cycle_policy == NegativeCyclePolicy::repeat_backoff);
  REQUIRE(cfg.nodes.size() == 4);
  const SystemConfig expect = testutil::table1();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(cfg.nodes[i].alpha == expect.nodes[i].alpha);
    CHECK(cfg.nodes[i].beta == expect.nodes[i].beta);
    CHECK(cfg.nodes[i].u0 == expect.nodes[i].u0);
    CHECK(cfg.nodes[i].w0 == expect.nodes[i].w0);
  }
  CHECK(loaded.hash.size() == 16);
  CHECK(loaded.hash == io::load_config_file(table1_path).hash);
}

TEST_CASE("config parser rejects malformed input") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return io::parse_config(in);
  };
  CHECK_THROWS_AS(parse("frequency = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("lambda = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse("[node]\nalpha = 1\n"), ConfigError);  // missing lambda
  CHECK_THROWS_AS(parse("lambda = 1\nnegative_cycle_policy = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("lambda = 1\n[server]\n"), ConfigError);
  CHECK_THROWS_AS(parse("lambda = 1\n[node]\nheight = 2\n"), ConfigError);
  CHECK_NOTHROW(parse("lambda = 1 # trailing comment\n[node]\nalpha = 2\n"));
}

TEST_CASE("format_double prints 12 significant digits") {
  CHECK(io::format_double(100.0 / 75.0) == "1.33333333333");
  CHECK(io::format_double(0.0) == "0");
  CHECK(io::format_double(-3.4) == "-3.4");
}

TEST_CASE("cycles.csv round-trips through the post-write validator") {
  const ValidatedConfig cfg = validate_config(testutil::table1());
  const auto records = engine::run_deterministic(cfg, 20);
  io::Manifest mf{"simulate", "deadbeef00000000", std::nullopt};

  std::ostringstream out;
  io::write_cycles_csv(out, mf, records);
  const std::string text = out.str();
  CHECK(text.find("# aimdq") == 0);
  CHECK(text.find("k,t_start,T,node,u,gamma,w,u_av,w_av,t_delta,t_w,t_total\n") !=
        std::string::npos);

  std::istringstream back(text);
  const auto check = io::validate_cycles_csv(back, cfg.lambda());
  CHECK(check.ok);

  // negate a cycle period: the validator must trip
  std::string bad = text;
  const auto pos = bad.find("0,0,3.4,1,");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 10, "0,0,-3.4,1,");
  std::istringstream bad_in(bad);
  CHECK(!io::validate_cycles_csv(bad_in, cfg.lambda()).ok);

  // break conservation: bump one u_av cell (k = 0 node 1 carries 8.5)
  std::string off = text;
  const auto upos = off.find(",8.5,");
  REQUIRE(upos != std::string::npos);
  off.replace(upos, 5, ",9.5,");
  std::istringstream off_in(off);
  CHECK(!io::validate_cycles_csv(off_in, cfg.lambda()).ok);
}

TEST_CASE("run report carries the empirical period and invariant sets") {
  const ValidatedConfig cfg = validate_config(testutil::table1());
  const auto records = engine::run_deterministic(cfg, 30);
  io::Manifest mf{"simulate", "0123456789abcdef", std::nullopt};
  const json j = json::parse(io::run_report_json(mf, cfg, records));

  CHECK(j["manifest"]["config_hash"] == "0123456789abcdef");
  CHECK(j["config"]["lambda"] == 100.0);
  CHECK(std::abs(j["t_star_empirical"].get<double>() - 100.0 / 75.0) < 0.01);
  CHECK(std::abs(j["fixed_point"]["t_star"].get<double>() - 100.0 / 75.0) < 1e-12);
  CHECK(j["convergence"]["events_to_converge"].get<long>() <= 15);
  CHECK(j["conservation_max_residual"].get<double>() < 1e-9 * 100.0);
  CHECK(j["spectral"]["schur"] == true);
  REQUIRE(j["invariant_sets"].size() == 4);
  CHECK(std::abs(j["invariant_sets"][0]["upper_at_t_star"].get<double>() - 40.0 / 9.0) < 1e-9);

  // empty run: valid report, no empirical period
  const json empty = json::parse(io::run_report_json(mf, cfg, {}));
  CHECK(empty["t_star_empirical"].is_null());
  CHECK(empty["cycles"] == 0);
  CHECK(empty["config"]["nodes"].size() == 4);
}

TEST_CASE("cli: simulate writes validated outputs and a sane report") {
  TempDir dir;
  const int rc = run_tool("simulate " + table1_path + " --cycles 30 --trace-samples 20 --out " +
                          dir.path.string());
  CHECK(rc == 0);

  const json report = json::parse(slurp(dir.path / "report.json"));
  CHECK(std::abs(report["t_star_empirical"].get<double>() - 1.3333) < 0.01);
  CHECK(report["manifest"]["subcommand"] == "simulate");

  std::ifstream cycles(dir.path / "cycles.csv");
  CHECK(io::validate_cycles_csv(cycles, 100.0).ok);

  // k = 0, node 1 row: u = 0, gamma ~ 8.6603; k = 1 row carries w ~ 6.955
  const std::string csv = slurp(dir.path / "cycles.csv");
  CHECK(csv.find("0,0,3.4,1,0,8.66025403784,7.5,") != std::string::npos);
  CHECK(csv.find("1,3.4,0.3,1,17,") != std::string::npos);
  CHECK(csv.find(",6.95513627133,") != std::string::npos);

  const std::string trace = slurp(dir.path / "trace.csv");
  CHECK(trace.find("t,node,u_tau,w_tau,delta_i_tau\n") != std::string::npos);
}

TEST_CASE("cli: zero cycles produce header-only files and a valid report") {
  TempDir dir;
  const int rc = run_tool("simulate " + table1_path + " --cycles 0 --out " + dir.path.string());
  CHECK(rc == 0);
  const json report = json::parse(slurp(dir.path / "report.json"));
  CHECK(report["t_star_empirical"].is_null());
  CHECK(report["config"]["lambda"] == 100.0);
  const std::string csv = slurp(dir.path / "cycles.csv");
  CHECK(csv.find("k,t_start,T,node") != std::string::npos);
  CHECK(csv.rfind("t_total\n") == csv.size() - std::string("t_total\n").size());
}

TEST_CASE("cli: spectral certifies the bundled config") {
  TempDir dir;
  const int rc = run_tool("spectral " + table1_path + " --out " + dir.path.string());
  CHECK(rc == 0);
  const json report = json::parse(slurp(dir.path / "report.json"));
  CHECK(report["spectral"]["schur"] == true);
  REQUIRE(report["spectral"]["eigenvalues"].size() == 4);
  CHECK(std::abs(report["spectral"]["eigenvalues"][0].get<double>() + 0.5) < 1e-9);
  CHECK(std::abs(report["spectral"]["eigenvalues"][3].get<double>() - 0.5) < 1e-9);
}

TEST_CASE("cli: verify passes at a fine step and fails at a coarse one") {
  CHECK(run_tool("verify " + table1_path) == 0);  // defaults: dt 1e-4, 20 cycles
  CHECK(run_tool("verify " + table1_path + " --dt 1e-3 --cycles 5 --tol 5e-2") == 0);
  CHECK(run_tool("verify " + table1_path + " --dt 1e-1 --cycles 5 --tol 1e-4") == 1);
  CHECK(run_tool("verify " + table1_path + " --dt 1e-3 --cycles 0 --tol 1e-9") == 0);
}

TEST_CASE("cli: usage and config errors exit with code 2") {
  CHECK(run_tool("simulate /nonexistent.cfg") == 2);
  CHECK(run_tool("frobnicate") == 2);
  CHECK(run_tool("simulate") == 2);

  TempDir dir;
  const fs::path bad = dir.path / "bad.cfg";
  std::ofstream(bad) << "lambda = 100\n[node]\nalpha = 1\nbeta = 1.5\n";
  CHECK(run_tool("simulate " + bad.string()) == 2);
}

TEST_CASE("cli: stochastic runs are byte-identical for a fixed seed") {
  TempDir d1, d2;
  CHECK(run_tool("stochastic " + table1_path + " --seed 42 --horizon 20 --out " +
                 d1.path.string()) == 0);
  CHECK(run_tool("stochastic " + table1_path + " --seed 42 --horizon 20 --out " +
                 d2.path.string()) == 0);
  CHECK(slurp(d1.path / "cycles.csv") == slurp(d2.path / "cycles.csv"));
  CHECK(slurp(d1.path / "arrivals.csv") == slurp(d2.path / "arrivals.csv"));
  CHECK(slurp(d1.path / "report.json") == slurp(d2.path / "report.json"));

  const json report = json::parse(slurp(d1.path / "report.json"));
  CHECK(report["manifest"]["seed"] == 42);
  CHECK(report["arrival_count"].get<long>() > 1000);
}

TEST_CASE("cli: sweep over growth-rate scale keeps event-convergence nonincreasing") {
  TempDir dir;
  const int rc = run_tool("sweep " + table1_path +
                          " --param alpha_scale --range 1,2,4 --cycles 40 --out " +
                          dir.path.string());
  CHECK(rc == 0);
  const std::string csv = slurp(dir.path / "summary.csv");

  std::istringstream in(csv);
  std::string line;
  long prev_events = -1;
  double prev_time = -1.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("param,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 9);
    CHECK(cells[7] == "1");  // schur for every point
    const long events = std::stol(cells[4]);
    const double time = std::stod(cells[5]);
    if (rows > 0) {
      CHECK(events <= prev_events);
      CHECK(time <= prev_time);
    }
    prev_events = events;
    prev_time = time;
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("cli: sweep over beta keeps every point schur-stable") {
  TempDir dir;
  const int rc = run_tool("sweep " + table1_path +
                          " --param beta --range 0.1,0.3,0.5,0.7,0.9 --cycles 30 --out " +
                          dir.path.string());
  CHECK(rc == 0);
  const std::string csv = slurp(dir.path / "summary.csv");
  std::istringstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("param,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 9);
    CHECK(cells[7] == "1");  // schur column
    CHECK(std::stod(cells[6]) < 1.0);
    ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("cli: empty sweep range yields a header-only summary") {
  TempDir dir;
  const int rc = run_tool("sweep " + table1_path + " --param beta --range ,, --out " +
                          dir.path.string());
  CHECK(rc == 0);
  const std::string csv = slurp(dir.path / "summary.csv");
  CHECK(csv.find("param,value,") != std::string::npos);
  std::istringstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("param,", 0) != 0) ++rows;
  CHECK(rows == 0);
}
