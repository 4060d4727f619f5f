#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aimdq/allocation.hpp"
#include "aimdq/engine.hpp"
#include "aimdq/io.hpp"
#include "aimdq/model.hpp"
#include "aimdq/spectral.hpp"

namespace fs = std::filesystem;
using namespace aimdq;

namespace {

fs::path resolve_out_dir(const std::string& cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char* env = std::getenv("AIMDQ_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  out << content;
}

struct Loaded {
  ValidatedConfig cfg;
  io::Manifest manifest;
};

Loaded load(const std::string& config_path, const std::string& subcommand,
            std::optional<std::uint64_t> seed = std::nullopt) {
  auto loaded = io::load_config_file(config_path);
  io::Manifest mf;
  mf.subcommand = subcommand;
  mf.config_hash = loaded.hash;
  mf.seed = seed;
  return Loaded{validate_config(loaded.config), std::move(mf)};
}

long events_to_converge(const std::vector<engine::CycleRecord>& records, const Equilibrium& eq,
                        double threshold) {
  double norm = 0.0;
  for (double v : eq.u_star) norm += v * v;
  norm = std::sqrt(norm);
  for (const engine::CycleRecord& rec : records) {
    double err = 0.0;
    for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
      const double d = rec.nodes[i].u - eq.u_star[i];
      err += d * d;
    }
    if (std::sqrt(err) / norm < threshold) return rec.k;
  }
  return -1;
}

int cmd_simulate(const std::string& config_path, long cycles, int trace_samples,
                 const std::string& out_dir_arg) {
  Loaded l = load(config_path, "simulate");
  l.manifest.outputs = {"cycles.csv", "trace.csv", "report.json"};
  const long K = cycles >= 0 ? cycles : l.cfg.config().max_cycles;
  const fs::path dir = resolve_out_dir(out_dir_arg);
  fs::create_directories(dir);

  const auto records = engine::run_deterministic(l.cfg, K);

  std::ostringstream cycles_csv;
  io::write_cycles_csv(cycles_csv, l.manifest, records);
  write_file(dir / "cycles.csv", cycles_csv.str());

  std::ostringstream trace_csv;
  std::vector<engine::TracePoint> all_points;
  if (trace_samples >= 2)
    for (const engine::CycleRecord& rec : records) {
      auto points = engine::reconstruct_trace(rec, l.cfg, trace_samples);
      all_points.insert(all_points.end(), points.begin(), points.end());
    }
  io::write_trace_csv(trace_csv, l.manifest, all_points, l.cfg.n());
  write_file(dir / "trace.csv", trace_csv.str());

  write_file(dir / "report.json", io::run_report_json(l.manifest, l.cfg, records));

  // re-read what we just wrote and re-check the row invariants
  std::ifstream back(dir / "cycles.csv");
  const auto check = io::validate_cycles_csv(back, l.cfg.lambda());
  if (!check.ok) {
    std::cerr << "post-write validation failed: " << check.message << "\n";
    return 1;
  }

  const Equilibrium eq = fixed_point(l.cfg);
  std::cout << "simulated " << records.size() << " cycles (config " << l.manifest.config_hash
            << ")\n";
  if (!records.empty())
    std::cout << "T(" << records.back().k << ") = " << io::format_double(records.back().T)
              << "  (T* = " << io::format_double(eq.t_star) << ")\n";
  std::cout << "wrote " << (dir / "cycles.csv").string() << ", " << (dir / "trace.csv").string()
            << ", " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_spectral(const std::string& config_path, const std::string& out_dir_arg) {
  Loaded l = load(config_path, "spectral");
  l.manifest.outputs = {"report.json"};
  const auto m = spectral::build_phi(l.cfg);
  const auto rep = spectral::schur_check(m);
  const fs::path dir = resolve_out_dir(out_dir_arg);
  fs::create_directories(dir);
  write_file(dir / "report.json", io::spectral_report_json(l.manifest, l.cfg, m, rep));

  std::cout << "spectral radius " << io::format_double(rep.spectral_radius) << ", "
            << (rep.schur ? "schur" : "NOT schur");
  if (rep.deflated > 0) std::cout << " (deflated " << rep.deflated << ")";
  std::cout << "\nwrote " << (dir / "report.json").string() << "\n";
  return rep.schur ? 0 : 1;
}

int cmd_verify(const std::string& config_path, double dt, long cycles, double tol) {
  Loaded l = load(config_path, "verify");
  const auto closed = engine::run_deterministic(l.cfg, cycles);
  const auto oracle = engine::run_oracle(l.cfg, dt, cycles);

  // deviation relative to the reference value, floored at one request
  // (or one request/second): queue lengths graze zero every other cycle,
  // where a pure relative measure is meaningless
  double worst = 0.0;
  std::string worst_what = "none";
  auto consider = [&](double a, double b, const std::string& what) {
    const double err = std::abs(a - b) / std::max(std::abs(b), 1.0);
    if (err > worst) {
      worst = err;
      worst_what = what;
    }
  };
  for (long k = 0; k < cycles; ++k) {
    const auto& c = closed[static_cast<std::size_t>(k)];
    const auto& o = oracle[static_cast<std::size_t>(k)];
    consider(o.T, c.T, "T(" + std::to_string(k) + ")");
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
      consider(o.nodes[i].u, c.nodes[i].u, "u(" + std::to_string(k) + ") node " + std::to_string(i + 1));
      consider(o.nodes[i].w, c.nodes[i].w, "w(" + std::to_string(k) + ") node " + std::to_string(i + 1));
    }
  }
  std::cout << "max relative deviation " << io::format_double(worst) << " at " << worst_what
            << " over " << cycles << " cycles (dt = " << io::format_double(dt) << ")\n";
  if (worst > tol) {
    std::cout << "FAIL: exceeds tolerance " << io::format_double(tol) << "\n";
    return 1;
  }
  std::cout << "within tolerance " << io::format_double(tol) << "\n";
  return 0;
}

int cmd_stochastic(const std::string& config_path, std::uint64_t seed, double horizon,
                   const std::string& out_dir_arg) {
  Loaded l = load(config_path, "stochastic", seed);
  l.manifest.outputs = {"cycles.csv", "arrivals.csv", "report.json"};
  engine::StochasticConfig sc{seed, horizon};
  const auto run = engine::run_stochastic(l.cfg, sc);
  const fs::path dir = resolve_out_dir(out_dir_arg);
  fs::create_directories(dir);

  std::ostringstream cycles_csv;
  io::write_cycles_csv(cycles_csv, l.manifest, run.cycles);
  write_file(dir / "cycles.csv", cycles_csv.str());
  std::ostringstream arrivals_csv;
  io::write_arrivals_csv(arrivals_csv, l.manifest, run.arrivals);
  write_file(dir / "arrivals.csv", arrivals_csv.str());
  write_file(dir / "report.json", io::stochastic_report_json(l.manifest, l.cfg, sc, run));

  std::cout << run.arrivals.size() << " arrivals, " << run.cycles.size() << " cycles over "
            << io::format_double(horizon) << " s (seed " << seed << ")\n";
  if (!run.cycles.empty())
    std::cout << "mean cycle period " << io::format_double(run.mean_cycle_period)
              << "  (T* = " << io::format_double(fixed_point(l.cfg).t_star) << ")\n";
  std::cout << "wrote " << (dir / "cycles.csv").string() << ", "
            << (dir / "arrivals.csv").string() << ", " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::string& range, long cycles, const std::string& out_dir_arg) {
  Loaded l = load(config_path, "sweep");

  std::vector<double> values;
  std::stringstream ss(range);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("sweep range value is not a number: '" + cell + "'");
    }
  }

  std::vector<SystemConfig> configs;
  for (double v : values) {
    SystemConfig c = l.cfg.config();
    if (param == "alpha_scale") {
      for (NodeParams& p : c.nodes) p.alpha *= v;
    } else if (param == "beta") {
      for (NodeParams& p : c.nodes) p.beta = v;
    } else if (param == "lambda") {
      c.lambda = v;
    } else {
      throw ConfigError("unknown sweep parameter '" + param +
                        "' (expected alpha_scale, beta or lambda)");
    }
    validate_config(c);  // reject bad points before launching the batch
    configs.push_back(std::move(c));
  }

  const long K = cycles >= 0 ? cycles : l.cfg.config().max_cycles;
  const auto runs = engine::run_batch(configs, K);

  const fs::path dir = resolve_out_dir(out_dir_arg);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "# " << io::tool_name << " " << io::tool_version << " sweep\n";
  csv << "# config_hash: " << l.manifest.config_hash << "\n";
  csv << "param,value,t_star,t_star_empirical,events_to_converge,time_to_converge,"
         "spectral_radius,schur,max_conservation_residual\n";
  for (std::size_t p = 0; p < configs.size(); ++p) {
    const ValidatedConfig vc = validate_config(configs[p]);
    const Equilibrium eq = fixed_point(vc);
    const auto& records = runs[p];
    const auto rep = spectral::schur_check(spectral::build_phi(vc));
    const long conv = events_to_converge(records, eq, 0.05);

    double max_residual = 0.0;
    std::vector<double> u_av(vc.n());
    for (const engine::CycleRecord& rec : records) {
      for (std::size_t i = 0; i < vc.n(); ++i) u_av[i] = rec.nodes[i].metrics.u_av;
      max_residual = std::max(max_residual, metrics::throughput_conservation(u_av, vc.lambda()));
    }

    csv << param << ',' << io::format_double(values[p]) << ','
        << io::format_double(eq.t_star) << ','
        << (records.empty() ? "" : io::format_double(records.back().T)) << ','
        << (conv >= 0 ? std::to_string(conv) : "") << ','
        << (conv >= 0 ? io::format_double(records[static_cast<std::size_t>(conv)].t_start) : "")
        << ',' << io::format_double(rep.spectral_radius) << ',' << (rep.schur ? 1 : 0) << ','
        << io::format_double(max_residual) << '\n';
  }
  write_file(dir / "summary.csv", csv.str());
  std::cout << "swept " << param << " over " << values.size() << " values, wrote "
            << (dir / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AIMD admission control and resource allocation simulator"};
  app.set_version_flag("--version", std::string(io::tool_version));
  app.require_subcommand(1);

  std::string config_path, out_dir, param, range;
  long cycles = -1;
  int trace_samples = 50;
  double dt = 1e-4, tol = 5e-2, horizon = 100.0;
  std::uint64_t seed = 1;

  auto* sim = app.add_subcommand("simulate", "run the event-driven simulation, write CSV/JSON");
  sim->add_option("config", config_path, "config file")->required();
  sim->add_option("--cycles", cycles, "number of cycles (default: max_cycles from the config)");
  sim->add_option("--trace-samples", trace_samples, "samples per cycle in trace.csv (0 = none)");
  sim->add_option("--out", out_dir, "output directory (default: $AIMDQ_OUT_DIR or .)");

  auto* spec_cmd = app.add_subcommand("spectral", "stability certificate for the aggregate map");
  spec_cmd->add_option("config", config_path, "config file")->required();
  spec_cmd->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "cross-check the closed forms against the ODE oracle");
  verify->add_option("config", config_path, "config file")->required();
  verify->add_option("--dt", dt, "oracle integrator step, seconds");
  verify->add_option("--cycles", cycles, "cycles to compare")->default_val(20);
  verify->add_option("--tol", tol, "max deviation accepted (relative, floored at 1 request)");

  auto* stoch = app.add_subcommand("stochastic", "seeded run with exponential inter-arrivals");
  stoch->add_option("config", config_path, "config file")->required();
  stoch->add_option("--seed", seed, "RNG seed");
  stoch->add_option("--horizon", horizon, "simulated time, seconds");
  stoch->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep, write summary.csv");
  sweep->add_option("config", config_path, "base config file")->required();
  sweep->add_option("--param", param, "alpha_scale | beta | lambda")->required();
  sweep->add_option("--range", range, "comma-separated values")->required();
  sweep->add_option("--cycles", cycles, "cycles per run");
  sweep->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, sim->count("--cycles") ? cycles : -1, trace_samples,
                          out_dir);
    if (spec_cmd->parsed()) return cmd_spectral(config_path, out_dir);
    if (verify->parsed()) return cmd_verify(config_path, dt, cycles, tol);
    if (stoch->parsed()) return cmd_stochastic(config_path, seed, horizon, out_dir);
    if (sweep->parsed())
      return cmd_sweep(config_path, param, range, sweep->count("--cycles") ? cycles : -1, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
