#include "aimdq/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aimdq/allocation.hpp"

namespace aimdq::io {

using nlohmann::json;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string trim(std::string_view s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string_view::npos) return {};
  const auto to = s.find_last_not_of(" \t\r");
  return std::string(s.substr(from, to - from + 1));
}

double parse_number(const std::string& value, const std::string& key, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size())
    throw ConfigError("config line " + std::to_string(line_no) + ": value for '" + key +
                      "' is not a number: '" + value + "'");
  return v;
}

}  // namespace

SystemConfig parse_config(std::istream& in) {
  SystemConfig cfg;
  cfg.lambda = 0.0;
  NodeParams* current = nullptr;
  std::string line;
  int line_no = 0;
  bool saw_lambda = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text != "[node]")
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section '" +
                          text + "'");
      cfg.nodes.emplace_back();
      current = &cfg.nodes.back();
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));

    if (current == nullptr) {
      if (key == "lambda") {
        cfg.lambda = parse_number(value, key, line_no);
        saw_lambda = true;
      } else if (key == "max_cycles") {
        cfg.max_cycles = static_cast<int>(parse_number(value, key, line_no));
      } else if (key == "negative_cycle_policy") {
        if (value == "error")
          cfg.negative_cycle_policy = NegativeCyclePolicy::error;
        else if (value == "repeat-backoff")
          cfg.negative_cycle_policy = NegativeCyclePolicy::repeat_backoff;
        else
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": negative_cycle_policy must be 'error' or 'repeat-backoff'");
      } else {
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                          "'");
      }
    } else {
      if (key == "alpha")
        current->alpha = parse_number(value, key, line_no);
      else if (key == "beta")
        current->beta = parse_number(value, key, line_no);
      else if (key == "u0")
        current->u0 = parse_number(value, key, line_no);
      else if (key == "w0")
        current->w0 = parse_number(value, key, line_no);
      else
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown node key '" +
                          key + "'");
    }
  }
  if (!saw_lambda) throw ConfigError("config is missing the 'lambda' key");
  return cfg;
}

SystemConfig parse_config_file(const std::string& path) { return load_config_file(path).config; }

LoadedConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::istringstream stream(bytes);
  return LoadedConfig{parse_config(stream), fnv1a_hex(bytes)};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

void write_manifest_comment(std::ostream& out, const Manifest& mf) {
  out << "# " << tool_name << " " << tool_version << " " << mf.subcommand << "\n";
  out << "# config_hash: " << mf.config_hash << "\n";
  if (mf.seed) out << "# seed: " << *mf.seed << "\n";
  if (!mf.outputs.empty()) {
    out << "# outputs:";
    for (const std::string& name : mf.outputs) out << ' ' << name;
    out << "\n";
  }
}

json manifest_json(const Manifest& mf) {
  json j;
  j["tool"] = tool_name;
  j["version"] = tool_version;
  j["subcommand"] = mf.subcommand;
  j["config_hash"] = mf.config_hash;
  if (mf.seed) j["seed"] = *mf.seed;
  if (!mf.outputs.empty()) j["outputs"] = mf.outputs;
  return j;
}

json config_json(const ValidatedConfig& cfg) {
  json j;
  j["lambda"] = cfg.lambda();
  j["max_cycles"] = cfg.config().max_cycles;
  j["negative_cycle_policy"] =
      cfg.config().negative_cycle_policy == NegativeCyclePolicy::error ? "error"
                                                                       : "repeat-backoff";
  json nodes = json::array();
  for (const NodeParams& p : cfg.nodes())
    nodes.push_back({{"alpha", p.alpha}, {"beta", p.beta}, {"u0", p.u0}, {"w0", p.w0}});
  j["nodes"] = std::move(nodes);
  j["alpha_bar"] = cfg.alpha_bar();
  return j;
}

json spectral_json_body(const spectral::AggregateMatrix& m, const spectral::SpectralReport& rep) {
  json j;
  j["eigenvalues"] = rep.eigenvalues;
  json brackets = json::array();
  for (const auto& b : rep.brackets) brackets.push_back({b.lo, b.hi});
  j["brackets"] = std::move(brackets);
  j["z"] = rep.z;
  j["spectral_radius"] = rep.spectral_radius;
  j["schur"] = rep.schur;
  j["det_residual"] = rep.det_residual;
  j["interlacing_ok"] = rep.interlacing_ok;
  j["det_identity_ok"] = rep.det_identity_ok;
  j["structure_ok"] = rep.structure_ok;
  j["deflated"] = rep.deflated;
  json phi = json::array();
  for (std::size_t i = 0; i < m.phi.n; ++i) {
    json row = json::array();
    for (std::size_t c = 0; c < m.phi.n; ++c) row.push_back(m.phi.at(i, c));
    phi.push_back(std::move(row));
  }
  j["phi"] = std::move(phi);
  j["beta"] = m.beta;
  j["alpha_bar"] = m.alpha_bar;
  return j;
}

}  // namespace

void write_cycles_csv(std::ostream& out, const Manifest& mf,
                      const std::vector<engine::CycleRecord>& records) {
  write_manifest_comment(out, mf);
  out << "k,t_start,T,node,u,gamma,w,u_av,w_av,t_delta,t_w,t_total\n";
  for (const engine::CycleRecord& rec : records) {
    for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
      const engine::NodeCycle& nc = rec.nodes[i];
      out << rec.k << ',' << format_double(rec.t_start) << ',' << format_double(rec.T) << ','
          << (i + 1) << ',' << format_double(nc.u) << ',' << format_double(nc.gamma) << ','
          << format_double(nc.w) << ',' << format_double(nc.metrics.u_av) << ','
          << format_double(nc.metrics.w_av) << ',' << format_double(nc.metrics.t_delta) << ','
          << format_double(nc.metrics.t_w) << ',' << format_double(nc.metrics.t_total) << '\n';
    }
  }
}

void write_trace_csv(std::ostream& out, const Manifest& mf,
                     const std::vector<engine::TracePoint>& points, std::size_t n_nodes) {
  write_manifest_comment(out, mf);
  out << "t,node,u_tau,w_tau,delta_i_tau\n";
  for (const engine::TracePoint& pt : points) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      out << format_double(pt.t) << ',' << (i + 1) << ',' << format_double(pt.u[i]) << ','
          << format_double(pt.w[i]) << ',' << format_double(pt.delta_i[i]) << '\n';
    }
  }
}

void write_arrivals_csv(std::ostream& out, const Manifest& mf,
                        const std::vector<double>& arrivals) {
  write_manifest_comment(out, mf);
  out << "t\n";
  for (double t : arrivals) out << format_double(t) << '\n';
}

std::string run_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                            const std::vector<engine::CycleRecord>& records) {
  const std::size_t n = cfg.n();
  json j;
  j["manifest"] = manifest_json(mf);
  j["config"] = config_json(cfg);
  j["cycles"] = records.size();

  const Equilibrium eq = fixed_point(cfg);
  j["fixed_point"] = {{"t_star", eq.t_star}, {"u_star", eq.u_star}, {"w_star", eq.w_star}};

  if (!records.empty()) {
    j["t_star_empirical"] = records.back().T;

    double u_star_norm = 0.0;
    for (double v : eq.u_star) u_star_norm += v * v;
    u_star_norm = std::sqrt(u_star_norm);
    long converged_at = -1;
    for (const engine::CycleRecord& rec : records) {
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = rec.nodes[i].u - eq.u_star[i];
        err += d * d;
      }
      if (std::sqrt(err) / u_star_norm < 0.05) {
        converged_at = rec.k;
        break;
      }
    }
    if (converged_at >= 0) {
      j["convergence"] = {{"events_to_converge", converged_at},
                          {"time_to_converge", records[static_cast<std::size_t>(converged_at)].t_start},
                          {"threshold", 0.05}};
    } else {
      j["convergence"] = {{"events_to_converge", nullptr}, {"threshold", 0.05}};
    }

    double max_residual = 0.0;
    std::vector<double> u_av(n);
    for (const engine::CycleRecord& rec : records) {
      for (std::size_t i = 0; i < n; ++i) u_av[i] = rec.nodes[i].metrics.u_av;
      max_residual = std::max(max_residual, metrics::throughput_conservation(u_av, cfg.lambda()));
    }
    j["conservation_max_residual"] = max_residual;

    json sets = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<allocation::CycleSample> samples;
      samples.reserve(records.size());
      for (const engine::CycleRecord& rec : records)
        samples.push_back({rec.nodes[i].w, rec.T});
      const auto entry = allocation::entry_step(samples, cfg.node(i));
      json s;
      s["upper_at_t_star"] = allocation::invariant_set(eq.t_star, cfg.node(i)).upper;
      s["entry_step"] = entry.step ? json(*entry.step) : json(nullptr);
      s["entry_bound_linear"] = entry.bound_linear;
      s["entry_bound_squared"] = entry.bound_squared;
      sets.push_back(std::move(s));
    }
    j["invariant_sets"] = std::move(sets);
  } else {
    j["t_star_empirical"] = nullptr;
  }

  const auto m = spectral::build_phi(cfg);
  j["spectral"] = spectral_json_body(m, spectral::schur_check(m));
  return j.dump(2) + "\n";
}

std::string spectral_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                                 const spectral::AggregateMatrix& m,
                                 const spectral::SpectralReport& rep) {
  json j;
  j["manifest"] = manifest_json(mf);
  j["config"] = config_json(cfg);
  j["spectral"] = spectral_json_body(m, rep);
  return j.dump(2) + "\n";
}

std::string stochastic_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                                   const engine::StochasticConfig& sc,
                                   const engine::StochasticRun& run) {
  json j;
  j["manifest"] = manifest_json(mf);
  j["config"] = config_json(cfg);
  j["horizon"] = sc.horizon;
  j["arrival_count"] = run.arrivals.size();
  if (run.arrivals.size() > 1) {
    j["mean_interarrival"] = run.arrivals.back() / static_cast<double>(run.arrivals.size());
  }
  j["cycle_count"] = run.cycles.size();
  if (!run.cycles.empty()) {
    j["mean_cycle_period"] = run.mean_cycle_period;
    j["time_avg_cycle_period"] = run.time_avg_cycle_period;
  }
  j["t_star_reference"] = fixed_point(cfg).t_star;
  return j.dump(2) + "\n";
}

CsvCheck validate_cycles_csv(std::istream& in, double lambda) {
  std::string line;
  bool header_seen = false;
  long row_no = 0;
  double prev_t_start = -1.0;
  long current_k = -1;
  double u_av_sum = 0.0;
  bool have_cycle = false;

  auto fail = [](long row, const std::string& why) {
    return CsvCheck{false, "cycles.csv row " + std::to_string(row) + ": " + why};
  };
  auto check_cycle = [&]() -> std::optional<CsvCheck> {
    if (have_cycle && std::abs(u_av_sum - lambda) > 1e-9 * lambda)
      return CsvCheck{false, "cycle " + std::to_string(current_k) +
                                 ": sum of average admission rates " + format_double(u_av_sum) +
                                 " does not conserve lambda"};
    return std::nullopt;
  };

  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "k,t_start,T,node,u,gamma,w,u_av,w_av,t_delta,t_w,t_total")
        return CsvCheck{false, "unexpected cycles.csv header: " + line};
      header_seen = true;
      continue;
    }
    ++row_no;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        f.push_back(std::stod(cell, &used));
        if (used != cell.size()) return fail(row_no, "malformed number '" + cell + "'");
      } catch (const std::exception&) {
        return fail(row_no, "malformed number '" + cell + "'");
      }
    }
    if (f.size() != 12) return fail(row_no, "expected 12 columns");

    const long k = static_cast<long>(f[0]);
    const double t_start = f[1], T = f[2], u = f[4], gamma = f[5], w = f[6], u_av = f[7];
    if (!(T > 0.0)) return fail(row_no, "cycle period must be positive");
    if (u < 0.0 || gamma < 0.0 || w < 0.0) return fail(row_no, "negative rate or queue value");
    if (k != current_k) {
      if (auto bad = check_cycle()) return *bad;
      if (have_cycle && t_start < prev_t_start) return fail(row_no, "event times go backwards");
      current_k = k;
      prev_t_start = t_start;
      u_av_sum = 0.0;
      have_cycle = true;
    }
    u_av_sum += u_av;
  }
  if (!header_seen) return CsvCheck{false, "cycles.csv has no header"};
  if (auto bad = check_cycle()) return *bad;
  return CsvCheck{};
}

}  // namespace aimdq::io
