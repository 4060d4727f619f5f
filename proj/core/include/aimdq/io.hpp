#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aimdq/engine.hpp"
#include "aimdq/model.hpp"
#include "aimdq/spectral.hpp"

namespace aimdq::io {

inline constexpr std::string_view tool_name = "aimdq";
inline constexpr std::string_view tool_version = "0.1.0";

// Provenance block embedded at the top of every output file.
struct Manifest {
  std::string subcommand;
  std::string config_hash;  // FNV-1a of the config file bytes, hex
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;  // file names written by the run
};

std::string fnv1a_hex(std::string_view bytes);

// Flat key-value format with one [node] section per node. '#' starts a
// comment. Global keys: lambda, max_cycles, negative_cycle_policy
// (error | repeat-backoff). Node keys: alpha, beta, u0, w0.
SystemConfig parse_config(std::istream& in);
SystemConfig parse_config_file(const std::string& path);

// Reads the file once for both parsing and hashing.
struct LoadedConfig {
  SystemConfig config;
  std::string hash;
};
LoadedConfig load_config_file(const std::string& path);

// 12 significant digits, '.' decimal separator
std::string format_double(double v);

void write_cycles_csv(std::ostream& out, const Manifest& mf,
                      const std::vector<engine::CycleRecord>& records);
void write_trace_csv(std::ostream& out, const Manifest& mf,
                     const std::vector<engine::TracePoint>& points, std::size_t n_nodes);
void write_arrivals_csv(std::ostream& out, const Manifest& mf,
                        const std::vector<double>& arrivals);

// report.json for a deterministic run: manifest, config echo, fixed point,
// empirical convergence figures, invariant-set summary, spectral certificate.
std::string run_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                            const std::vector<engine::CycleRecord>& records);

std::string spectral_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                                 const spectral::AggregateMatrix& m,
                                 const spectral::SpectralReport& rep);

std::string stochastic_report_json(const Manifest& mf, const ValidatedConfig& cfg,
                                   const engine::StochasticConfig& sc,
                                   const engine::StochasticRun& run);

// Re-reads an emitted cycles.csv and re-checks the row invariants:
// positive periods, nonnegative rates and queues, nondecreasing event times
// and per-cycle throughput conservation against lambda.
struct CsvCheck {
  bool ok = true;
  std::string message;
};
CsvCheck validate_cycles_csv(std::istream& in, double lambda);

}  // namespace aimdq::io
