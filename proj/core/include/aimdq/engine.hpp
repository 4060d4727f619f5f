#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aimdq/metrics.hpp"
#include "aimdq/model.hpp"

namespace aimdq::engine {

struct NodeCycle {
  double u = 0.0;      // admission-rate peak at cycle start (before backoff)
  double gamma = 0.0;  // service rate held through the cycle
  double w = 0.0;      // node queue at cycle start
  metrics::CycleMetrics metrics;
};

struct CycleRecord {
  long k = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double T = 0.0;  // t_end - t_start
  std::vector<NodeCycle> nodes;
  int backoff_repeats = 0;  // zero-duration backoffs applied before this cycle
};

// One sample of the intra-cycle continuous-time reconstruction.
struct TracePoint {
  double t = 0.0;
  std::vector<double> u;        // admission rate per node
  std::vector<double> w;        // node queue per node
  std::vector<double> delta_i;  // batch-queue share per node
  double delta = 0.0;           // aggregate batch queue
};

struct StochasticConfig {
  std::uint64_t seed = 1;
  double horizon = 100.0;  // seconds, > 0
};

// Event-driven closed-form simulation. Each cycle computes, in order: the
// cycle period, per-node service rates (reading the pre-update queue), the
// queue updates, and the admission updates. A non-positive period is handled
// per the config policy: `error` throws NonPositiveCycleError,
// `repeat_backoff` applies zero-duration backoffs until the period is
// positive, counting them in backoff_repeats.
std::vector<CycleRecord> run_deterministic(const ValidatedConfig& cfg, long cycles);

// Uniform tau-grid over [0, T] with `samples` points (>= 2); closed-form
// u(tau), w(tau) and batch shares. Endpoints stitch to the adjacent events.
std::vector<TracePoint> reconstruct_trace(const CycleRecord& rec, const ValidatedConfig& cfg,
                                          int samples);

// Independent continuous-time check: forward-Euler integration of
//   d/dt delta = lambda - sum u_i(t),  d/dt w_i = u_i(t) - gamma_i,
// with the clearance event located by linear interpolation of the sign
// change of delta. Returns records comparable to run_deterministic.
std::vector<CycleRecord> run_oracle(const ValidatedConfig& cfg, double dt, long cycles);

struct StochasticRun {
  std::vector<CycleRecord> cycles;
  std::vector<double> arrivals;        // absolute arrival times, seconds
  double time_avg_cycle_period = 0.0;  // duration-weighted mean of T(k)
  double mean_cycle_period = 0.0;      // plain mean of T(k)
};

// Empirical mode: unit requests arrive with seeded exponential inter-arrival
// gaps, the batch queue drains at the (gated) aggregate admission rate, and
// the clearance event fires whenever the batch queue empties strictly before
// the next arrival. Deterministic given the seed. No analytical guarantees
// are claimed for this mode.
StochasticRun run_stochastic(const ValidatedConfig& cfg, const StochasticConfig& sc);

// Independent runs share nothing; execute them concurrently and return
// results in input order.
std::vector<std::vector<CycleRecord>> run_batch(std::span<const SystemConfig> configs, long cycles);

}  // namespace aimdq::engine
