#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimdq {

// Per-node AIMD tuning and initial state.
struct NodeParams {
  double alpha = 1.0;  // growth rate, requests/s^2, > 0
  double beta = 0.5;   // backoff factor, in (0,1)
  double u0 = 0.0;     // initial admission rate, requests/s, >= 0
  double w0 = 0.0;     // initial node queue length, requests, >= 0
};

// What to do when the backed-off admission rates already exceed lambda
// (cycle period would be <= 0).
enum class NegativeCyclePolicy { error, repeat_backoff };

struct SystemConfig {
  double lambda = 1.0;  // arrival rate, requests/s, > 0
  std::vector<NodeParams> nodes;
  NegativeCyclePolicy negative_cycle_policy = NegativeCyclePolicy::repeat_backoff;
  int max_cycles = 1000;
};

struct NodeState {
  double u = 0.0;      // admission rate at event k (peak, before backoff), requests/s
  double w = 0.0;      // queued requests at event k
  double gamma = 0.0;  // service rate chosen for cycle k, requests/s
};

// Snapshot at a clearance event. The batch queue is empty at every event
// by construction; `delta` exists so the invariant is visible in traces.
struct SystemState {
  long k = 0;
  double t = 0.0;  // wall-clock time of event k, seconds
  std::vector<NodeState> nodes;
  double delta = 0.0;
};

struct Equilibrium {
  double t_star = 0.0;          // limiting cycle period, seconds
  std::vector<double> u_star;   // limiting admission rates, requests/s
  std::vector<double> w_star;   // limiting node queue lengths, requests
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class NonPositiveCycleError : public std::runtime_error {
 public:
  NonPositiveCycleError(long cycle, double period)
      : std::runtime_error("cycle period is not positive at event " + std::to_string(cycle) +
                           " (T = " + std::to_string(period) + ")"),
        cycle(cycle),
        period(period) {}
  long cycle;
  double period;
};

// A SystemConfig that passed validation, with the normalized growth vector
// cached. Only obtainable through validate_config().
class ValidatedConfig {
 public:
  const SystemConfig& config() const { return cfg_; }
  std::size_t n() const { return cfg_.nodes.size(); }
  double lambda() const { return cfg_.lambda; }
  const NodeParams& node(std::size_t i) const { return cfg_.nodes[i]; }
  const std::vector<NodeParams>& nodes() const { return cfg_.nodes; }

  // alpha / sum(alpha); sums to 1
  const std::vector<double>& alpha_bar() const { return alpha_bar_; }
  double sum_alpha() const { return sum_alpha_; }
  double half_sum_alpha() const { return 0.5 * sum_alpha_; }

 private:
  friend ValidatedConfig validate_config(const SystemConfig& cfg);
  SystemConfig cfg_;
  std::vector<double> alpha_bar_;
  double sum_alpha_ = 0.0;
};

// Checks every type invariant and, under the `error` policy, feasibility of
// the initial state (lambda > sum beta_i u_i(0)). Throws ConfigError with one
// line per violation, each naming the offending node index.
ValidatedConfig validate_config(const SystemConfig& cfg);

// T(k) = (lambda - sum beta_i u_i(k)) / (sum alpha_i / 2). `u` holds the
// per-node peak admission rates at event k. The result may be <= 0; callers
// decide how to handle that per NegativeCyclePolicy.
double cycle_period(std::span<const double> u, const ValidatedConfig& cfg);

// u_i(k+1) = beta_i u_i(k) + alpha_i T(k)
double admission_update(double u_k, double T, const NodeParams& p);

// Intra-cycle ramp u_i(tau) = beta_i u_i(k) + alpha_i tau, tau measured from
// the cycle start. Negative tau is rejected.
double admission_rate_at(double tau, double u_k, const NodeParams& p);

// u_av_i(k) = beta_i u_i(k) + (alpha_i / 2) T(k); equals the time average of
// the ramp over the cycle. Summed over nodes it equals lambda.
double average_admission_rate(double u_k, double T, const NodeParams& p);

// Limiting cycle period, admission rates and node queue lengths:
//   T*   = lambda / sum_j (alpha_j/2)(1+beta_j)/(1-beta_j)
//   u*_i = alpha_i/(1-beta_i) T*
//   w*_i = alpha_i T*^2 / 8
Equilibrium fixed_point(const ValidatedConfig& cfg);

}  // namespace aimdq
