#include "aimdq/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace aimdq {

ValidatedConfig validate_config(const SystemConfig& cfg) {
  std::ostringstream errors;
  bool bad = false;
  auto fail = [&](const std::string& line) {
    if (bad) errors << '\n';
    errors << line;
    bad = true;
  };

  if (cfg.nodes.empty()) fail("config must declare at least one node");
  if (!(cfg.lambda > 0.0)) fail("lambda must be strictly positive");
  if (cfg.max_cycles < 1) fail("max_cycles must be a positive integer");

  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    const NodeParams& p = cfg.nodes[i];
    const std::string where = "node " + std::to_string(i + 1) + ": ";
    if (!(p.alpha > 0.0)) fail(where + "growth rate alpha must be strictly positive");
    if (!(p.beta > 0.0 && p.beta < 1.0)) fail(where + "backoff must lie in open interval (0,1)");
    if (!(p.u0 >= 0.0)) fail(where + "initial admission rate u0 must be nonnegative");
    if (!(p.w0 >= 0.0)) fail(where + "initial queue length w0 must be nonnegative");
  }

  if (!bad && cfg.negative_cycle_policy == NegativeCyclePolicy::error) {
    double backed_off = 0.0;
    for (const NodeParams& p : cfg.nodes) backed_off += p.beta * p.u0;
    if (!(cfg.lambda > backed_off)) {
      std::ostringstream os;
      os << "infeasible initial state: lambda = " << cfg.lambda
         << " must exceed sum beta_i*u_i(0) = " << backed_off
         << " under the error policy";
      fail(os.str());
    }
  }

  if (bad) throw ConfigError(errors.str());

  ValidatedConfig v;
  v.cfg_ = cfg;
  v.sum_alpha_ = 0.0;
  for (const NodeParams& p : cfg.nodes) v.sum_alpha_ += p.alpha;
  v.alpha_bar_.reserve(cfg.nodes.size());
  for (const NodeParams& p : cfg.nodes) v.alpha_bar_.push_back(p.alpha / v.sum_alpha_);
  return v;
}

double cycle_period(std::span<const double> u, const ValidatedConfig& cfg) {
  if (u.size() != cfg.n())
    throw std::invalid_argument("cycle_period: rate vector size does not match config");
  double backed_off = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) backed_off += cfg.node(i).beta * u[i];
  return (cfg.lambda() - backed_off) / cfg.half_sum_alpha();
}

double admission_update(double u_k, double T, const NodeParams& p) {
  return p.beta * u_k + p.alpha * T;
}

double admission_rate_at(double tau, double u_k, const NodeParams& p) {
  if (tau < 0.0) throw std::invalid_argument("admission_rate_at: tau must be nonnegative");
  return p.beta * u_k + p.alpha * tau;
}

double average_admission_rate(double u_k, double T, const NodeParams& p) {
  return p.beta * u_k + 0.5 * p.alpha * T;
}

Equilibrium fixed_point(const ValidatedConfig& cfg) {
  double denom = 0.0;
  for (const NodeParams& p : cfg.nodes())
    denom += 0.5 * p.alpha * (1.0 + p.beta) / (1.0 - p.beta);
  Equilibrium eq;
  eq.t_star = cfg.lambda() / denom;
  eq.u_star.reserve(cfg.n());
  eq.w_star.reserve(cfg.n());
  for (const NodeParams& p : cfg.nodes()) {
    eq.u_star.push_back(p.alpha / (1.0 - p.beta) * eq.t_star);
    eq.w_star.push_back(p.alpha * eq.t_star * eq.t_star / 8.0);
  }
  return eq;
}

}  // namespace aimdq
