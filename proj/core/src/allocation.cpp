#include "aimdq/allocation.hpp"

#include <algorithm>
#include <cmath>

namespace aimdq::allocation {

namespace {

double clamp_dust(double w, double scale) {
  const double tol = 1e-12 * std::max(1.0, scale);
  return (w > -tol && w < tol) ? 0.0 : w;
}

}  // namespace

AllocationDecision service_rate(double u_k, double w_k, const NodeParams& p) {
  if (w_k < 0.0) {
    w_k = clamp_dust(w_k, 1.0);
    if (w_k < 0.0) throw std::invalid_argument("service_rate: negative queue length");
  }
  AllocationDecision d;
  d.gamma = p.beta * u_k + std::sqrt(2.0 * p.alpha * w_k);
  d.t_z = std::sqrt(2.0 * w_k / p.alpha);
  return d;
}

double queue_update(double w_k, double u_k, double gamma, double T, const NodeParams& p) {
  const double next = w_k + (p.beta * u_k + 0.5 * p.alpha * T - gamma) * T;
  return clamp_dust(next, w_k + 0.5 * p.alpha * T * T);
}

InvariantSet invariant_set(double T, const NodeParams& p) {
  return InvariantSet{0.0, 0.5 * p.alpha * T * T};
}

EntryReport entry_step(std::span<const CycleSample> run, const NodeParams& p) {
  EntryReport rep;
  for (std::size_t k = 0; k < run.size(); ++k) {
    if (invariant_set(run[k].T, p).contains(run[k].w)) {
      rep.step = static_cast<long>(k);
      break;
    }
  }
  if (rep.step && *rep.step > 0) {
    const long ks = *rep.step;
    double min_t_sq = run[0].T * run[0].T;
    for (long j = 1; j < ks; ++j) min_t_sq = std::min(min_t_sq, run[j].T * run[j].T);
    const double w0 = run[0].w;
    const double t_entry = run[ks].T;
    const double denom = 0.5 * p.alpha * min_t_sq;
    rep.bound_linear = std::ceil((w0 - 0.5 * p.alpha * t_entry) / denom);
    rep.bound_squared = std::ceil((w0 - 0.5 * p.alpha * t_entry * t_entry) / denom);
  }
  return rep;
}

double admitted_cumulative(double tau, double w_k, double u_k, const NodeParams& p) {
  return w_k + p.beta * u_k * tau + 0.5 * p.alpha * tau * tau;
}

double served_cumulative(double tau, double gamma) { return gamma * tau; }

}  // namespace aimdq::allocation
