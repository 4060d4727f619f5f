#pragma once

#include <optional>
#include <span>

#include "aimdq/model.hpp"

namespace aimdq::allocation {

// Service rate for cycle k and the time at which the served line is tangent
// to the admitted curve.
struct AllocationDecision {
  double gamma = 0.0;  // requests/s
  double t_z = 0.0;    // seconds from cycle start
};

// Per-cycle queue bound [0, (alpha/2) T^2].
struct InvariantSet {
  double lower = 0.0;
  double upper = 0.0;

  // closed-interval membership with 1e-12 absolute slack
  bool contains(double w) const { return w >= lower - 1e-12 && w <= upper + 1e-12; }
};

// gamma = beta u_k + sqrt(2 alpha w_k), t_z = sqrt(2 w_k / alpha).
// Queue dust below 1e-12 is treated as exactly zero.
AllocationDecision service_rate(double u_k, double w_k, const NodeParams& p);

// w(k+1) = w_k + (beta u_k + (alpha/2) T - gamma) T. With gamma from
// service_rate this is w_k + (alpha/2) T^2 - sqrt(2 alpha w_k) T, which is
// nonnegative for every w_k >= 0; rounding dust is clamped to zero.
double queue_update(double w_k, double u_k, double gamma, double T, const NodeParams& p);

InvariantSet invariant_set(double T, const NodeParams& p);

// One per-cycle observation of a node queue and the cycle period it saw.
struct CycleSample {
  double w = 0.0;
  double T = 0.0;
};

struct EntryReport {
  // smallest k with w(k) inside [0, (alpha/2) T(k)^2]; empty when the
  // horizon was exhausted without entering
  std::optional<long> step;
  // a-priori guarantee evaluated post hoc, in two variants: numerator term
  // (alpha/2) T(k*) as printed, and the dimensionally consistent
  // (alpha/2) T(k*)^2; both use min_j<k* T(j)^2 in the denominator
  double bound_linear = 0.0;
  double bound_squared = 0.0;
};

EntryReport entry_step(std::span<const CycleSample> run, const NodeParams& p);

// Cumulative admitted and served request counts during a cycle:
// y(tau) = w_k + beta u_k tau + (alpha/2) tau^2 and z(tau) = gamma tau.
// y >= z throughout, with equality exactly at t_z when t_z <= T.
double admitted_cumulative(double tau, double w_k, double u_k, const NodeParams& p);
double served_cumulative(double tau, double gamma);

}  // namespace aimdq::allocation
