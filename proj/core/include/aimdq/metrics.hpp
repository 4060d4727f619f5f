#pragma once

#include <span>

#include "aimdq/model.hpp"

namespace aimdq::metrics {

// Per-cycle queueing figures for one node. t_total = t_delta + t_w and
// equals w_av / u_av (Little's-Law form) by construction.
struct CycleMetrics {
  double u_av = 0.0;     // average admission rate over the cycle, requests/s
  double w_av = 0.0;     // (w(k) + w(k+1)) / 2, requests
  double t_delta = 0.0;  // waiting attributed to the batch queue, seconds
  double t_w = 0.0;      // waiting in the node queue, seconds
  double t_total = 0.0;  // seconds
};

// Average wait over [0, t_end] from cumulative arrival/departure traces:
// integral of (arrivals - departures) divided by arrivals(t_end), trapezoid
// quadrature on the sample grid. Arrivals must be nondecreasing and
// departures must never exceed arrivals. Signals std::domain_error when no
// request arrived.
double generic_queueing_time(std::span<const double> t, std::span<const double> arrivals,
                             std::span<const double> departures);

// Requests parked in the batch queue destined for this node at offset tau
// into the cycle: u_av tau - beta u_k tau - (alpha/2) tau^2. Vanishes at
// both cycle ends, peaks at (alpha/8) T^2 when tau = T/2.
double batch_share_trace(double tau, double u_k, double u_av, const NodeParams& p);

// Little's-Law total: (w_k + w_k1) / (2 u_av). Signals std::domain_error
// when u_av is not positive.
double queueing_time(double w_k, double w_k1, double u_av);

// Full per-cycle metrics; the component integrals are evaluated in closed
// form (the integrands are polynomials in tau). w(k+1) is derived from the
// queue dynamics with the supplied gamma.
CycleMetrics cycle_metrics(double w_k, double u_k, double gamma, double T, const NodeParams& p);

// |sum u_av - lambda|; the admitted flow must cover the arrivals exactly.
double throughput_conservation(std::span<const double> u_av, double lambda);

}  // namespace aimdq::metrics
