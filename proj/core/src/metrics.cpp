#include "aimdq/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "aimdq/allocation.hpp"

namespace aimdq::metrics {

double generic_queueing_time(std::span<const double> t, std::span<const double> arrivals,
                             std::span<const double> departures) {
  if (t.size() != arrivals.size() || t.size() != departures.size())
    throw std::invalid_argument("generic_queueing_time: trace spans differ in length");
  if (t.empty()) throw std::domain_error("generic_queueing_time: empty trace");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0 && arrivals[i] < arrivals[i - 1])
      throw std::invalid_argument("generic_queueing_time: arrivals must be nondecreasing");
    if (departures[i] > arrivals[i] + 1e-9)
      throw std::invalid_argument("generic_queueing_time: departures exceed arrivals");
  }
  if (!(arrivals.back() > 0.0))
    throw std::domain_error("generic_queueing_time: no arrivals, queueing time undefined");

  double area = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double q0 = arrivals[i - 1] - departures[i - 1];
    const double q1 = arrivals[i] - departures[i];
    area += 0.5 * (q0 + q1) * (t[i] - t[i - 1]);
  }
  return area / arrivals.back();
}

double batch_share_trace(double tau, double u_k, double u_av, const NodeParams& p) {
  return u_av * tau - p.beta * u_k * tau - 0.5 * p.alpha * tau * tau;
}

double queueing_time(double w_k, double w_k1, double u_av) {
  if (!(u_av > 0.0)) throw std::domain_error("queueing_time: average admission rate must be positive");
  return (w_k + w_k1) / (2.0 * u_av);
}

CycleMetrics cycle_metrics(double w_k, double u_k, double gamma, double T, const NodeParams& p) {
  CycleMetrics m;
  m.u_av = p.beta * u_k + 0.5 * p.alpha * T;
  const double w_k1 = allocation::queue_update(w_k, u_k, gamma, T, p);
  m.w_av = 0.5 * (w_k + w_k1);
  m.t_total = queueing_time(w_k, w_k1, m.u_av);

  // closed-form integrals over [0, T] of the piecewise-polynomial traces
  const double T2 = T * T, T3 = T2 * T;
  const double batch_area = 0.5 * m.u_av * T2 - 0.5 * p.beta * u_k * T2 - p.alpha * T3 / 6.0;
  const double node_area = w_k * T + 0.5 * p.beta * u_k * T2 + p.alpha * T3 / 6.0 - 0.5 * gamma * T2;
  const double admitted = m.u_av * T;
  m.t_delta = batch_area / admitted;
  m.t_w = node_area / admitted;
  return m;
}

double throughput_conservation(std::span<const double> u_av, double lambda) {
  double sum = 0.0;
  for (double v : u_av) sum += v;
  return std::abs(sum - lambda);
}

}  // namespace aimdq::metrics
