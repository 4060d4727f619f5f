#include "aimdq/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

#include "aimdq/allocation.hpp"
#include "aimdq/rng.hpp"

namespace aimdq::engine {

namespace {

// Applies zero-duration backoffs until the cycle period is positive, per the
// repeat_backoff policy; throws under the error policy.
int settle_feasibility(std::vector<double>& u, const ValidatedConfig& cfg, long k) {
  int repeats = 0;
  while (cycle_period(u, cfg) <= 0.0) {
    if (cfg.config().negative_cycle_policy == NegativeCyclePolicy::error)
      throw NonPositiveCycleError(k, cycle_period(u, cfg));
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= cfg.node(i).beta;
    ++repeats;
  }
  return repeats;
}

}  // namespace

std::vector<CycleRecord> run_deterministic(const ValidatedConfig& cfg, long cycles) {
  const std::size_t n = cfg.n();
  SystemState state;
  state.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.nodes[i].u = cfg.node(i).u0;
    state.nodes[i].w = cfg.node(i).w0;
  }

  std::vector<CycleRecord> records;
  records.reserve(static_cast<std::size_t>(std::max(cycles, 0L)));
  std::vector<double> u(n);

  for (long k = 0; k < cycles; ++k) {
    for (std::size_t i = 0; i < n; ++i) u[i] = state.nodes[i].u;
    const int repeats = settle_feasibility(u, cfg, k);
    for (std::size_t i = 0; i < n; ++i) state.nodes[i].u = u[i];
    const double T = cycle_period(u, cfg);

    CycleRecord rec;
    rec.k = k;
    rec.t_start = state.t;
    rec.t_end = state.t + T;
    rec.T = T;
    rec.backoff_repeats = repeats;
    rec.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeParams& p = cfg.node(i);
      NodeState& ns = state.nodes[i];
      const auto decision = allocation::service_rate(ns.u, ns.w, p);
      ns.gamma = decision.gamma;
      rec.nodes[i].u = ns.u;
      rec.nodes[i].w = ns.w;
      rec.nodes[i].gamma = ns.gamma;
      rec.nodes[i].metrics = metrics::cycle_metrics(ns.w, ns.u, ns.gamma, T, p);
      ns.w = allocation::queue_update(ns.w, ns.u, ns.gamma, T, p);
      ns.u = admission_update(ns.u, T, p);
    }
    records.push_back(std::move(rec));
    state.t += T;
    state.k = k + 1;
    state.delta = 0.0;
  }
  return records;
}

std::vector<TracePoint> reconstruct_trace(const CycleRecord& rec, const ValidatedConfig& cfg,
                                          int samples) {
  if (samples < 2) throw std::invalid_argument("reconstruct_trace: need at least 2 samples");
  const std::size_t n = cfg.n();
  if (rec.nodes.size() != n)
    throw std::invalid_argument("reconstruct_trace: record does not match config");

  std::vector<TracePoint> points;
  points.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const double tau = rec.T * static_cast<double>(s) / static_cast<double>(samples - 1);
    TracePoint pt;
    pt.t = rec.t_start + tau;
    pt.u.resize(n);
    pt.w.resize(n);
    pt.delta_i.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeParams& p = cfg.node(i);
      const NodeCycle& nc = rec.nodes[i];
      pt.u[i] = admission_rate_at(tau, nc.u, p);
      pt.w[i] = nc.w + (p.beta * nc.u + 0.5 * p.alpha * tau - nc.gamma) * tau;
      pt.delta_i[i] = metrics::batch_share_trace(tau, nc.u, nc.metrics.u_av, p);
      pt.delta += pt.delta_i[i];
    }
    points.push_back(std::move(pt));
  }
  return points;
}

std::vector<CycleRecord> run_oracle(const ValidatedConfig& cfg, double dt, long cycles) {
  if (!(dt > 0.0)) throw std::invalid_argument("run_oracle: dt must be positive");
  const std::size_t n = cfg.n();

  double t = 0.0;
  std::vector<double> u(n), w(n), gamma(n), peaks(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = cfg.node(i).u0;
    w[i] = cfg.node(i).w0;
  }

  std::vector<CycleRecord> records;
  records.reserve(static_cast<std::size_t>(std::max(cycles, 0L)));

  for (long k = 0; k < cycles; ++k) {
    // event k: remember the peaks, settle feasibility, fix gamma, back off
    peaks = u;
    const int repeats = settle_feasibility(peaks, cfg, k);
    CycleRecord rec;
    rec.k = k;
    rec.t_start = t;
    rec.backoff_repeats = repeats;
    rec.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeParams& p = cfg.node(i);
      gamma[i] = allocation::service_rate(peaks[i], std::max(w[i], 0.0), p).gamma;
      rec.nodes[i].u = peaks[i];
      rec.nodes[i].w = w[i];
      rec.nodes[i].gamma = gamma[i];
      u[i] = p.beta * peaks[i];
    }

    // integrate to the next clearance
    double delta = 0.0;
    bool crossed = false;
    for (long step = 0; step < 100000000L && !crossed; ++step) {
      double total_u = 0.0;
      for (double v : u) total_u += v;
      // the first step of a cycle has delta = 0 and a strictly positive
      // slope, so delta_next < 0 (even from an exact-zero grid hit) is
      // always the clearance
      const double delta_next = delta + dt * (cfg.lambda() - total_u);
      if (delta_next < 0.0 && delta >= 0.0) {
        const double theta = delta / (delta - delta_next);
        const double h = theta * dt;
        for (std::size_t i = 0; i < n; ++i) {
          w[i] += h * (u[i] - gamma[i]);
          u[i] += h * cfg.node(i).alpha;
        }
        t += h;
        crossed = true;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          w[i] += dt * (u[i] - gamma[i]);
          u[i] += dt * cfg.node(i).alpha;
        }
        delta = delta_next;
        t += dt;
      }
    }
    if (!crossed) throw std::runtime_error("run_oracle: clearance event not reached");

    rec.t_end = t;
    rec.T = t - rec.t_start;
    for (std::size_t i = 0; i < n; ++i)
      rec.nodes[i].metrics = metrics::cycle_metrics(rec.nodes[i].w, rec.nodes[i].u,
                                                    rec.nodes[i].gamma, rec.T, cfg.node(i));
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

// Evolves one node queue with net rate a + b x, clamped at zero, over a
// duration s. Accumulates the integral of w. Queue dust below 1e-15 counts
// as empty so the zero-crossing search always makes progress.
void advance_node(double& w, double a, double b, double s, double& int_w) {
  double x = 0.0;
  for (int guard = 0; x < s && guard < 1024; ++guard) {
    const double remain = s - x;
    const double rate = a + b * x;
    if (w <= 1e-15 && rate <= 0.0) {
      w = 0.0;  // pinned at empty until the net rate turns positive
      if (b <= 0.0) return;
      const double release = -a / b;
      if (release >= s) return;
      x = std::max(x, release);
      continue;
    }
    // unpinned segment: w(y) = w + rate y + b y^2 / 2
    double hit = remain;
    if (rate < 0.0) {
      const double disc = rate * rate - 2.0 * b * w;
      if (b > 0.0) {
        if (disc >= 0.0) hit = (-rate - std::sqrt(disc)) / b;
      } else {
        hit = w / -rate;
      }
    }
    if (hit >= remain) {
      int_w += w * remain + 0.5 * rate * remain * remain + b * remain * remain * remain / 6.0;
      w += rate * remain + 0.5 * b * remain * remain;
      if (w < 0.0) w = 0.0;  // rounding dust at a grazing minimum
      return;
    }
    int_w += w * hit + 0.5 * rate * hit * hit + b * hit * hit * hit / 6.0;
    w = 0.0;
    x += hit;
  }
}

}  // namespace

StochasticRun run_stochastic(const ValidatedConfig& cfg, const StochasticConfig& sc) {
  if (!(sc.horizon > 0.0)) throw std::invalid_argument("run_stochastic: horizon must be positive");
  const std::size_t n = cfg.n();
  SplitMix64 rng(sc.seed);

  StochasticRun out;
  double t = 0.0;
  double t_k = 0.0;  // current cycle start (= last clearance)
  long k = 0;
  double delta = 0.0;
  std::vector<double> peaks(n), gamma(n), w(n), w_start(n);
  std::vector<double> admitted(n, 0.0), int_w(n, 0.0);
  double int_delta = 0.0;
  long arrivals_in_cycle = 0;

  for (std::size_t i = 0; i < n; ++i) {
    peaks[i] = cfg.node(i).u0;
    w[i] = cfg.node(i).w0;
    w_start[i] = w[i];
    gamma[i] = allocation::service_rate(peaks[i], w[i], cfg.node(i)).gamma;
  }

  double next_arrival = rng.exponential(cfg.lambda());

  // instantaneous admission rate of node i at absolute time `at`
  auto rate_at = [&](std::size_t i, double at) {
    return cfg.node(i).beta * peaks[i] + cfg.node(i).alpha * (at - t_k);
  };

  while (t < sc.horizon) {
    if (delta <= 0.0) {
      // batch queue empty: nodes drain while we wait for the next arrival
      const double t_next = std::min(next_arrival, sc.horizon);
      const double s = t_next - t;
      if (s > 0.0)
        for (std::size_t i = 0; i < n; ++i) advance_node(w[i], -gamma[i], 0.0, s, int_w[i]);
      t = t_next;
      if (t >= sc.horizon) break;
      delta += 1.0;
      out.arrivals.push_back(t);
      ++arrivals_in_cycle;
      next_arrival = t + rng.exponential(cfg.lambda());
      continue;
    }

    // batch queue draining at the aggregate ramp: when does it empty?
    double drain0 = 0.0, ramp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      drain0 += rate_at(i, t);
      ramp += cfg.node(i).alpha;
    }
    const double x_empty = (-drain0 + std::sqrt(drain0 * drain0 + 2.0 * ramp * delta)) / ramp;
    const double t_next = std::min(next_arrival, sc.horizon);

    if (t + x_empty < t_next) {
      const double s = x_empty;
      int_delta += delta * s - 0.5 * drain0 * s * s - ramp * s * s * s / 6.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = rate_at(i, t);
        admitted[i] += r * s + 0.5 * cfg.node(i).alpha * s * s;
        advance_node(w[i], r - gamma[i], cfg.node(i).alpha, s, int_w[i]);
      }
      t += s;
      delta = 0.0;

      // clearance event: close the cycle, back off, retune service rates
      const double T = t - t_k;
      CycleRecord rec;
      rec.k = k;
      rec.t_start = t_k;
      rec.t_end = t;
      rec.T = T;
      rec.nodes.resize(n);
      const double t_delta_cycle =
          arrivals_in_cycle > 0 ? int_delta / static_cast<double>(arrivals_in_cycle) : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        rec.nodes[i].u = peaks[i];
        rec.nodes[i].w = w_start[i];
        rec.nodes[i].gamma = gamma[i];
        metrics::CycleMetrics& cm = rec.nodes[i].metrics;
        cm.u_av = admitted[i] / T;
        cm.w_av = int_w[i] / T;
        cm.t_delta = t_delta_cycle;
        cm.t_w = admitted[i] > 0.0 ? int_w[i] / admitted[i] : 0.0;
        cm.t_total = cm.t_delta + cm.t_w;
      }
      out.cycles.push_back(std::move(rec));

      for (std::size_t i = 0; i < n; ++i) {
        peaks[i] = rate_at(i, t);
        gamma[i] = allocation::service_rate(peaks[i], w[i], cfg.node(i)).gamma;
        w_start[i] = w[i];
        admitted[i] = 0.0;
        int_w[i] = 0.0;
      }
      int_delta = 0.0;
      arrivals_in_cycle = 0;
      t_k = t;
      ++k;
    } else {
      const double s = t_next - t;
      if (s > 0.0) {
        int_delta += delta * s - 0.5 * drain0 * s * s - ramp * s * s * s / 6.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double r = rate_at(i, t);
          admitted[i] += r * s + 0.5 * cfg.node(i).alpha * s * s;
          advance_node(w[i], r - gamma[i], cfg.node(i).alpha, s, int_w[i]);
        }
        delta -= drain0 * s + 0.5 * ramp * s * s;
      }
      t = t_next;
      if (t >= sc.horizon) break;
      delta += 1.0;
      out.arrivals.push_back(t);
      ++arrivals_in_cycle;
      next_arrival = t + rng.exponential(cfg.lambda());
    }
  }

  double sum_t = 0.0, sum_t2 = 0.0;
  for (const CycleRecord& rec : out.cycles) {
    sum_t += rec.T;
    sum_t2 += rec.T * rec.T;
  }
  if (!out.cycles.empty()) {
    out.mean_cycle_period = sum_t / static_cast<double>(out.cycles.size());
    out.time_avg_cycle_period = sum_t2 / sum_t;
  }
  return out;
}

std::vector<std::vector<CycleRecord>> run_batch(std::span<const SystemConfig> configs,
                                                long cycles) {
  std::vector<std::future<std::vector<CycleRecord>>> futures;
  futures.reserve(configs.size());
  for (const SystemConfig& cfg : configs)
    futures.push_back(std::async(std::launch::async, [cfg, cycles] {
      return run_deterministic(validate_config(cfg), cycles);
    }));
  std::vector<std::vector<CycleRecord>> results;
  results.reserve(configs.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

}  // namespace aimdq::engine
