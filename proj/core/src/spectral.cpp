#include "aimdq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aimdq::spectral {

AggregateMatrix build_phi(const ValidatedConfig& cfg) {
  const std::size_t n = cfg.n();
  AggregateMatrix m;
  m.phi = Matrix::zero(n);
  m.beta.reserve(n);
  for (const NodeParams& p : cfg.nodes()) m.beta.push_back(p.beta);
  m.alpha_bar = cfg.alpha_bar();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m.phi.at(i, j) = (i == j ? m.beta[i] : 0.0) - 2.0 * m.alpha_bar[i] * m.beta[j];
  return m;
}

Symmetrized symmetrize(const AggregateMatrix& m) {
  Symmetrized s;
  s.d = m.beta;
  s.z.reserve(m.beta.size());
  for (std::size_t i = 0; i < m.beta.size(); ++i)
    s.z.push_back(std::sqrt(m.alpha_bar[i] * m.beta[i]));
  return s;
}

namespace {

// Secular function 1 + rho sum_j s2_j / (e_j - c) and its derivative in c.
struct Secular {
  std::span<const double> e;
  std::span<const double> s2;
  double rho;

  double value(double c) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) acc += s2[j] / (e[j] - c);
    return 1.0 + rho * acc;
  }
  double derivative(double c) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double g = e[j] - c;
      acc += s2[j] / (g * g);
    }
    return rho * acc;
  }
};

// One root of the secular equation inside the open bracket (lo, hi). The
// function is strictly monotone there (decreasing for rho < 0, increasing
// for rho > 0), so bisection on interior midpoints cannot fail; a few
// guarded Newton steps then polish the result.
double solve_secular(const Secular& f, double lo, double hi) {
  const bool decreasing = f.rho < 0.0;
  double a = lo, b = hi;
  for (int it = 0; it < 200; ++it) {
    const double width = b - a;
    if (width <= 2.0 * std::numeric_limits<double>::epsilon() *
                     std::max({std::abs(a), std::abs(b), 1e-300}))
      break;
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;  // interval collapsed to adjacent floats
    const double fm = f.value(mid);
    if (fm == 0.0) return mid;
    const bool root_right = decreasing ? (fm > 0.0) : (fm < 0.0);
    (root_right ? a : b) = mid;
  }
  double c = 0.5 * (a + b);
  for (int it = 0; it < 4; ++it) {
    const double fv = f.value(c);
    if (std::abs(fv) < 1e-13) break;
    const double dv = f.derivative(c);
    if (dv == 0.0) break;
    const double next = c - fv / dv;
    if (!std::isfinite(next) || next <= a || next >= b) break;
    c = next;
  }
  return c;
}

}  // namespace

RankOneEigs rank_one_eigs(std::span<const double> d, double rho, std::span<const double> z) {
  const std::size_t n = d.size();
  if (z.size() != n) throw std::invalid_argument("rank_one_eigs: d and z sizes differ");
  RankOneEigs out;
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  double max_abs_d = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_abs_d = std::max(max_abs_d, std::abs(d[i]));
    total_weight += z[i] * z[i];
  }
  const double z_tol = 1e-14;
  const double gap_tol = 1e-14 * std::max(max_abs_d, 1.0);

  // Collapse clusters of (nearly) equal diagonal entries: a cluster of size m
  // contributes m-1 exact eigenvalues at its representative value and a single
  // combined weight to the secular problem. Entries whose combined weight
  // vanishes deflate entirely.
  std::vector<double> e, s2;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    double weight = z[order[i]] * z[order[i]];
    while (j < n && d[order[j]] - d[order[i]] < gap_tol) {
      weight += z[order[j]] * z[order[j]];
      ++j;
    }
    const double rep = d[order[i]];
    const std::size_t cluster = j - i;
    if (weight < z_tol * z_tol) {
      for (std::size_t c = 0; c < cluster; ++c) out.eigenvalues.push_back(rep);
      out.deflated += static_cast<int>(cluster);
    } else {
      for (std::size_t c = 0; c + 1 < cluster; ++c) out.eigenvalues.push_back(rep);
      out.deflated += static_cast<int>(cluster) - 1;
      e.push_back(rep);
      s2.push_back(weight);
    }
    i = j;
  }

  const std::size_t m = e.size();
  if (m > 0 && rho != 0.0) {
    const double secular_weight = std::accumulate(s2.begin(), s2.end(), 0.0);
    const Secular f{e, s2, rho};
    for (std::size_t r = 0; r < m; ++r) {
      double lo, hi;
      if (rho < 0.0) {
        lo = (r == 0) ? e.front() + rho * secular_weight : e[r - 1];
        hi = e[r];
      } else {
        lo = e[r];
        hi = (r + 1 == m) ? e.back() + rho * secular_weight : e[r + 1];
      }
      if (m == 1) {
        out.eigenvalues.push_back(e[0] + rho * s2[0]);  // single-term closed form
      } else {
        out.eigenvalues.push_back(solve_secular(f, lo, hi));
      }
    }
  } else {
    for (std::size_t r = 0; r < m; ++r) out.eigenvalues.push_back(e[r]);
  }

  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());

  // Interlacing brackets against the full sorted diagonal.
  std::vector<double> ds(n);
  for (std::size_t k = 0; k < n; ++k) ds[k] = d[order[k]];
  out.brackets.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (rho < 0.0)
      out.brackets[k] = {k == 0 ? ds.front() + rho * total_weight : ds[k - 1], ds[k]};
    else if (rho > 0.0)
      out.brackets[k] = {ds[k], k + 1 == n ? ds.back() + rho * total_weight : ds[k + 1]};
    else
      out.brackets[k] = {ds[k], ds[k]};
  }
  return out;
}

SpectralReport schur_check(const AggregateMatrix& m) {
  const std::size_t n = m.beta.size();
  SpectralReport rep;
  const Symmetrized sym = symmetrize(m);
  RankOneEigs eigs = rank_one_eigs(sym.d, -2.0, sym.z);

  rep.eigenvalues = std::move(eigs.eigenvalues);
  rep.brackets = std::move(eigs.brackets);
  rep.deflated = eigs.deflated;
  rep.z = sym.z;

  rep.spectral_radius = 0.0;
  for (double v : rep.eigenvalues) rep.spectral_radius = std::max(rep.spectral_radius, std::abs(v));
  rep.schur = rep.spectral_radius < 1.0;

  double prod_eig = 1.0, prod_beta = 1.0;
  for (double v : rep.eigenvalues) prod_eig *= v;
  for (double b : m.beta) prod_beta *= b;
  rep.det_residual = std::abs(prod_eig + prod_beta);
  rep.det_identity_ok = rep.det_residual < 1e-8 * prod_beta;

  std::vector<double> sorted_beta = m.beta;
  std::sort(sorted_beta.begin(), sorted_beta.end());
  const double slack = 1e-10;
  rep.interlacing_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (rep.eigenvalues[i] > sorted_beta[i] + slack) rep.interlacing_ok = false;
    if (i + 1 < n && rep.eigenvalues[i + 1] < sorted_beta[i] - slack) rep.interlacing_ok = false;
  }

  rep.structure_ok = n > 0 && rep.eigenvalues.front() < 0.0 &&
                     -rep.eigenvalues.front() <= sorted_beta.back() + slack;
  for (std::size_t i = 1; i < n; ++i)
    if (!(rep.eigenvalues[i] > 0.0 && rep.eigenvalues[i] < 1.0)) rep.structure_ok = false;

  return rep;
}

std::vector<double> iterate_aggregate(std::span<const double> u, const AggregateMatrix& m,
                                      double lambda) {
  const std::size_t n = m.beta.size();
  if (u.size() != n) throw std::invalid_argument("iterate_aggregate: rate vector size mismatch");
  std::vector<double> next(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += m.phi.at(i, j) * u[j];
    next[i] = acc + 2.0 * m.alpha_bar[i] * lambda;
  }
  return next;
}

}  // namespace aimdq::spectral
