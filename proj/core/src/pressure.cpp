#include "shrinkdim/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shrinkdim {

double sn_at(const Family& family, const StartPoint& x, const ParamInterval& iv, double b, const Potential& phi) {
  const int n = iv.generation;
  double v = x.value(b), sum = 0.0;
  for (int k = 0; k < n; ++k) {
    v = family.value_on(iv.itinerary[k], b, v);
    const int branch = k + 1 < n ? iv.itinerary[k + 1] : family.branch_of(b, std::clamp(v, 0.0, 1.0));
    sum += phi(b, v, branch);
  }
  return sum;
}

namespace {

template <class F>
double extreme_over_probes(const ParamInterval& iv, int probes, F&& f, bool want_max) {
  double best = want_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  auto take = [&](double v) { best = want_max ? std::max(best, v) : std::min(best, v); };
  take(f(iv.left));
  take(f(iv.right));
  for (int j = 0; j < probes; ++j) take(f(iv.left + iv.width() * (j + 1.0) / (probes + 1.0)));
  return best;
}

// log sum exp of the terms, summed in index order with compensation.
double log_sum_exp(const std::vector<double>& t) {
  if (t.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(t.begin(), t.end());
  double sum = 0.0, c = 0.0;
  for (double v : t) {
    const double y = std::exp(v - mx) - c;
    const double s = sum + y;
    c = (s - sum) - y;
    sum = s;
  }
  return mx + std::log(sum);
}

}  // namespace

Potential log_derivative_potential(const Family& family) {
  return [&family](double a, double x, int branch) { return std::log(std::abs(family.dx_on(branch, a, x))); };
}

double sn_sup(const Family& family, const StartPoint& x, const ParamInterval& iv, const Potential& phi, int probes) {
  return extreme_over_probes(
      iv, probes, [&](double b) { return sn_at(family, x, iv, b, phi); }, true);
}

PressureTable build_pressure_table(const Family& family, const StartPoint& x, Range range,
                                   std::pair<int, int> n_window, const PressureOptions& opts) {
  auto [n1, n2] = n_window;
  if (n1 < 1 || n2 < n1) throw std::invalid_argument("pressure window must satisfy 1 <= n1 <= n2");
  if (n2 > opts.partition.n_max) throw std::invalid_argument("pressure window exceeds n_max");
  if (!(opts.c_hat >= 1.0)) throw std::invalid_argument("c_hat must be at least 1");

  const auto rep = check_assumptions(family, 400);
  PressureTable table;
  table.log_c_hat = std::log(opts.c_hat);
  table.lambda_min = rep.lambda_min;
  table.Lambda_max = rep.Lambda_max;
  table.n_requested = n2;
  table.estimator = opts.estimator;

  PartitionOptions po = opts.partition;
  if (po.Lambda <= 0.0) po.Lambda = rep.Lambda_max;
  if (po.tol_a < 0.0) po.tol_a = default_tol_a(po.Lambda, n2);

  const auto logd = log_derivative_potential(family);
  std::vector<ParamInterval> gen{root_interval(family, x, range)};
  for (int n = 1; n <= n2; ++n) {
    try {
      gen = extend_partition(family, x, std::move(gen), n, po);
    } catch (const PartitionBudgetExceeded&) {
      table.truncated = true;
      break;
    }
    if (n < n1) continue;
    std::vector<double> infs;
    infs.reserve(gen.size());
    for (const auto& iv : gen) {
      if (iv.unresolved) continue;
      infs.push_back(extreme_over_probes(
          iv, opts.probes, [&](double b) { return sn_at(family, x, iv, b, logd); }, false));
    }
    table.generations.push_back(n);
    table.inf_logderiv.push_back(std::move(infs));
  }
  if (table.generations.empty()) throw PartitionBudgetExceeded("no generation of the pressure window fits the node budget");
  return table;
}

PressureEstimate pressure_from_table(const PressureTable& table, double s, double alpha,
                                     PressureEstimator estimator) {
  if (s < 0.0 || alpha < 0.0) throw std::invalid_argument("s and alpha must be non-negative");
  PressureEstimate est;
  est.s = s;
  est.alpha = alpha;
  est.truncated = table.truncated;
  est.estimator = estimator;
  const double c = s * (1.0 + alpha);
  std::vector<double> terms;
  for (std::size_t g = 0; g < table.generations.size(); ++g) {
    const int n = table.generations[g];
    terms.clear();
    for (double v : table.inf_logderiv[g]) terms.push_back(-c * v);
    est.p_sequence.emplace_back(n, (log_sum_exp(terms) + table.log_c_hat) / n);
    est.counts.push_back(terms.size());
  }
  const int n1 = table.generations.front(), n2 = table.generations.back();
  const int first = n2 - (n2 - n1 + 1) / 2;
  est.n_used = {n1, n2};
  const double log_z1 = est.p_sequence.front().second * n1;
  for (const auto& [n, p] : est.p_sequence)
    if (n > n1) est.growth_sequence.emplace_back(n, (p * n - log_z1) / (n - n1));
  est.p_value = -std::numeric_limits<double>::infinity();
  const bool literal = estimator == PressureEstimator::literal || est.growth_sequence.empty();
  for (const auto& [n, p] : literal ? est.p_sequence : est.growth_sequence)
    if (n >= first) est.p_value = std::max(est.p_value, p);
  return est;
}

PressureEstimate pressure_estimate(const Family& family, const StartPoint& x, Range range, double s, double alpha,
                                   std::pair<int, int> n_window, const PressureOptions& opts) {
  return pressure_from_table(build_pressure_table(family, x, range, n_window, opts), s, alpha, opts.estimator);
}

RootResult root_s0(const PressureTable& table, double alpha, double tol) {
  const double h_lo = std::log(table.lambda_min), h_hi = std::log(table.Lambda_max);
  if (!(h_lo > 0.0)) throw NumericalFailure("family is not expanding; pressure root undefined");
  RootResult r;
  r.search_hi = h_hi / ((1.0 + alpha) * h_lo) + 0.5;
  double lo = 0.0, hi = r.search_hi;
  const double p_lo = pressure_from_table(table, lo, alpha, table.estimator).p_value;
  const double p_hi = pressure_from_table(table, hi, alpha, table.estimator).p_value;
  if (!(p_lo > 0.0 && p_hi < 0.0))
    throw NumericalFailure("pressure has no sign change on the search interval");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (pressure_from_table(table, mid, alpha, table.estimator).p_value > 0.0 ? lo : hi) = mid;
  }
  r.lo = lo;
  r.hi = hi;
  r.s0 = 0.5 * (lo + hi);
  return r;
}

int monotonicity_violations(const PressureTable& table, double alpha, const std::vector<double>& s_grid,
                            double tol) {
  std::vector<double> p;
  for (double s : s_grid) p.push_back(pressure_from_table(table, s, alpha, table.estimator).p_value);
  const double h_lo = std::log(table.lambda_min);
  int bad = 0;
  for (std::size_t i = 0; i < s_grid.size(); ++i)
    for (std::size_t j = i + 1; j < s_grid.size(); ++j)
      if (s_grid[i] < s_grid[j] && p[i] < p[j] + (s_grid[j] - s_grid[i]) * (1.0 + alpha) * h_lo * (1.0 - tol)) ++bad;
  return bad;
}

}  // namespace shrinkdim
