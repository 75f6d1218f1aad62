#include "shrinkdim/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shrinkdim {

namespace {

bool near_interior_breakpoint(const std::vector<double>& b, double x) {
  for (std::size_t i = 1; i + 1 < b.size(); ++i)
    if (std::abs(x - b[i]) < kCollisionTol) return true;
  return false;
}

double ratio(double num, double den) {
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

OrbitRecord run_orbit(const Family& family, const StartPoint& x, double a, int n) {
  if (n < 0) throw std::invalid_argument("orbit length must be non-negative");
  if (!family.range().contains(a)) throw std::domain_error("parameter outside the family's range");

  const auto b = family.breakpoints(a);
  OrbitRecord rec;
  rec.a = a;
  rec.points.reserve(n + 1);

  double xi = x.value(a);
  double space = 1.0, param = x.deriv(a), logsum = 0.0;
  for (int k = 0;; ++k) {
    rec.points.push_back(xi);
    rec.space_deriv.push_back(space);
    rec.param_deriv.push_back(param);
    rec.birkhoff_logderiv.push_back(logsum);
    rec.q_ratio.push_back(ratio(space, param));
    if (near_interior_breakpoint(b, xi)) {
      rec.hit_breakpoint = true;
      rec.itinerary.push_back(family.branch_of(a, xi));
      break;
    }
    const int i = family.branch_of(a, xi);
    rec.itinerary.push_back(i);
    if (k == n) break;
    const double d = family.dx_on(i, a, xi);
    param = d * param + family.da_on(i, a, xi);
    space *= d;
    logsum += std::log(std::abs(d));
    xi = family.value_on(i, a, xi);
  }
  return rec;
}

double birkhoff_average(const Family& family, double a, double x0, const std::function<double(double)>& f, int n) {
  if (n < 1) throw std::invalid_argument("need at least one Birkhoff term");
  double sum = 0.0, comp = 0.0;
  double xi = x0;
  for (int k = 0; k < n; ++k) {
    // Kahan summation keeps long averages reproducible to the last digit.
    const double y = f(xi) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    xi = family.eval(a, xi).value;
  }
  return sum / n;
}

ForcedOrbit xi_forced(const Family& family, const StartPoint& x, double a, std::span<const int> itinerary) {
  ForcedOrbit out;
  out.value = x.value(a);
  out.param_deriv = x.deriv(a);
  for (int i : itinerary) {
    const double d = family.dx_on(i, a, out.value);
    out.param_deriv = d * out.param_deriv + family.da_on(i, a, out.value);
    out.log_space_deriv += std::log(std::abs(d));
    out.value = family.value_on(i, a, out.value);
  }
  return out;
}

QRatioProfile q_ratio_profile(const Family& family, const StartPoint& x, std::span<const double> a_grid, int n,
                              int n_lo) {
  QRatioProfile prof;
  prof.q_min = std::numeric_limits<double>::infinity();
  prof.q_max = 0.0;
  double c = 1.0;
  const int lo = std::min(n_lo, n);
  for (double a : a_grid) {
    const auto rec = run_orbit(family, x, a, n);
    if (rec.hit_breakpoint) {
      ++prof.dropped;
      continue;
    }
    const double q = std::abs(rec.q_ratio[n]);
    prof.a.push_back(a);
    prof.q_n.push_back(rec.q_ratio[n]);
    prof.q_min = std::min(prof.q_min, q);
    prof.q_max = std::max(prof.q_max, q);
    for (int k = std::max(lo, 1); k <= n; ++k) {
      const double qk = std::abs(rec.q_ratio[k]);
      if (std::isfinite(qk) && qk > 0.0) c = std::max({c, qk, 1.0 / qk});
    }
  }
  prof.c_hat = c;
  return prof;
}

double estimate_c_hat(const Family& family, const StartPoint& x, int n, int grid) {
  const Range& r = family.range();
  std::vector<double> as;
  for (int j = 0; j < grid; ++j) as.push_back(r.lo + r.width() * (j + 0.5) / grid);
  return q_ratio_profile(family, x, as, n).c_hat;
}

}  // namespace shrinkdim
