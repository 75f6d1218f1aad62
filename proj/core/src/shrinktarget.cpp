#include "shrinkdim/shrinktarget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shrinkdim {

namespace {

// Move a parameter inwards until its image lies in [lo, hi].
double pull_inside(const Family& family, const StartPoint& x, const ParamInterval& iv, double b, double towards,
                   double lo, double hi) {
  for (int it = 0; it < 256; ++it) {
    const double v = xi_forced(family, x, b, iv.itinerary).value;
    if (v >= lo && v <= hi) return b;
    b = std::nextafter(b, towards);
  }
  return b;
}

struct Sub {
  double left, right;
  bool ok;
};

Sub target_preimage(const Family& family, const StartPoint& x, const ParamInterval& iv, double lo, double hi) {
  const double a = std::max(lo, iv.image_lo()), b = std::min(hi, iv.image_hi());
  if (!(a < b)) return {0.0, 0.0, false};
  double p = solve_image(family, x, iv, a), q = solve_image(family, x, iv, b);
  if (p > q) std::swap(p, q);
  p = pull_inside(family, x, iv, p, q, lo, hi);
  q = pull_inside(family, x, iv, q, p, lo, hi);
  if (!(p < q)) return {0.0, 0.0, false};
  return {p, q, true};
}

}  // namespace

std::vector<CoverInterval> build_cover(const Family& family, const StartPoint& x,
                                       const std::vector<ParamInterval>& partition, double y, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  const auto logd = log_derivative_potential(family);
  std::vector<CoverInterval> out;
  for (std::size_t k = 0; k < partition.size(); ++k) {
    const auto& iv = partition[k];
    if (iv.unresolved) continue;
    double mid = 0.5 * (iv.left + iv.right);
    double r = std::exp(-alpha * sn_at(family, x, iv, mid, logd));
    Sub sub{};
    // The radius depends on S_n at the sub-interval's midpoint, which
    // depends on the sub-interval: iterate to a fixed point.
    for (int it = 0; it < 30; ++it) {
      sub = target_preimage(family, x, iv, y - r, y + r);
      if (!sub.ok) break;
      mid = 0.5 * (sub.left + sub.right);
      const double r_new = std::exp(-alpha * sn_at(family, x, iv, mid, logd));
      if (std::abs(r_new - r) <= 1e-14 * r) break;
      r = r_new;
    }
    if (!sub.ok) continue;
    sub = target_preimage(family, x, iv, y - r, y + r);
    if (!sub.ok) continue;

    CoverInterval c;
    c.parent = k;
    c.left = sub.left;
    c.right = sub.right;
    c.n = iv.generation;
    c.y = y;
    c.alpha = alpha;
    c.radius = r;
    c.s_n_mid = sn_at(family, x, iv, 0.5 * (c.left + c.right), logd);
    double dmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= 10; ++j) {
      const double b = iv.left + iv.width() * j / 10.0;
      dmin = std::min(dmin, std::abs(xi_forced(family, x, b, iv.itinerary).param_deriv));
    }
    c.parent_min_deriv = dmin;
    out.push_back(c);
  }
  return out;
}

std::vector<CoverInterval> build_cover(const Family& family, const StartPoint& x, Range range, double y, double alpha,
                                       int n, const PartitionOptions& opts) {
  return build_cover(family, x, continuity_partition(family, x, range, n, opts), y, alpha);
}

CriticalExponent critical_exponent_upper(const std::vector<std::vector<CoverInterval>>& covers,
                                         const std::vector<double>& s_grid) {
  CriticalExponent res;
  std::vector<const std::vector<CoverInterval>*> used;
  for (const auto& c : covers)
    if (!c.empty()) used.push_back(&c);
  if (used.empty()) {
    res.empty = true;
    return res;
  }
  const std::size_t first = used.size() / 2 > 0 && used.size() >= 4 ? used.size() / 2 : 0;

  auto rate = [&](double s) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (std::size_t i = first; i < used.size(); ++i) {
      double sigma = 0.0;
      for (const auto& c : *used[i]) sigma += std::pow(c.length(), s);
      const double n = used[i]->front().n, v = std::log(sigma);
      sx += n;
      sy += v;
      sxx += n * n;
      sxy += n * v;
      ++k;
    }
    const double den = k * sxx - sx * sx;
    if (k < 2 || den <= 0.0) return sy / k > 0.0 ? 1.0 : -1.0;
    return (k * sxy - sx * sy) / den;
  };

  double prev_s = 0.0;
  bool have_prev = false, found = false;
  for (double s : s_grid) {
    const double g = rate(s);
    res.rates.emplace_back(s, g);
    if (found) continue;
    if (g <= 0.0) {
      found = true;
      if (!have_prev) {
        res.s_hat = s;
        continue;
      }
      double lo = prev_s, hi = s;
      for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) > 0.0 ? lo : hi) = mid;
      }
      res.s_hat = 0.5 * (lo + hi);
    }
    prev_s = s;
    have_prev = true;
  }
  if (!found) res.s_hat = s_grid.empty() ? 0.0 : s_grid.back();
  return res;
}

HitTable hit_frequency(const Family& family, const StartPoint& x, const std::vector<double>& samples, double y,
                       double l, std::pair<int, int> n_range, const HitOptions& opts) {
  const auto [n_lo, n_hi] = n_range;
  if (n_lo < 1 || n_hi < n_lo) throw std::invalid_argument("invalid generation range");
  HitTable table;
  table.tau = opts.tau;
  table.l = l;
  table.iota = opts.iota;
  const int k_max = static_cast<int>(std::floor((1.0 + opts.iota) * n_hi));
  std::vector<long> hits(k_max + 1, 0);
  for (double a : samples) {
    double v = x.value(a);
    for (int k = 1; k <= k_max; ++k) {
      v = family.eval(a, std::clamp(v, 0.0, 1.0)).value;
      if (std::abs(v - y) < l) ++hits[k];
    }
  }
  const double count = static_cast<double>(std::max<std::size_t>(samples.size(), 1));
  const double threshold = opts.tau * l / 2.0;
  std::vector<char> good(k_max + 1, 0);
  for (int k = 1; k <= k_max; ++k) good[k] = l > 0.0 && hits[k] / count >= threshold;
  table.quarter_bound_holds = true;
  for (int n = n_lo; n <= n_hi; n += std::max(1, opts.stride)) {
    HitRow row;
    row.n = n;
    row.proxy = hits[n] / count;
    const int w = static_cast<int>(std::floor((1.0 + opts.iota) * n));
    int c = 0;
    for (int k = n; k <= w; ++k) c += good[k];
    row.f = c / (opts.iota * n);
    if (row.f < opts.tau * l / 4.0) table.quarter_bound_holds = false;
    table.rows.push_back(row);
  }
  table.sumfreq_margin = threshold - 3.0 * opts.tau1 / opts.iota;
  return table;
}

PinchResult entropy_pinch(const Family& family, const StartPoint& x, const std::vector<double>& samples,
                          const std::function<double(double)>& entropy, double epsilon, std::pair<int, int> n_range) {
  const auto [n_lo, n_hi] = n_range;
  if (n_lo < 1 || n_hi < n_lo) throw std::invalid_argument("invalid generation range");
  PinchResult res;
  std::vector<long> inside(n_hi - n_lo + 1, 0);
  long all = 0;
  for (double a : samples) {
    const double h = entropy(a);
    double v = x.value(a), sum = 0.0;
    bool always = true;
    for (int n = 1; n <= n_hi; ++n) {
      const auto e = family.eval(a, std::clamp(v, 0.0, 1.0));
      sum += std::log(std::abs(family.dx_on(e.branch, a, v)));
      v = e.value;
      if (n < n_lo) continue;
      const bool ok = std::abs(sum / n - h) < epsilon;
      if (ok) ++inside[n - n_lo];
      always = always && ok;
    }
    if (always) ++all;
  }
  const double count = static_cast<double>(std::max<std::size_t>(samples.size(), 1));
  for (int n = n_lo; n <= n_hi; ++n) res.rows.push_back({n, inside[n - n_lo] / count});
  res.fraction_all = all / count;
  return res;
}

}  // namespace shrinkdim
