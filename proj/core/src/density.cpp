#include "shrinkdim/density.hpp"

#include "shrinkdim/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shrinkdim {

namespace {

struct Entry {
  int to;
  double w;
};

// Row i holds the fractions of bin i's mass landing in each bin j.
std::vector<std::vector<Entry>> ulam_matrix(const Family& family, double a, int bins) {
  const auto br = family.breakpoints(a);
  const double h = 1.0 / bins;
  std::vector<std::vector<Entry>> rows(bins);
  for (int i = 0; i < bins; ++i) {
    const double x0 = i * h, x1 = (i + 1) * h;
    for (std::size_t b = 0; b + 1 < br.size(); ++b) {
      const double l = std::max(x0, br[b]), r = std::min(x1, br[b + 1]);
      if (!(r > l)) continue;
      const double share = (r - l) / h;
      const int br_idx = static_cast<int>(b);
      double u = family.value_on(br_idx, a, l), v = family.value_on(br_idx, a, r);
      if (u > v) std::swap(u, v);
      u = std::clamp(u, 0.0, 1.0);
      v = std::clamp(v, 0.0, 1.0);
      if (!(v > u)) continue;
      const int j0 = std::clamp(static_cast<int>(u * bins), 0, bins - 1);
      const int j1 = std::clamp(static_cast<int>(std::ceil(v * bins)) - 1, 0, bins - 1);
      for (int j = j0; j <= j1; ++j) {
        const double ov = std::min(v, (j + 1) * h) - std::max(u, j * h);
        if (ov > 0.0) rows[i].push_back({j, share * ov / (v - u)});
      }
    }
  }
  return rows;
}

std::vector<double> transfer(const std::vector<std::vector<Entry>>& rows, const std::vector<double>& m) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& e : rows[i]) out[e.to] += m[i] * e.w;
  return out;
}

double l1(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

}  // namespace

DensityProfile ulam_density(const Family& family, double a, int bins, int power_iters) {
  if (bins < 64) throw std::invalid_argument("Ulam density needs at least 64 bins");
  DensityProfile prof;
  prof.a = a;
  prof.bins = bins;
  const auto rows = ulam_matrix(family, a, bins);

  std::vector<double> m(bins, 1.0 / bins);
  for (int it = 0; it < power_iters; ++it) {
    auto next = transfer(rows, m);
    double total = 0.0;
    for (double v : next) total += v;
    for (double& v : next) v /= total;
    const double change = l1(next, m);
    m = std::move(next);
    prof.iterations = it + 1;
    if (change < 1e-14) {
      prof.converged = true;
      break;
    }
  }
  prof.residual = l1(transfer(rows, m), m);

  prof.values.resize(bins);
  for (int i = 0; i < bins; ++i) prof.values[i] = m[i] * bins;

  std::vector<std::pair<int, int>> runs;
  for (int i = 0; i < bins; ++i) {
    if (m[i] <= kSupportMass) continue;
    if (!runs.empty() && runs.back().second == i - 1)
      runs.back().second = i;
    else
      runs.emplace_back(i, i);
  }
  const double h = 1.0 / bins;
  prof.tau_lower = 0.0;
  prof.tau_upper = 0.0;
  bool any = false;
  for (const auto& [lo, hi] : runs) {
    prof.support.push_back({lo * h, (hi + 1) * h});
    for (int i = lo + 1; i <= hi - 1; ++i) {
      prof.tau_lower = any ? std::min(prof.tau_lower, prof.values[i]) : prof.values[i];
      prof.tau_upper = any ? std::max(prof.tau_upper, prof.values[i]) : prof.values[i];
      any = true;
    }
  }

  // Rokhlin integral: log|T'| is constant on each branch piece of a bin.
  const auto br = family.breakpoints(a);
  double ent = 0.0;
  for (int i = 0; i < bins; ++i) {
    if (m[i] == 0.0) continue;
    const double x0 = i * h, x1 = (i + 1) * h;
    for (std::size_t b = 0; b + 1 < br.size(); ++b) {
      const double l = std::max(x0, br[b]), r = std::min(x1, br[b + 1]);
      if (!(r > l)) continue;
      const double mid = 0.5 * (l + r);
      ent += m[i] * (r - l) / h * std::log(std::abs(family.dx_on(static_cast<int>(b), a, mid)));
    }
  }
  prof.entropy = ent;
  return prof;
}

CommonSupport common_support(const std::vector<DensityProfile>& profiles, int erosion) {
  CommonSupport res;
  if (profiles.empty()) {
    res.diagnostic = "no density profiles";
    return res;
  }
  const int bins = profiles.front().bins;
  std::vector<char> in(bins, 1);
  for (const auto& p : profiles) {
    if (p.bins != bins) throw std::invalid_argument("profiles use different bin counts");
    std::vector<char> mask(bins, 0);
    for (const auto& r : p.support) {
      const int lo = static_cast<int>(std::lround(r.lo * bins)), hi = static_cast<int>(std::lround(r.hi * bins));
      for (int i = std::max(lo, 0); i < std::min(hi, bins); ++i) mask[i] = 1;
    }
    for (int i = 0; i < bins; ++i) in[i] = in[i] && mask[i];
  }
  int best_lo = 0, best_len = 0;
  for (int i = 0; i < bins;) {
    if (!in[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < bins && in[j]) ++j;
    if (j - i > best_len) {
      best_len = j - i;
      best_lo = i;
    }
    i = j;
  }
  if (best_len <= 2 * erosion) {
    res.diagnostic = "supports have no common interval";
    return res;
  }
  res.empty = false;
  res.interval = {static_cast<double>(best_lo + erosion) / bins,
                  static_cast<double>(best_lo + best_len - erosion) / bins};
  return res;
}

CommonSupport common_support(const Family& family, const std::vector<double>& a_grid, int bins, int erosion) {
  std::vector<DensityProfile> profiles;
  for (double a : a_grid) profiles.push_back(ulam_density(family, a, bins));
  return common_support(profiles, erosion);
}

EntropyEstimate rokhlin_entropy(const Family& family, double a, const DensityProfile& profile, int birkhoff_n,
                                double x0) {
  EntropyEstimate e;
  e.quadrature = profile.entropy;
  e.birkhoff = birkhoff_average(
      family, a, x0, [&](double x) { return std::log(std::abs(family.deriv_x(a, x))); }, birkhoff_n);
  e.flagged = std::abs(e.quadrature - e.birkhoff) > 5e-2;
  return e;
}

}  // namespace shrinkdim
