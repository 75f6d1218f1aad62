#include "shrinkdim/escape.hpp"

#include "shrinkdim/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace shrinkdim {

ImageTrace trace_images(const Family& family, const StartPoint& x, const ParamInterval& anchor, double a,
                        int generations, const EscapeOptions& opts) {
  const double Lambda = opts.Lambda > 0.0 ? opts.Lambda : check_assumptions(family, 64).Lambda_max;
  const int M = std::max(1, opts.steps_per_generation);
  const double upper = 4.0 * opts.c_hat * std::pow(Lambda, M) * opts.delta;

  ImageTrace tr;
  tr.a = a;
  double xi = xi_forced(family, x, a, anchor.itinerary).value;
  double lo = anchor.image_lo(), hi = anchor.image_hi();
  xi = std::clamp(xi, lo, hi);

  auto refine = [&] {
    const double len = hi - lo;
    if (len <= upper) return;
    const int k = static_cast<int>(std::ceil(len / upper));
    const double piece = len / k;
    const int j = std::clamp(static_cast<int>((xi - lo) / piece), 0, k - 1);
    const double nlo = lo + j * piece;
    hi = j == k - 1 ? hi : nlo + piece;
    lo = nlo;
  };
  refine();
  tr.length.push_back(hi - lo);
  tr.is_return.push_back(0);

  const auto breaks = family.breakpoints(a);
  constexpr double kSlack = 1e-15;
  for (int g = 1; g <= generations; ++g) {
    bool cut = false;
    for (int s = 0; s < M; ++s) {
      const int i = family.branch_of(a, std::clamp(xi, 0.0, 1.0));
      const double bl = breaks[i], br = breaks[i + 1];
      if (lo < bl - kSlack) {
        lo = bl;
        cut = true;
      }
      if (hi > br + kSlack) {
        hi = br;
        cut = true;
      }
      double u = family.value_on(i, a, lo), v = family.value_on(i, a, hi);
      if (u > v) std::swap(u, v);
      lo = std::clamp(u, 0.0, 1.0);
      hi = std::clamp(v, 0.0, 1.0);
      xi = std::clamp(family.value_on(i, a, xi), lo, hi);
    }
    refine();
    tr.length.push_back(hi - lo);
    tr.is_return.push_back(cut ? 1 : 0);
  }
  return tr;
}

int escape_time(const ImageTrace& tr, int nu, double delta, int t_max) {
  const auto& L = tr.length;
  const int size = static_cast<int>(L.size());
  if (nu >= size) return kInfiniteEscape;
  const double d2 = delta * delta;
  if (L[nu] >= d2) {
    for (int p = 1; nu + p < size && p <= t_max; ++p) {
      if (L[nu + p] >= delta) return 0;
      if (L[nu + p] < d2) break;
    }
  }
  for (int t = 1; nu + t < size && t <= t_max; ++t)
    if (L[nu + t] >= delta) return t;
  return kInfiniteEscape;
}

EscapeRecord theta_for_window(const ImageTrace& tr, int m, double iota, double delta, int t_max) {
  EscapeRecord rec;
  rec.a = tr.a;
  rec.m = m;
  const int W = static_cast<int>(std::floor((1.0 + iota) * m));
  const int size = static_cast<int>(tr.length.size());
  int next = std::max(m, 1);
  while (next <= W) {
    int nu = -1;
    for (int t = next; t <= W && t < size; ++t)
      if (tr.is_return[t] && tr.length[t - 1] >= delta) {
        nu = t;
        break;
      }
    if (nu < 0) break;
    const int E = escape_time(tr, nu, delta, t_max);
    rec.nu.push_back(nu);
    rec.E.push_back(E);
    if (E == kInfiniteEscape) {
      rec.capped = true;
      break;
    }
    rec.theta += E;
    next = nu + std::max(E, 1);
  }
  return rec;
}

std::vector<EscapeRecord> escape_analysis(const Family& family, const StartPoint& x, const ParamInterval& anchor,
                                          const std::vector<int>& m_values, const EscapeOptions& opts) {
  if (!anchor.in_escape_position(opts.delta))
    throw std::invalid_argument("escape analysis needs an anchor interval in escape position");
  if (m_values.empty()) return {};
  EscapeOptions o = opts;
  if (o.Lambda <= 0.0) o.Lambda = check_assumptions(family, 64).Lambda_max;
  const int m_hi = *std::max_element(m_values.begin(), m_values.end());
  const int G = static_cast<int>(std::floor((1.0 + o.iota) * m_hi)) + o.t_max + 1;

  std::vector<EscapeRecord> out;
  out.reserve(static_cast<std::size_t>(o.samples) * m_values.size());
  for (int i = 0; i < o.samples; ++i) {
    const double a = anchor.left + anchor.width() * weyl_point(i, o.seed);
    const auto tr = trace_images(family, x, anchor, a, G, o);
    for (int m : m_values) out.push_back(theta_for_window(tr, m, o.iota, o.delta, o.t_max));
  }
  return out;
}

TailStatistics escape_tail_statistics(const std::vector<EscapeRecord>& records, double tau1) {
  std::map<int, TailRow> rows;
  for (const auto& r : records) {
    auto& row = rows[r.m];
    row.m = r.m;
    if (r.capped) {
      ++row.capped;
      continue;
    }
    ++row.samples;
    if (static_cast<double>(r.theta) >= 3.0 * tau1 * r.m) ++row.exceed;
  }
  TailStatistics st;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (auto& [m, row] : rows) {
    row.fraction = row.samples > 0 ? static_cast<double>(row.exceed) / row.samples : 0.0;
    st.rows.push_back(row);
    if (row.fraction > 0.0) {
      const double y = std::log(row.fraction);
      sx += m;
      sy += y;
      sxx += static_cast<double>(m) * m;
      sxy += m * y;
      ++k;
    }
  }
  if (k >= 3) {
    const double den = k * sxx - sx * sx;
    if (den > 0.0) {
      st.slope = (k * sxy - sx * sy) / den;
      st.rate = -st.slope;
      st.rate_defined = true;
    }
  }
  return st;
}

}  // namespace shrinkdim
