#include "shrinkdim/cantor.hpp"

#include "mp_family.hpp"
#include "shrinkdim/density.hpp"
#include "shrinkdim/escape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace shrinkdim {

namespace {

using mp::Real;

std::string str(const Real& v) { return v.str(0, std::ios_base::scientific); }
Real parse(const std::string& s) { return Real(s); }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  // Uniform in [0, 1) with 106 random bits.
  Real unit_mp() { return Real(unit()) + ldexp(Real(unit()), -53); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)) % n; }

 private:
  std::mt19937_64 g_;
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t v : {a, b}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ULL;
  }
  return h;
}

std::uint64_t prefix_hash(const std::vector<int>& itin, int t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int k = 0; k < t; ++k) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned>(itin[k]));
    h *= 1099511628211ULL;
  }
  return h ^ static_cast<std::uint64_t>(t);
}

// Element I~ of a parent together with its image at time t.
struct Tilde {
  std::string left, right;
  std::vector<int> itin;
  std::string img_lo, img_hi;
  int t = 0;
  bool ok = false;
  std::string failure;
};

struct Window {
  int t = 0;
  int ylo = 0, yhi = -1;
  double lo = 0.0, hi = 0.0;
};

struct ProbeData {
  std::string b;
  bool outside = false;
  int stage = 0;  // 0 passed, 1 entropy, 2 hit, 3 escape
  std::vector<int> itin;
  std::vector<Window> windows;
};

struct Setup {
  const Family& family;
  const StartPoint& x;
  mp::Evaluator ev;
  const CantorParams& p;
  const CantorConstants& c;
  const std::vector<double>& Y;
};

int window_end(int m, double iota) { return static_cast<int>(std::floor((1.0 + iota) * m + 1e-9)); }

double log_rho(const CantorParams& p, const CantorConstants& c, int t) {
  return -p.alpha * (c.h + 2.0 * p.epsilon) * t;
}

Real mp_exp(double v) { return exp(Real(v)); }

// Push the image ball of a parent forward until it exceeds delta, keeping
// the longest piece at every cut, and pull the piece back to parameters.
Tilde push_forward(const Setup& s, const Real& L, const Real& R, const std::vector<int>& itin, double y,
                   const Real& rho) {
  Tilde out;
  const Real a = (L + R) / 2;
  Real lo = y - rho, hi = y + rho;
  std::vector<int> its = itin;
  const int limit = static_cast<int>(its.size()) * 8 + 2000;
  while (hi - lo <= s.p.delta) {
    if (static_cast<int>(its.size()) > limit) {
      out.failure = "image of the parent never reached delta";
      return out;
    }
    const Real cl = lo < 0 ? Real(0) : lo;
    const Real ch = hi > 1 ? Real(1) : hi;
    const int i_lo = s.ev.branch_of(a, cl), i_hi = s.ev.branch_of(a, ch);
    int best = i_lo;
    Real best_len = -1, best_l, best_r;
    for (int i = std::min(i_lo, i_hi); i <= std::max(i_lo, i_hi); ++i) {
      const Real pl = max(cl, s.ev.left_end(i, a)), pr = min(ch, s.ev.right_end(i, a));
      if (pr - pl > best_len) {
        best_len = pr - pl;
        best = i;
        best_l = pl;
        best_r = pr;
      }
    }
    its.push_back(best);
    Real u = s.ev.value_on(best, a, best_l), v = s.ev.value_on(best, a, best_r);
    if (u > v) std::swap(u, v);
    lo = std::move(u);
    hi = std::move(v);
  }
  const mp::Forced f = mp::forced(s.ev, s.x, a, its);
  auto pull = [&](const Real& target) {
    Real b0 = a + (target - f.value) / f.deriv;
    if (b0 < L) b0 = L;
    if (b0 > R) b0 = R;
    return mp::solve_forced(s.ev, s.x, its, target, b0, L, R, f.deriv > 0);
  };
  Real bl = pull(lo), br = pull(hi);
  if (bl > br) std::swap(bl, br);
  if (bl < L) bl = L;
  if (br > R) br = R;
  if (!(br > bl)) {
    out.failure = "empty preimage of the escape piece";
    return out;
  }
  Real il = mp::forced(s.ev, s.x, bl, its).value, ih = mp::forced(s.ev, s.x, br, its).value;
  if (il > ih) std::swap(il, ih);
  out.left = str(bl);
  out.right = str(br);
  out.img_lo = str(il);
  out.img_hi = str(ih);
  out.t = static_cast<int>(its.size());
  out.itin = std::move(its);
  out.ok = true;
  return out;
}

// Affine branches of T_b for one fixed parameter.
struct BranchTable {
  std::vector<Real> left, right, A, B;
  std::vector<double> log_slope;

  BranchTable(const mp::Evaluator& ev, const Real& b) {
    const int n = ev.branch_count(b);
    for (int i = 0; i < n; ++i) {
      left.push_back(ev.left_end(i, b));
      right.push_back(ev.right_end(i, b));
      A.push_back(ev.dx_on(i, b));
      B.push_back(ev.value_on(i, b, Real(0)));
      log_slope.push_back(std::log(std::abs(mp::to_double(A.back()))));
    }
  }

  int find(const mp::Evaluator& ev, const Real& b, const Real& v) const {
    const int n = static_cast<int>(left.size());
    int lo = 0, hi = n - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (v >= left[mid])
        lo = mid;
      else
        hi = mid - 1;
    }
    // Boundary conventions differ between families; defer to the evaluator.
    if ((lo > 0 && v == left[lo]) || (lo + 1 < n && v == left[lo + 1])) return ev.branch_of(b, v);
    return lo;
  }
};

// Entropy, hit and escape filters plus the target windows of one sample.
// Runs at the current (reduced) precision; b is read from its full-precision text.
ProbeData analyse_probe(const Setup& s, const std::string& b_text, const Tilde& tl, int m) {
  ProbeData d;
  const Real b = parse(b_text);
  const Real img_lo = parse(tl.img_lo), img_hi = parse(tl.img_hi);
  const CantorParams& p = s.p;
  const CantorConstants& c = s.c;
  const int W = window_end(m, p.iota);
  const int T_end = W + p.t_cap + 1;
  const double delta2 = p.delta * p.delta;
  const BranchTable bt(s.ev, b);

  ImageTrace tr;
  tr.a = mp::to_double(b);
  tr.length.assign(T_end + 1, 1.0);
  tr.is_return.assign(T_end + 1, 0);
  d.itin.reserve(T_end);

  Real v = mp::start_value(s.x, b);
  Real lo, hi, u, w;
  double S = 0.0;
  bool entropy_ok = true;
  int hits = 0;
  for (int t = 0; t < T_end; ++t) {
    if (v < 0) v = 0;
    if (v > 1) v = 1;
    const int i = bt.find(s.ev, b, v);
    d.itin.push_back(i);
    if (t < tl.t) {
      if (i != tl.itin[t]) {
        d.outside = true;
        return d;
      }
    } else {
      if (t == tl.t) {
        lo = min(img_lo, v);
        hi = max(img_hi, v);
      }
      tr.length[t] = mp::to_double(hi - lo);
      if (t >= m && t <= W) {
        const double vd = mp::to_double(v);
        if (vd >= c.s1.lo && vd <= c.s1.hi) ++hits;
        if (tr.length[t] >= delta2) {
          const double r = std::max(delta2 / 4.0, std::exp(log_rho(p, c, t)));
          Window win;
          win.t = t;
          win.lo = mp::to_double(lo);
          win.hi = mp::to_double(hi);
          win.ylo = static_cast<int>(std::lower_bound(s.Y.begin(), s.Y.end(), win.lo + r) - s.Y.begin());
          win.yhi = static_cast<int>(std::upper_bound(s.Y.begin(), s.Y.end(), win.hi - r) - s.Y.begin()) - 1;
          if (win.ylo <= win.yhi) d.windows.push_back(win);
        }
      }
      const bool cut = lo < bt.left[i] || hi > bt.right[i];
      if (lo < bt.left[i]) lo = bt.left[i];
      if (hi > bt.right[i]) hi = bt.right[i];
      u = bt.A[i] * lo + bt.B[i];
      w = bt.A[i] * hi + bt.B[i];
      if (u > w) u.swap(w);
      lo.swap(u);
      hi.swap(w);
      tr.is_return[t + 1] = cut ? 1 : 0;
    }
    S += bt.log_slope[i];
    const int n = t + 1;
    if (n >= m && n <= W) {
      const double r = S / n;
      if (!(r > c.h - 2.0 * p.epsilon && r < c.h + 2.0 * p.epsilon)) entropy_ok = false;
    }
    v = bt.A[i] * v + bt.B[i];
  }
  tr.length[T_end] = mp::to_double(hi - lo);

  if (!entropy_ok) {
    d.stage = 1;
    return d;
  }
  const double freq = static_cast<double>(hits) / (W - m + 1);
  if (freq < c.tau_hat * c.l / 2.0) {
    d.stage = 2;
    return d;
  }
  const EscapeRecord rec = theta_for_window(tr, m, p.iota, p.delta, p.t_cap);
  if (rec.capped || static_cast<double>(rec.theta) >= 3.0 * c.tau1 * m) d.stage = 3;
  return d;
}

}  // namespace

std::vector<double> dense_target_set(Range s1, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(s1.hi >= s1.lo)) throw std::invalid_argument("target interval must satisfy lo <= hi");
  const double spacing = delta * delta / 4.0;
  const double len = s1.width();
  if (len < spacing * (1.0 - 1e-12)) return {s1.mid()};
  const int gaps = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
  std::vector<double> y(gaps + 1);
  for (int j = 0; j <= gaps; ++j) y[j] = s1.lo + len * j / gaps;
  y.back() = s1.hi;
  return y;
}

double default_window_ratio(double alpha, double epsilon, double iota) {
  return std::max(10.0, 1.0 + 1.5 * alpha / (17.0 * epsilon + iota));
}

ParamInterval select_seed(const Family& family, const StartPoint& x, int n, double delta) {
  const auto part = continuity_partition(family, x, family.range(), n);
  const double mid = family.range().mid();
  const ParamInterval* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& iv : part) {
    if (iv.unresolved || !iv.in_escape_position(delta)) continue;
    const double d = std::max({0.0, iv.left - mid, mid - iv.right});
    if (d < best_d) {
      best_d = d;
      best = &iv;
    }
  }
  if (!best) throw std::runtime_error("no generation-" + std::to_string(n) + " interval is in escape position");
  return *best;
}

namespace {

int bits_for(const CantorParams& p, double h, int W) {
  const double nats = (1.0 + p.alpha) * (h + 5.0 * p.epsilon) * W;
  return static_cast<int>(std::ceil(nats / std::log(2.0))) + 96;
}

CantorConstants resolve_constants(const Family& family, const ParamInterval& seed, const CantorParams& p) {
  CantorConstants c;
  const double a_mid = 0.5 * (seed.left + seed.right);
  const bool need_density = p.h <= 0.0 || p.tau_hat <= 0.0 || !(p.s1.hi > p.s1.lo);
  DensityProfile prof;
  if (need_density) prof = ulam_density(family, a_mid, p.density_bins);
  c.h = p.h > 0.0 ? p.h : rokhlin_entropy(family, a_mid, prof).quadrature;
  if (p.s1.hi > p.s1.lo) {
    c.s1 = p.s1;
  } else {
    const CommonSupport cs = common_support(std::vector<DensityProfile>{prof}, 1);
    if (cs.empty) throw std::runtime_error("density support is empty: " + cs.diagnostic);
    c.s1 = cs.interval;
  }
  c.l = c.s1.width();
  if (p.tau_hat > 0.0) {
    c.tau_hat = p.tau_hat;
  } else {
    double lo = std::numeric_limits<double>::infinity();
    for (int j = 0; j < prof.bins; ++j) {
      const double centre = (j + 0.5) / prof.bins;
      if (centre >= c.s1.lo && centre <= c.s1.hi) lo = std::min(lo, prof.values[j]);
    }
    c.tau_hat = std::isfinite(lo) ? lo : 0.0;
  }
  const double bound = p.iota * c.tau_hat * c.l / 6.0;
  c.tau1 = p.tau1 > 0.0 ? p.tau1 : bound / 2.0;
  if (!(c.tau1 < bound))
    throw std::invalid_argument("tau1 = " + std::to_string(c.tau1) + " violates tau1 < iota tau l / 6 = " +
                                std::to_string(bound));
  c.sumfreq_margin = c.tau_hat * c.l / 2.0 - 3.0 * c.tau1 / p.iota;
  return c;
}

void validate(const CantorParams& p) {
  if (!(p.alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(p.epsilon > 0.0 && p.epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 1/2)");
  if (!(p.iota > 0.0)) throw std::invalid_argument("iota must be positive");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (p.levels < 0) throw std::invalid_argument("levels must be non-negative");
  if (p.probes < 1 || p.children < 1) throw std::invalid_argument("probes and children must be positive");
  if (p.window_ratio != 0.0 && !(p.window_ratio > 1.0)) throw std::invalid_argument("window_ratio must exceed 1");
  if (p.t_cap < 1) throw std::invalid_argument("t_cap must be positive");
}

struct Child {
  std::size_t probe = 0;
  int t = 0;
  Real carrier_l, carrier_r, left, right;
  double log_carrier = 0.0, log_width = 0.0;
  ChildAudit audit;
  std::vector<int> itin;  // itinerary up to t
  std::size_t audit_index = 0;
  bool keep = true;
};

double sum_logderiv(const Setup& s, const Real& a, const std::vector<int>& itin, int t) {
  std::vector<double> slope;
  double S = 0.0;
  for (int k = 0; k < t; ++k) {
    const int i = itin[k];
    while (static_cast<int>(slope.size()) <= i)
      slope.push_back(std::log(std::abs(mp::to_double(s.ev.dx_on(static_cast<int>(slope.size()), a)))));
    S += slope[i];
  }
  return S;
}

std::vector<int> natural_itinerary(const Setup& s, const Real& b, int n) {
  const BranchTable bt(s.ev, b);
  std::vector<int> out;
  out.reserve(n);
  Real v = mp::start_value(s.x, b);
  for (int k = 0; k < n; ++k) {
    if (v < 0) v = 0;
    if (v > 1) v = 1;
    const int i = bt.find(s.ev, b, v);
    out.push_back(i);
    v = bt.A[i] * v + bt.B[i];
  }
  return out;
}

Real solve_near(const Setup& s, const std::vector<int>& itin, const Real& b, const mp::Forced& f, const Real& target,
                const Real& span, const Real& L, const Real& R) {
  Real lo = b - span, hi = b + span;
  if (lo < L) lo = L;
  if (hi > R) hi = R;
  Real b0 = b + (target - f.value) / f.deriv;
  if (b0 < lo) b0 = lo;
  if (b0 > hi) b0 = hi;
  return mp::solve_forced(s.ev, s.x, itin, target, b0, lo, hi, f.deriv > 0);
}

// Build the children of one parent at the current working precision.
void build_children(const Setup& s, const Tilde& tl, int m, std::uint64_t stream, ParentReport& rep, std::vector<Child>& kept, double& log_lambda_f) {
  const CantorParams& p = s.p;
  const CantorConstants& c = s.c;
  const Real TL = parse(tl.left), TR = parse(tl.right);
  const Real width = TR - TL;
  Rng rng(stream);

  std::vector<ProbeData> probes;
  probes.reserve(p.probes);
  std::vector<std::string> points;
  for (int j = 0; j < p.probes; ++j) points.push_back(str(TL + rng.unit_mp() * width));
  {
    // Orbits up to the end of the trace only need to resolve e^{-h T}.
    const int T_end = window_end(m, p.iota) + p.t_cap + 1;
    const double orbit_bits = (c.h + 5.0 * p.epsilon) * T_end / std::log(2.0);
    const double place_bits = -mp::log_abs(width) / std::log(2.0);
    mp::PrecisionGuard g(static_cast<int>(std::ceil(std::max(orbit_bits, place_bits))) + 96);
    for (int j = 0; j < p.probes; ++j) {
      probes.push_back(analyse_probe(s, points[j], tl, m));
      probes.back().b = points[j];
    }
  }

  rep.probes = p.probes;
  const int P = static_cast<int>(s.Y.size());
  std::vector<int> cover(P + 1, 0);
  for (const auto& d : probes) {
    if (d.outside) {
      ++rep.outside;
      continue;
    }
    if (d.stage == 1) ++rep.rejected_entropy;
    if (d.stage == 2) ++rep.rejected_hit;
    if (d.stage == 3) ++rep.rejected_escape;
    if (d.stage != 0) continue;
    std::vector<std::pair<int, int>> r;
    for (const auto& w : d.windows) r.emplace_back(w.ylo, w.yhi);
    std::sort(r.begin(), r.end());
    int cur_lo = -1, cur_hi = -2;
    for (const auto& [a, b] : r) {
      if (a > cur_hi + 1) {
        if (cur_hi >= cur_lo) {
          ++cover[cur_lo];
          --cover[cur_hi + 1];
        }
        cur_lo = a;
        cur_hi = b;
      } else {
        cur_hi = std::max(cur_hi, b);
      }
    }
    if (cur_hi >= cur_lo && cur_lo >= 0) {
      ++cover[cur_lo];
      --cover[cur_hi + 1];
    }
  }
  int best = -1, best_count = 0, run = 0;
  for (int j = 0; j < P; ++j) {
    run += cover[j];
    if (run > best_count) {
      best_count = run;
      best = j;
    }
  }
  const int passed = p.probes - rep.outside - rep.rejected_entropy - rep.rejected_hit - rep.rejected_escape;
  rep.rejected_target = passed - best_count;
  rep.qualifying = best_count;
  rep.y_index = best;
  if (best < 0) return;
  const double y = s.Y[best];

  // First window realising the chosen target, one child per carrier.
  std::vector<Child> children;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t j = 0; j < probes.size() && static_cast<int>(children.size()) < p.children; ++j) {
    const auto& d = probes[j];
    if (d.outside || d.stage != 0) continue;
    const Window* w = nullptr;
    for (const auto& cand : d.windows)
      if (cand.ylo <= best && best <= cand.yhi) {
        w = &cand;
        break;
      }
    if (!w) continue;
    if (!seen.insert(prefix_hash(d.itin, w->t)).second) continue;
    Child ch;
    ch.probe = j;
    ch.t = w->t;
    ch.itin.assign(d.itin.begin(), d.itin.begin() + w->t);
    const std::vector<int>& it = ch.itin;
    const Real b = parse(d.b);
    const mp::Forced f = mp::forced(s.ev, s.x, b, it);
    const Real span = 4 * Real(w->hi - w->lo) / abs(f.deriv);
    ch.carrier_l = solve_near(s, it, b, f, Real(w->lo), span, TL, TR);
    ch.carrier_r = solve_near(s, it, b, f, Real(w->hi), span, TL, TR);
    if (ch.carrier_l > ch.carrier_r) std::swap(ch.carrier_l, ch.carrier_r);
    const Real rho = mp_exp(log_rho(p, c, w->t));
    ch.left = solve_near(s, it, b, f, y - rho, span, TL, TR);
    ch.right = solve_near(s, it, b, f, y + rho, span, TL, TR);
    if (ch.left > ch.right) std::swap(ch.left, ch.right);
    ch.log_carrier = mp::log_abs(ch.carrier_r - ch.carrier_l);
    ch.log_width = mp::log_abs(ch.right - ch.left);

    ChildAudit& au = ch.audit;
    const int n = w->t;
    const bool verified = ch.left > TL && ch.right < TR && ch.right > ch.left &&
                          natural_itinerary(s, ch.left, n) == it && natural_itinerary(s, ch.right, n) == it;
    const Real mid = (ch.left + ch.right) / 2;
    const double h = c.h, e = p.epsilon, a1 = 1.0 + p.alpha;
    au.length_ok = ch.log_width >= -a1 * (h + 3 * e) * n && ch.log_width <= -a1 * (h - 3 * e) * n;
    au.sum_ok = true;
    double S_mid = 0.0;
    for (const Real* pt : std::initializer_list<const Real*>{&ch.left, &mid, &ch.right}) {
      const double S = sum_logderiv(s, *pt, it, n);
      if (pt == &mid) S_mid = S;
      if (!(S >= (h - 2 * e) * n && S <= (h + 2 * e) * n)) au.sum_ok = false;
    }
    au.window_ok = n >= m && n <= window_end(m, p.iota);
    const Real img = abs(mp::forced(s.ev, s.x, ch.right, it).value - mp::forced(s.ev, s.x, ch.left, it).value);
    const double delta_k = std::log(2.0) + log_rho(p, c, window_end(m, p.iota));
    au.image_ok = mp::log_abs(img) >= delta_k - 1e-12;
    au.image_error = std::abs(mp::to_double(img / (2 * rho)) - 1.0);
    const Real miss = abs(mp::forced(s.ev, s.x, mid, it).value - y);
    au.membership_ok = miss == 0 || mp::log_abs(miss) <= -p.alpha * S_mid;
    if (!verified)
      ++rep.pruned_verify;
    else if (!au.length_ok)
      ++rep.pruned_length;
    else if (!au.sum_ok)
      ++rep.pruned_sum;
    else if (!au.image_ok || !au.window_ok)
      ++rep.pruned_image;
    ch.keep = verified && au.length_ok && au.sum_ok && au.image_ok && au.window_ok;
    children.push_back(std::move(ch));
  }

  // lambda(I ∩ F_k) from the sampled fraction, never below the explicit carriers.
  double log_sum = -std::numeric_limits<double>::infinity();
  double log_mean = 0.0;
  int nc = 0;
  int n_max = 0;
  for (const auto& ch : children) {
    log_sum = log_sum > ch.log_carrier ? log_sum + std::log1p(std::exp(ch.log_carrier - log_sum))
                                       : ch.log_carrier + std::log1p(std::exp(log_sum - ch.log_carrier));
    log_mean += ch.log_carrier;
    ++nc;
    n_max = std::max(n_max, ch.t);
  }
  const double log_sampled = mp::log_abs(width) + std::log(static_cast<double>(best_count) / p.probes);
  log_lambda_f = std::max(log_sampled, log_sum);
  rep.log_lambda_f = log_lambda_f;
  if (nc > 0) {
    log_mean /= nc;
    rep.log_child_count = log_lambda_f - log_mean;
    rep.count_margin = rep.log_child_count - (c.h - 4.0 * p.epsilon) * n_max;
  }

  // Sibling separation among the surviving explicit children.
  std::vector<Child*> alive;
  for (auto& ch : children)
    if (ch.keep) alive.push_back(&ch);
  std::sort(alive.begin(), alive.end(), [](const Child* a, const Child* b) { return a->left < b->left; });
  const double sep3 = -(c.h + 3 * p.epsilon) * (1 + p.iota) * m;
  const double sep4 = -(c.h + 4 * p.epsilon) * (1 + p.iota) * m;
  std::vector<Child*> survivors;
  for (Child* ch : alive) {
    if (!survivors.empty()) {
      const double g = mp::log_abs(ch->left - survivors.back()->right);
      if (!(ch->left > survivors.back()->right) || g < sep4) {
        ch->audit.separation_ok = false;
        ch->keep = false;
        ++rep.pruned_separation;
        continue;
      }
    }
    survivors.push_back(ch);
  }
  for (std::size_t j = 0; j < survivors.size(); ++j) {
    double g = std::numeric_limits<double>::infinity();
    if (j > 0) g = std::min(g, mp::log_abs(survivors[j]->left - survivors[j - 1]->right));
    if (j + 1 < survivors.size()) g = std::min(g, mp::log_abs(survivors[j + 1]->left - survivors[j]->right));
    auto& au = survivors[j]->audit;
    if (std::isfinite(g)) {
      au.log_separation = g;
      au.separation_margin_3 = g - sep3;
      au.separation_margin_4 = g - sep4;
    }
  }
  for (auto& ch : children) {
    ch.audit_index = rep.children.size();
    rep.children.push_back(ch.audit);
    if (ch.keep) kept.push_back(std::move(ch));
  }
}

}  // namespace

CantorResult build_cantor(const Family& family, const StartPoint& x, const ParamInterval& seed,
                          const std::vector<double>& targets, const CantorParams& params) {
  validate(params);
  if (targets.empty()) throw std::invalid_argument("target set is empty");
  if (!std::is_sorted(targets.begin(), targets.end())) throw std::invalid_argument("targets must be sorted");
  if (!seed.in_escape_position(params.delta)) throw std::invalid_argument("seed interval is not in escape position");

  CantorResult res;
  res.params = params;
  res.constants = resolve_constants(family, seed, params);
  res.constants.p = static_cast<int>(targets.size());
  CantorConstants& c = res.constants;
  const CantorParams& p = params;
  Setup s{family, x, mp::Evaluator(family), p, c, targets};

  auto& nodes = res.measure.nodes;
  std::vector<std::vector<int>> itins;  // itinerary of every explicit node up to n(J)
  std::vector<std::string> carrier_l, carrier_r;

  int bits = 160;
  {
    mp::PrecisionGuard g(bits);
    CantorNode root;
    root.level = 0;
    root.left = str(Real(seed.left));
    root.right = str(Real(seed.right));
    root.approx_left = seed.left;
    root.log_width = std::log(seed.width());
    root.carrier_left = root.left;
    root.carrier_right = root.right;
    root.log_carrier = root.log_width;
    root.n = seed.generation;
    root.mu = 1.0L;
    root.log_mu = 0.0;
    nodes.push_back(root);
    itins.push_back(seed.itinerary);
  }
  CantorLevel l0;
  l0.k = 0;
  l0.h = c.h;
  l0.epsilon = p.epsilon;
  l0.iota = p.iota;
  l0.bits = bits;
  l0.intervals = {0};
  res.levels.push_back(l0);

  int m_sched = p.m_first > 0 ? p.m_first : std::max(16, 2 * seed.generation);
  const double ratio = p.window_ratio > 0.0 ? p.window_ratio : default_window_ratio(p.alpha, p.epsilon, p.iota);
  res.params.window_ratio = ratio;
  double c1_min = 1.0;
  for (int k = 1; k <= p.levels; ++k) {
    if (k > 1) m_sched = static_cast<int>(std::ceil(ratio * m_sched - 1e-9));
    const std::vector<int> parents = res.levels.back().intervals;

    // I~ for every parent, at the parents' precision.
    std::vector<Tilde> tildes;
    {
      mp::PrecisionGuard g(bits + 64);
      for (int pi : parents) {
        const CantorNode& par = nodes[pi];
        if (k == 1) {
          Tilde t;
          t.left = par.left;
          t.right = par.right;
          t.itin = seed.itinerary;
          t.img_lo = str(Real(seed.image_lo()));
          t.img_hi = str(Real(seed.image_hi()));
          t.t = seed.generation;
          t.ok = true;
          tildes.push_back(std::move(t));
        } else {
          tildes.push_back(push_forward(s, parse(par.left), parse(par.right), itins[pi], par.y, mp_exp(par.log_radius)));
        }
      }
    }
    std::vector<int> ms(parents.size());
    int W_max = 0;
    for (std::size_t j = 0; j < parents.size(); ++j) {
      ms[j] = std::max(m_sched, tildes[j].t + 1);
      W_max = std::max(W_max, window_end(ms[j], p.iota) + p.t_cap + 1);
    }
    bits = std::max(bits + 64, bits_for(p, c.h, W_max));

    CantorLevel lev;
    lev.k = k;
    lev.m = m_sched;
    lev.h = c.h;
    lev.epsilon = p.epsilon;
    lev.iota = p.iota;
    lev.bits = bits;
    lev.delta_k = 2.0 * std::exp(log_rho(p, c, window_end(m_sched, p.iota)));

    mp::PrecisionGuard g(bits);
    for (std::size_t j = 0; j < parents.size(); ++j) {
      const int pi = parents[j];
      ParentReport rep;
      rep.node = pi;
      rep.m = ms[j];
      std::vector<Child> kept;
      double log_lambda_f = 0.0;
      const Tilde& tl = tildes[j];
      if (tl.ok) {
        rep.tilde_left = tl.left;
        rep.tilde_right = tl.right;
        rep.t_tilde = tl.t;
        const Real TL = parse(tl.left), TR = parse(tl.right);
        rep.log_tilde = mp::log_abs(TR - TL);
        rep.c1 = std::exp(rep.log_tilde - nodes[pi].log_width);
        c1_min = std::min(c1_min, rep.c1);
        build_children(s, tl, ms[j], mix(p.seed, static_cast<std::uint64_t>(k), j), rep, kept,
                       log_lambda_f);
      }

      // Mass: mu(J) = lambda(carrier) / lambda(I ∩ F_k) mu(I); the rest stays with the parent.
      const long double mu_parent = nodes[pi].mu;
      const double log_mu_parent = nodes[pi].log_mu;
      long double assigned = 0.0L;
      for (auto& ch : kept) {
        CantorNode nd;
        nd.level = k;
        nd.parent = pi;
        nd.left = str(ch.left);
        nd.right = str(ch.right);
        nd.approx_left = mp::to_double(ch.left);
        nd.log_width = ch.log_width;
        nd.carrier_left = str(ch.carrier_l);
        nd.carrier_right = str(ch.carrier_r);
        nd.log_carrier = ch.log_carrier;
        nd.n = ch.t;
        nd.y_index = rep.y_index;
        nd.y = targets[rep.y_index];
        nd.log_radius = log_rho(p, c, ch.t);
        nd.log_mu = ch.log_carrier - log_lambda_f + log_mu_parent;
        nd.mu = std::exp(static_cast<long double>(nd.log_mu));
        assigned += nd.mu;
        const int id = static_cast<int>(nodes.size());
        nodes[pi].children.push_back(id);
        rep.children[ch.audit_index].node = id;
        lev.intervals.push_back(id);
        nodes.push_back(std::move(nd));
        itins.push_back(std::move(ch.itin));
      }
      const long double rest = mu_parent - assigned;
      if (rest > 0.0L) {
        CantorNode nd;
        nd.level = k;
        nd.parent = pi;
        nd.remainder = true;
        nd.left = tl.ok ? tl.left : nodes[pi].left;
        nd.right = tl.ok ? tl.right : nodes[pi].right;
        nd.approx_left = mp::to_double(parse(nd.left));
        nd.log_width = tl.ok ? rep.log_tilde : nodes[pi].log_width;
        nd.mu = rest;
        nd.log_mu = static_cast<double>(std::log(rest));
        const int id = static_cast<int>(nodes.size());
        nodes[pi].children.push_back(id);
        nodes.push_back(std::move(nd));
        itins.emplace_back();
      }
      lev.parents.push_back(std::move(rep));
    }
    res.levels.push_back(std::move(lev));

    if (res.levels.back().intervals.empty()) {
      res.halted = true;
      int probes = 0, outside = 0, ent = 0, hit = 0, esc = 0, tgt = 0, failed = 0;
      std::string push_failure;
      for (std::size_t j = 0; j < tildes.size(); ++j) {
        if (!tildes[j].ok) {
          ++failed;
          push_failure = tildes[j].failure;
        }
      }
      for (const auto& r : res.levels.back().parents) {
        probes += r.probes;
        outside += r.outside;
        ent += r.rejected_entropy;
        hit += r.rejected_hit;
        esc += r.rejected_escape;
        tgt += r.rejected_target;
      }
      std::string stage;
      int left = probes;
      if (failed == static_cast<int>(tildes.size()))
        stage = "escape push-forward (" + push_failure + ")";
      else if ((left -= outside) <= 0)
        stage = "itinerary (every sample left I~)";
      else if ((left -= ent) <= 0)
        stage = "entropy pinch";
      else if ((left -= hit) <= 0)
        stage = "hit frequency";
      else if ((left -= esc) <= 0)
        stage = "escape budget";
      else if ((left -= tgt) <= 0)
        stage = "target alignment";
      else
        stage = "property audit";
      res.diagnostic = "level " + std::to_string(k) + " has no surviving children; emptied by " + stage;
      break;
    }
  }
  c.c1 = c1_min;
  res.measure.bits = bits;

  // Additivity and total mass.
  double worst = 0.0;
  long double total = 0.0L;
  for (const auto& nd : nodes) {
    if (nd.children.empty()) {
      total += nd.mu;
      continue;
    }
    long double sum = 0.0L;
    for (int ch : nd.children) sum += nodes[ch].mu;
    worst = std::max(worst, static_cast<double>(std::abs(sum - nd.mu) / nd.mu));
  }
  res.measure.additivity_error = worst;
  res.measure.total_mass = static_cast<double>(total);
  return res;
}

CantorResult build_cantor(const Family& family, const StartPoint& x, const ParamInterval& seed,
                          const CantorParams& params) {
  validate(params);
  const CantorConstants c = resolve_constants(family, seed, params);
  CantorParams p = params;
  p.h = c.h;
  p.tau_hat = c.tau_hat;
  p.s1 = c.s1;
  p.tau1 = c.tau1;
  return build_cantor(family, x, seed, dense_target_set(c.s1, params.delta), p);
}

namespace {

struct Leaves {
  std::vector<Real> left, right;
  std::vector<double> log_mu, log_width;
};

Leaves collect_leaves(const MassMeasure& m) {
  Leaves lv;
  for (const auto& nd : m.nodes) {
    if (!nd.children.empty()) continue;
    lv.left.push_back(parse(nd.left));
    lv.right.push_back(parse(nd.right));
    lv.log_mu.push_back(nd.log_mu);
    lv.log_width.push_back(nd.log_width);
  }
  return lv;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_mass(const Leaves& lv, const Real& L, const Real& R) {
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < lv.left.size(); ++j) {
    const Real& a = lv.left[j] > L ? lv.left[j] : L;
    const Real& b = lv.right[j] < R ? lv.right[j] : R;
    if (!(b > a)) continue;
    acc = log_add(acc, lv.log_mu[j] + mp::log_abs(b - a) - lv.log_width[j]);
  }
  return acc;
}

int deepest_level(const CantorResult& r) {
  for (int k = static_cast<int>(r.levels.size()) - 1; k >= 1; --k)
    if (!r.levels[k].intervals.empty()) return k;
  return 0;
}

ExponentProbe make_probe(const Leaves& lv, const Real& L, const Real& R, int level) {
  ExponentProbe pr;
  pr.approx_left = mp::to_double(L);
  pr.approx_right = mp::to_double(R);
  pr.log_length = mp::log_abs(R - L);
  pr.log_mu = log_mass(lv, L, R);
  pr.exponent = pr.log_mu / pr.log_length;
  pr.level = level;
  return pr;
}

// Random interval of log-length between lo_log and hi_log containing a point of the node.
std::pair<Real, Real> random_probe(Rng& rng, const CantorNode& nd, double lo_log, double hi_log) {
  const Real L = parse(nd.left), R = parse(nd.right);
  if (hi_log < lo_log) std::swap(lo_log, hi_log);
  const double lg = lo_log + rng.unit() * (hi_log - lo_log);
  const Real len = exp(Real(lg));
  const Real c = L + rng.unit_mp() * (R - L);
  const Real left = c - rng.unit_mp() * len;
  return {left, left + len};
}

}  // namespace

double log_mass(const MassMeasure& measure, const std::string& left, const std::string& right) {
  mp::PrecisionGuard g(std::max(measure.bits, 64));
  return log_mass(collect_leaves(measure), parse(left), parse(right));
}

LocalExponent local_exponent(const CantorResult& result, int probe_intervals, std::uint64_t seed) {
  LocalExponent out;
  const int K = deepest_level(result);
  if (K < 1) return out;
  mp::PrecisionGuard g(std::max(result.measure.bits, 64));
  const auto& nodes = result.measure.nodes;
  const Leaves lv = collect_leaves(result.measure);
  for (int k = 1; k <= K; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    for (int id : result.levels[k].intervals) lo = std::min(lo, nodes[id].log_mu / nodes[id].log_width);
    out.level_exponents.push_back(lo);
  }

  const CantorLevel& lev = result.levels[K];
  const CantorParams& p = result.params;
  const double gap_log = -(result.constants.h + 3.0 * p.epsilon) * (1.0 + p.iota) * lev.m;
  for (int id : lev.intervals)
    out.probes.push_back(make_probe(lv, parse(nodes[id].left), parse(nodes[id].right), K));
  Rng rng(mix(seed, 0x10ca1, static_cast<std::uint64_t>(K)));
  for (int j = 0; j < probe_intervals; ++j) {
    const CantorNode& nd = nodes[lev.intervals[rng.index(lev.intervals.size())]];
    const auto [L, R] = random_probe(rng, nd, nd.log_width, gap_log);
    out.probes.push_back(make_probe(lv, L, R, K));
  }
  out.s_lower = std::numeric_limits<double>::infinity();
  for (const auto& pr : out.probes)
    if (std::isfinite(pr.log_mu) && pr.log_length < 0.0) out.s_lower = std::min(out.s_lower, pr.exponent);
  out.defined = std::isfinite(out.s_lower);
  if (!out.defined) out.s_lower = 0.0;
  return out;
}

ScalingAudit scaling_audit(const CantorResult& result, int probe_intervals, std::uint64_t seed) {
  ScalingAudit au;
  const CantorParams& p = result.params;
  const CantorConstants& c = result.constants;
  au.s = std::max(0.0, (1.0 - 17.0 * p.epsilon - p.iota) / (1.0 + p.alpha)) * (1.0 - 1e-9);
  const double den = (1.0 - 2.0 * p.epsilon) * c.tau_hat * c.l * c.c1;
  au.c2 = den > 0.0 ? std::max(3.0, c.p / den) : std::numeric_limits<double>::max();
  au.log_c2_observed = -std::numeric_limits<double>::infinity();
  const double limit = std::log(2.0 * au.c2);

  mp::PrecisionGuard g(std::max(result.measure.bits, 64));
  const auto& nodes = result.measure.nodes;
  const Leaves lv = collect_leaves(result.measure);
  std::vector<int> explicit_nodes;
  for (std::size_t k = 1; k < result.levels.size(); ++k)
    for (int id : result.levels[k].intervals) explicit_nodes.push_back(id);

  auto check = [&](const Real& L, const Real& R) {
    const double lm = log_mass(lv, L, R);
    if (!std::isfinite(lm)) return;
    const double r = lm - au.s * mp::log_abs(R - L);
    au.log_c2_observed = std::max(au.log_c2_observed, r);
    ++au.probes;
    if (r > limit) ++au.violations;
  };
  for (int id : explicit_nodes) check(parse(nodes[id].left), parse(nodes[id].right));
  if (!explicit_nodes.empty()) {
    Rng rng(mix(seed, 0x5ca1e, explicit_nodes.size()));
    const double top = nodes[0].log_width;
    for (int j = 0; j < probe_intervals; ++j) {
      const CantorNode& nd = nodes[explicit_nodes[rng.index(explicit_nodes.size())]];
      const auto [L, R] = random_probe(rng, nd, nd.log_width, top);
      check(L, R);
    }
  }
  if (au.probes == 0) au.log_c2_observed = 0.0;
  au.holds = au.violations == 0;
  return au;
}

nlohmann::json cantor_tree_json(const CantorResult& result) {
  const auto& nodes = result.measure.nodes;
  std::function<nlohmann::json(int)> rec = [&](int id) {
    const CantorNode& nd = nodes[id];
    nlohmann::json j;
    j["interval"] = {nd.left, nd.right};
    j["level"] = nd.level;
    j["n"] = nd.n;
    j["y"] = nd.y;
    j["mu"] = static_cast<double>(nd.mu);
    j["log_mu"] = nd.log_mu;
    j["remainder"] = nd.remainder;
    j["children"] = nlohmann::json::array();
    for (int ch : nd.children) j["children"].push_back(rec(ch));
    return j;
  };
  return nodes.empty() ? nlohmann::json::object() : rec(0);
}

}  // namespace shrinkdim
