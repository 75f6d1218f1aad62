#pragma once

// Multiprecision evaluation of a Family. Internal to the library.

#include "shrinkdim/family.hpp"

#include <boost/multiprecision/mpfr.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace shrinkdim::mp {

using Real = boost::multiprecision::mpfr_float;

/// Sets the default mpfr precision (in bits) for the lifetime of the guard.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(int bits) : saved_(Real::default_precision()) {
    Real::default_precision(digits10(bits));
  }
  ~PrecisionGuard() { Real::default_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

  static unsigned digits10(int bits) { return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1; }

 private:
  unsigned saved_;
};

inline double to_double(const Real& v) { return v.convert_to<double>(); }

/// log|v| in double, valid far below the double range.
inline double log_abs(const Real& v) { return to_double(log(abs(v))); }

/// Affine-in-x branch data of one family, evaluated in Real.
class Evaluator {
 public:
  explicit Evaluator(const Family& family) : family_(family) {}

  const Family& family() const { return family_; }

  Real breakpoint(int i, const Real& a) const {
    return std::visit(
        [&](const auto& m) -> Real {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            return Real(m.breaks[i]);
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            return Real(m.cut(i)) / a;
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            return Real(i) / a;
          } else if constexpr (std::is_same_v<M, Tent>) {
            const Real be = m.beta0 + m.beta1 * a;
            return (be - 1) / be;
          } else {
            return m.breaks[i].first + m.breaks[i].second * a;
          }
        },
        family_.map());
  }

  /// Number of branches, i.e. index of the last breakpoint.
  int branch_count(const Real& a) const {
    return std::visit(
        [&](const auto& m) -> int {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            return static_cast<int>(m.slopes.size());
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            int n = m.cut_index(to_double(a));
            while (Real(m.cut(n + 1)) < a) ++n;
            while (n > 0 && Real(m.cut(n)) >= a) --n;
            return n + 1;
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            return static_cast<int>(to_double(ceil(a)));
          } else if constexpr (std::is_same_v<M, Tent>) {
            return 2;
          } else {
            return static_cast<int>(m.breaks.size()) - 1;
          }
        },
        family_.map());
  }

  /// Left end of branch i; the right end is left_end(i + 1), except that
  /// the last branch ends at 1.
  Real left_end(int i, const Real& a) const { return i == 0 ? Real(0) : breakpoint(i, a); }
  Real right_end(int i, const Real& a) const {
    return i + 1 >= branch_count(a) ? Real(1) : breakpoint(i + 1, a);
  }

  int branch_of(const Real& a, const Real& x) const {
    return std::visit(
        [&](const auto& m) -> int {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            const int p = static_cast<int>(m.slopes.size());
            int i = static_cast<int>(std::upper_bound(m.breaks.begin(), m.breaks.end(), to_double(x)) -
                                     m.breaks.begin()) - 1;
            i = std::clamp(i, 0, p - 1);
            while (i > 0 && x < m.breaks[i]) --i;
            while (i + 1 < p && x >= m.breaks[i + 1]) ++i;
            return i;
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            const int last = branch_count(a) - 1;
            if (x >= 1) return last;
            const Real u = a * x;
            int n = m.cut_index(to_double(u));
            while (Real(m.cut(n + 1)) <= u) ++n;
            while (n > 0 && Real(m.cut(n)) > u) --n;
            return std::min(n, last);
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            const int last = branch_count(a) - 1;
            if (x >= 1) return last;
            return std::min(last, static_cast<int>(to_double(floor(a * x))));
          } else if constexpr (std::is_same_v<M, Tent>) {
            return x <= breakpoint(1, a) ? 0 : 1;
          } else {
            const int p = static_cast<int>(m.breaks.size()) - 1;
            int i = 0;
            while (i + 1 < p && x >= breakpoint(i + 1, a)) ++i;
            return i;
          }
        },
        family_.map());
  }

  Real value_on(int i, const Real& a, const Real& x) const {
    return std::visit(
        [&](const auto& m) -> Real {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            return m.offsets[i] + m.slopes[i] * (x - m.breaks[i]);
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            return (a * x - m.cut(i)) / (m.cut(i + 1) - m.cut(i));
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            return (i + 1) - a * x;
          } else if constexpr (std::is_same_v<M, Tent>) {
            const Real al = m.alpha0 + m.alpha1 * a, be = m.beta0 + m.beta1 * a;
            if (i == 0) return al * (1 - be) / be + al * x + 1;
            return be * (1 - x);
          } else {
            const Real l = breakpoint(i, a), r = breakpoint(i + 1, a);
            return (x - l) / (r - l);
          }
        },
        family_.map());
  }

  Real dx_on(int i, const Real& a) const {
    return std::visit(
        [&](const auto& m) -> Real {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            return Real(m.slopes[i]);
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            return a / (m.cut(i + 1) - m.cut(i));
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            return -a;
          } else if constexpr (std::is_same_v<M, Tent>) {
            return i == 0 ? Real(m.alpha0 + m.alpha1 * a) : Real(-(m.beta0 + m.beta1 * a));
          } else {
            return 1 / (breakpoint(i + 1, a) - breakpoint(i, a));
          }
        },
        family_.map());
  }

  Real da_on(int i, const Real& a, const Real& x) const {
    return std::visit(
        [&](const auto& m) -> Real {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FixedMap>) {
            return Real(0);
          } else if constexpr (std::is_same_v<M, GeneralisedBeta>) {
            return x / (m.cut(i + 1) - m.cut(i));
          } else if constexpr (std::is_same_v<M, NegativeBeta>) {
            return -x;
          } else if constexpr (std::is_same_v<M, Tent>) {
            const Real al = m.alpha0 + m.alpha1 * a, be = m.beta0 + m.beta1 * a;
            if (i == 0) return m.alpha1 * (1 / be - 1 + x) - al * m.beta1 / (be * be);
            return m.beta1 * (1 - x);
          } else {
            const Real l = breakpoint(i, a), r = breakpoint(i + 1, a);
            const double dl = m.breaks[i].second, dr = m.breaks[i + 1].second;
            const Real w = r - l;
            return (-dl * w - (x - l) * (dr - dl)) / (w * w);
          }
        },
        family_.map());
  }

 private:
  const Family& family_;
};

inline Real start_value(const StartPoint& x, const Real& a) {
  switch (x.type) {
    case StartPoint::Type::constant: return Real(x.c0);
    case StartPoint::Type::identity: return a;
    case StartPoint::Type::affine: return x.c0 + x.c1 * a;
  }
  return Real(x.c0);
}

inline Real start_deriv(const StartPoint& x) {
  switch (x.type) {
    case StartPoint::Type::constant: return Real(0);
    case StartPoint::Type::identity: return Real(1);
    case StartPoint::Type::affine: return Real(x.c1);
  }
  return Real(0);
}

struct Forced {
  Real value;
  Real deriv;
};

/// Every branch is affine in x for fixed a: T(x) = A x + B and dT/da = C x + D.
struct AffineBranches {
  std::vector<Real> A, B, C, D;

  AffineBranches(const Evaluator& ev, const Real& a, int count) {
    const Real zero(0), one(1);
    for (int i = 0; i < count; ++i) {
      A.push_back(ev.dx_on(i, a));
      B.push_back(ev.value_on(i, a, zero));
      D.push_back(ev.da_on(i, a, zero));
      C.push_back(ev.da_on(i, a, one) - D.back());
    }
  }
};

/// xi_n(a) and its parameter derivative along a prescribed itinerary.
inline Forced forced(const Evaluator& ev, const StartPoint& x, const Real& a, std::span<const int> itinerary) {
  int top = 0;
  for (int i : itinerary) top = std::max(top, i);
  const AffineBranches br(ev, a, top + 1);
  Forced f{start_value(x, a), start_deriv(x)};
  for (int i : itinerary) {
    f.deriv = br.A[i] * f.deriv + br.C[i] * f.value + br.D[i];
    f.value = br.A[i] * f.value + br.B[i];
  }
  return f;
}

/// Natural itinerary of xi_0 .. xi_{n-1}. Points are clamped to [0, 1].
inline std::vector<int> itinerary(const Evaluator& ev, const StartPoint& x, const Real& a, int n) {
  std::vector<int> out;
  out.reserve(n);
  Real v = start_value(x, a);
  for (int k = 0; k < n; ++k) {
    if (v < 0) v = 0;
    if (v > 1) v = 1;
    const int i = ev.branch_of(a, v);
    out.push_back(i);
    v = ev.value_on(i, a, v);
  }
  return out;
}

/// Root of xi_n(b) = target along `itinerary` by Newton's method from b0,
/// kept inside [lo, hi] by bisection fallback. xi_n must be monotone there.
/// `rising` gives the direction of xi_n on [lo, hi].
inline Real solve_forced(const Evaluator& ev, const StartPoint& x, std::span<const int> itin, const Real& target,
                         Real b0, Real lo, Real hi, bool rising, int max_iter = 200) {
  const Real eps = ldexp(Real(1), -static_cast<int>(Real::default_precision() * 3.3219280948873623) + 40);
  Real b = std::move(b0);
  Real last_step = hi - lo;
  for (int it = 0; it < max_iter; ++it) {
    const Forced f = forced(ev, x, b, itin);
    const Real g = f.value - target;
    if (g == 0) return b;
    if ((g < 0) == rising)
      lo = b;
    else
      hi = b;
    const Real newton = g / f.deriv;
    if (abs(newton) <= eps * (abs(b) + 1)) return b;
    Real next = b - newton;
    if (!(next > lo && next < hi)) next = (lo + hi) / 2;
    const Real step = abs(next - b);
    b = std::move(next);
    if (step <= eps * (abs(b) + 1) || hi - lo <= eps * (abs(b) + 1)) break;
    // Rounding noise: Newton steps stopped contracting.
    if (it > 4 && step >= last_step / 2 && step <= ldexp(eps, 64) * (abs(b) + 1)) break;
    last_step = step;
  }
  return b;
}

}  // namespace shrinkdim::mp
