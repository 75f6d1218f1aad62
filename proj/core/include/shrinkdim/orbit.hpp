#pragma once

#include "shrinkdim/family.hpp"

#include <functional>
#include <span>
#include <vector>

namespace shrinkdim {

/// Parameter orbit xi_k(a) = T_a^k(X(a)), k = 0..n, with derivative data.
///
/// birkhoff_logderiv[k] is sum_{j<k} log|T_a'(xi_j)| = log|(T_a^k)'(X(a))|.
/// q_ratio[k] = space_deriv[k] / param_deriv[k] (infinite when the
/// parameter derivative vanishes, e.g. k = 0 with constant X).
struct OrbitRecord {
  double a = 0.0;
  std::vector<double> points;
  std::vector<int> itinerary;  // itinerary[k] = branch of points[k]
  std::vector<double> birkhoff_logderiv;
  std::vector<double> space_deriv;
  std::vector<double> param_deriv;
  std::vector<double> q_ratio;
  bool hit_breakpoint = false;

  int length() const { return static_cast<int>(points.size()) - 1; }
};

inline constexpr double kCollisionTol = 1e-12;

/// Orbit up to time n. If some xi_k lies within kCollisionTol of an interior
/// breakpoint the record stops at k and hit_breakpoint is set.
OrbitRecord run_orbit(const Family& family, const StartPoint& x, double a, int n);

/// (1/n) sum_{k<n} f(T_a^k(x0)).
double birkhoff_average(const Family& family, double a, double x0, const std::function<double(double)>& f, int n);

/// xi_n(a) evaluated along a prescribed itinerary, using the affine extension
/// of each branch. Exact one-sided limits at the ends of a continuity interval.
struct ForcedOrbit {
  double value = 0.0;
  double param_deriv = 0.0;
  double log_space_deriv = 0.0;  // sum_{j<n} log|T_a'(xi_j)|
};

ForcedOrbit xi_forced(const Family& family, const StartPoint& x, double a, std::span<const int> itinerary);

struct QRatioProfile {
  std::vector<double> a;
  std::vector<double> q_n;  // Q_n per retained parameter
  double q_min = 0.0;
  double q_max = 0.0;
  double c_hat = 1.0;  // max over n in [n_lo, n] of max(|Q|, 1/|Q|)
  int dropped = 0;     // parameters with breakpoint collisions
};

QRatioProfile q_ratio_profile(const Family& family, const StartPoint& x, std::span<const double> a_grid, int n,
                              int n_lo = 5);

/// Empirical distortion constant c_hat over a uniform grid of the family's range.
double estimate_c_hat(const Family& family, const StartPoint& x, int n, int grid = 257);

}  // namespace shrinkdim
