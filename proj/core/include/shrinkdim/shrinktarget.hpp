#pragma once

#include "shrinkdim/pressure.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace shrinkdim {

/// Maximal sub-interval of a continuity interval whose image lies in the
/// shrinking target [y - radius, y + radius], radius = exp(-alpha S_n log|T'|).
struct CoverInterval {
  std::size_t parent = 0;  // index into the generation-n partition
  double left = 0.0;
  double right = 0.0;
  int n = 0;
  double y = 0.0;
  double alpha = 0.0;
  double radius = 0.0;
  double s_n_mid = 0.0;          // S_n log|T'| at the midpoint
  double parent_min_deriv = 0.0;  // min |xi_n'| over probes of the parent

  double length() const { return right - left; }
};

std::vector<CoverInterval> build_cover(const Family& family, const StartPoint& x,
                                       const std::vector<ParamInterval>& partition, double y, double alpha);

std::vector<CoverInterval> build_cover(const Family& family, const StartPoint& x, Range range, double y, double alpha,
                                       int n, const PartitionOptions& opts = {});

struct CriticalExponent {
  double s_hat = 0.0;
  bool empty = false;  // every cover was empty
  std::vector<std::pair<double, double>> rates;  // (s, growth rate of log sigma_n(s))
};

/// Critical exponent of sum_n sum_k |I_hat_{n,k}|^s. The per-n sums
/// sigma_n(s) are fitted by a line in n over the trailing half of the
/// available generations; s_hat is the zero of the slope, bracketed on
/// s_grid and refined by bisection.
CriticalExponent critical_exponent_upper(const std::vector<std::vector<CoverInterval>>& covers,
                                         const std::vector<double>& s_grid);

struct HitRow {
  int n = 0;
  double proxy = 0.0;  // fraction of samples with |xi_n - y| < l
  double f = 0.0;      // #{k in [n, (1+iota)n] : proxy_k >= tau l / 2} / (iota n)
};

struct HitTable {
  std::vector<HitRow> rows;
  double tau = 0.0;
  double l = 0.0;
  double iota = 0.0;
  bool quarter_bound_holds = false;    // f(n) >= tau l / 4 on every row
  double sumfreq_margin = 0.0;         // tau l / 2 - 3 tau1 / iota (positive when the alternative form holds)
};

struct HitOptions {
  double iota = 0.2;
  double tau = 0.5;   // density lower bound
  double tau1 = 0.0;  // only used for sumfreq_margin
  int stride = 1;     // rows every `stride` generations
};

/// Long orbits are double-precision pseudo-orbits; only the statistics are used.
HitTable hit_frequency(const Family& family, const StartPoint& x, const std::vector<double>& samples, double y,
                       double l, std::pair<int, int> n_range, const HitOptions& opts = {});

struct PinchRow {
  int n = 0;
  double fraction = 0.0;  // samples with |(1/n) log|(T^n)'(X(a))| - h(a)| < epsilon at this n
};

struct PinchResult {
  std::vector<PinchRow> rows;
  double fraction_all = 0.0;  // samples inside the band for every n in the range
};

PinchResult entropy_pinch(const Family& family, const StartPoint& x, const std::vector<double>& samples,
                          const std::function<double(double)>& entropy, double epsilon, std::pair<int, int> n_range);

}  // namespace shrinkdim
