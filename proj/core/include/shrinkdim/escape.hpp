#pragma once

#include "shrinkdim/partition.hpp"

#include <cstdint>
#include <vector>

namespace shrinkdim {

inline constexpr int kInfiniteEscape = -1;

struct EscapeOptions {
  double delta = 0.05;
  double iota = 0.2;
  int steps_per_generation = 1;  // M: analyses run on T_a^M
  int samples = 1000;
  int t_max = 60;                // escape times beyond this count as infinite
  double c_hat = 1.0;
  double Lambda = 0.0;           // per base step; 0 = estimate
  std::uint64_t seed = 0;
};

/// Image lengths of the refined partition elements containing a, in wrapped
/// generations counted from the anchor. is_return[g] is set when a cut
/// happened between generation g-1 and g.
struct ImageTrace {
  double a = 0.0;
  std::vector<double> length;
  std::vector<char> is_return;
};

ImageTrace trace_images(const Family& family, const StartPoint& x, const ParamInterval& anchor, double a,
                        int generations, const EscapeOptions& opts);

/// E(a, nu) from a trace; kInfiniteEscape when no escape happens within t_max.
int escape_time(const ImageTrace& trace, int nu, double delta, int t_max);

struct EscapeRecord {
  double a = 0.0;
  int m = 0;
  std::vector<int> nu;
  std::vector<int> E;
  long theta = 0;
  bool capped = false;
};

/// Theta_m over the window [m, (1+iota)m] of one trace.
EscapeRecord theta_for_window(const ImageTrace& trace, int m, double iota, double delta, int t_max);

/// Sample parameters inside `anchor` (which must be in escape position) and
/// compute Theta_m for every m in m_values.
std::vector<EscapeRecord> escape_analysis(const Family& family, const StartPoint& x, const ParamInterval& anchor,
                                          const std::vector<int>& m_values, const EscapeOptions& opts);

struct TailRow {
  int m = 0;
  int samples = 0;
  int capped = 0;
  int exceed = 0;
  double fraction = 0.0;
};

struct TailStatistics {
  std::vector<TailRow> rows;
  double slope = 0.0;  // least squares slope of log fraction against m
  double rate = 0.0;   // -slope
  bool rate_defined = false;
};

TailStatistics escape_tail_statistics(const std::vector<EscapeRecord>& records, double tau1);

}  // namespace shrinkdim
