#pragma once

#include "shrinkdim/partition.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace shrinkdim {

/// literal: p_value = max of p_n over the trailing half window.
/// growth: p_value = max over the trailing half window of the windowed growth
/// rate (log Z_n - log Z_{n1}) / (n - n1); same limit, no 1/n prefactor bias.
enum class PressureEstimator { literal, growth };

/// Potential phi(a, x, branch) evaluated along the parameter orbit.
using Potential = std::function<double(double a, double x, int branch)>;

/// log|T_a'(x)| on the given branch.
Potential log_derivative_potential(const Family& family);

/// S_n phi(b) = sum_{k=1}^n phi(xi_k(b)) along the interval's itinerary.
double sn_at(const Family& family, const StartPoint& x, const ParamInterval& interval, double b, const Potential& phi);

/// sup over the interval of S_n phi = sum_{k=1}^n phi(xi_k), estimated from
/// `probes` interior points plus both end points. n = interval.generation.
double sn_sup(const Family& family, const StartPoint& x, const ParamInterval& interval, const Potential& phi,
              int probes = 17);

struct PressureOptions {
  int probes = 17;
  double c_hat = 1.0;  // adds log(c_hat) to every p_n as the distortion budget
  PartitionOptions partition{};
  PressureEstimator estimator = PressureEstimator::growth;
};

/// Per-generation inf of S_n log|T'| over every resolved continuity interval.
/// Reused for all (s, alpha) because phi = -s(1+alpha) log|T'| with s(1+alpha) >= 0.
struct PressureTable {
  std::vector<int> generations;
  std::vector<std::vector<double>> inf_logderiv;
  double log_c_hat = 0.0;
  double lambda_min = 0.0;
  double Lambda_max = 0.0;
  int n_requested = 0;
  PressureEstimator estimator = PressureEstimator::growth;
  bool truncated = false;  // node budget hit before the window's end
};

PressureTable build_pressure_table(const Family& family, const StartPoint& x, Range range,
                                   std::pair<int, int> n_window, const PressureOptions& opts = {});

struct PressureEstimate {
  double s = 0.0;
  double alpha = 0.0;
  std::vector<std::pair<int, double>> p_sequence;  // (n, p_n)
  std::vector<std::size_t> counts;                 // intervals summed at each n
  std::vector<std::pair<int, double>> growth_sequence;  // (n, windowed growth rate), n > n1
  PressureEstimator estimator = PressureEstimator::growth;
  double p_value = 0.0;                            // max over the trailing half window
  std::pair<int, int> n_used{0, 0};
  bool truncated = false;
};

PressureEstimate pressure_from_table(const PressureTable& table, double s, double alpha,
                                     PressureEstimator estimator = PressureEstimator::growth);

PressureEstimate pressure_estimate(const Family& family, const StartPoint& x, Range range, double s, double alpha,
                                   std::pair<int, int> n_window, const PressureOptions& opts = {});

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RootResult {
  double s0 = 0.0;
  double lo = 0.0;  // final bracket
  double hi = 0.0;
  double search_hi = 0.0;
};

/// Root of s -> p_value(s) by bisection on [0, h+/((1+alpha)h-) + 0.5].
RootResult root_s0(const PressureTable& table, double alpha, double tol = 1e-6);  // uses table.estimator

/// Number of grid pairs s1 < s2 violating
/// p(s1) >= p(s2) + (s2 - s1)(1 + alpha) log(lambda)(1 - tol).
int monotonicity_violations(const PressureTable& table, double alpha, const std::vector<double>& s_grid,
                            double tol = 1e-6);

}  // namespace shrinkdim
