#pragma once

#include "shrinkdim/family.hpp"

#include <string>
#include <vector>

namespace shrinkdim {

struct DensityProfile {
  double a = 0.0;
  int bins = 0;
  std::vector<double> values;    // density per bin (mass / bin width)
  std::vector<Range> support;    // maximal runs of bins with mass above the threshold
  double tau_lower = 0.0;        // min density over the support, one bin eroded at each end
  double tau_upper = 0.0;        // max density over the same bins
  double entropy = 0.0;          // Rokhlin integral by bin quadrature
  double residual = 0.0;         // L1 norm of (transfer(values) - values) in mass
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kSupportMass = 1e-8;

/// Ulam discretisation of the transfer operator on `bins` equal bins; the
/// matrix is built from exact overlaps (branches are affine in x).
DensityProfile ulam_density(const Family& family, double a, int bins = 4096, int power_iters = 20000);

struct CommonSupport {
  Range interval{0.0, 0.0};
  bool empty = true;
  std::string diagnostic;
};

/// Largest interval inside the support of every profile, eroded by
/// `erosion` bins at each end.
CommonSupport common_support(const std::vector<DensityProfile>& profiles, int erosion = 1);
CommonSupport common_support(const Family& family, const std::vector<double>& a_grid, int bins = 4096,
                             int erosion = 1);

struct EntropyEstimate {
  double quadrature = 0.0;
  double birkhoff = 0.0;
  bool flagged = false;  // the two disagree by more than 5e-2
};

EntropyEstimate rokhlin_entropy(const Family& family, double a, const DensityProfile& profile,
                                int birkhoff_n = 200000, double x0 = 0.1234567891);

}  // namespace shrinkdim
